//! Numerical core: standardization, Pearson correlation, correlation-matrix
//! PCA through cyclic Jacobi rotations, contributor classification, and
//! global Moran's I with a seeded permutation test.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::geometry::AdjacencyList;

/// Jacobi stops once the off-diagonal Frobenius norm drops below this.
pub const JACOBI_TOLERANCE: f64 = 1e-12;
pub const JACOBI_MAX_SWEEPS: usize = 100;

/// Smallest permutation count accepted by [`morans_i`].
pub const MIN_PERMUTATIONS: usize = 99;

/// Dense row-major matrix of finite reals.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows * cols != data.len() {
            return Err(Error::Domain(format!(
                "matrix shape {rows}x{cols} does not match {} values",
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("matrix entries must be finite".into()));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::Domain("ragged rows".into()));
        }
        Self::new(rows.len(), cols, rows.concat())
    }

    pub fn from_columns(columns: &[Vec<f64>]) -> Result<Self> {
        let rows = columns.first().map_or(0, Vec::len);
        if columns.iter().any(|c| c.len() != rows) {
            return Err(Error::Domain("ragged columns".into()));
        }
        let mut m = Self::zeros(rows, columns.len());
        for (j, col) in columns.iter().enumerate() {
            for (i, v) in col.iter().enumerate() {
                m[(i, j)] = *v;
            }
        }
        if m.data.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("matrix entries must be finite".into()));
        }
        Ok(m)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn transpose(&self) -> Matrix {
        let mut t = Matrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.rows {
            return Err(Error::Domain(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                for j in 0..other.cols {
                    out[(i, j)] += a * other[(k, j)];
                }
            }
        }
        Ok(out)
    }

    pub fn max_abs_diff(&self, other: &Matrix) -> f64 {
        assert_eq!(
            (self.rows, self.cols),
            (other.rows, other.cols),
            "shape mismatch"
        );
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

impl std::ops::Index<(usize, usize)> for Matrix {
    type Output = f64;

    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Centered values and their sum of squares; errors when the spread is nil.
fn centered(values: &[f64], name: &str) -> Result<(Vec<f64>, f64)> {
    let m = mean(values);
    let dev: Vec<f64> = values.iter().map(|v| v - m).collect();
    let ss: f64 = dev.iter().map(|d| d * d).sum();
    let scale = values.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    if ss <= (f64::EPSILON * scale).powi(2) * values.len() as f64 {
        return Err(Error::ConstantColumn(name.to_string()));
    }
    Ok((dev, ss))
}

/// Z-scores using the sample standard deviation (divisor n−1).
pub fn standardize(column: &[f64], name: &str) -> Result<Vec<f64>> {
    if column.len() < 2 {
        return Err(Error::Domain(format!(
            "standardizing {name} needs at least 2 values"
        )));
    }
    if column.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain(format!("{name} has non-finite values")));
    }
    let (dev, ss) = centered(column, name)?;
    let sd = (ss / (column.len() - 1) as f64).sqrt();
    Ok(dev.into_iter().map(|d| d / sd).collect())
}

/// Pearson correlation between two equal-length vectors.
pub fn pearson(a: &[f64], b: &[f64], names: (&str, &str)) -> Result<f64> {
    if a.len() != b.len() || a.len() < 2 {
        return Err(Error::Domain(
            "pearson needs two vectors of equal length ≥ 2".into(),
        ));
    }
    let (da, sa) = centered(a, names.0)?;
    let (db, sb) = centered(b, names.1)?;
    let cross: f64 = da.iter().zip(&db).map(|(x, y)| x * y).sum();
    Ok((cross / (sa.sqrt() * sb.sqrt())).clamp(-1.0, 1.0))
}

fn correlation_of_vectors(vectors: &[Vec<f64>], names: &[String]) -> Result<Matrix> {
    let p = vectors.len();
    let mut centered_vecs = Vec::with_capacity(p);
    for (v, name) in vectors.iter().zip(names) {
        let (dev, ss) = centered(v, name)?;
        let norm = ss.sqrt();
        centered_vecs.push(dev.into_iter().map(|d| d / norm).collect::<Vec<_>>());
    }
    let mut r = Matrix::identity(p);
    for i in 0..p {
        for j in i + 1..p {
            let c: f64 = centered_vecs[i]
                .iter()
                .zip(&centered_vecs[j])
                .map(|(x, y)| x * y)
                .sum();
            let c = c.clamp(-1.0, 1.0);
            r[(i, j)] = c;
            r[(j, i)] = c;
        }
    }
    Ok(r)
}

fn default_names(prefix: &str, n: usize) -> Vec<String> {
    (1..=n).map(|k| format!("{prefix}{k}")).collect()
}

fn resolve_names(names: Option<&[String]>, prefix: &str, n: usize) -> Result<Vec<String>> {
    match names {
        Some(ns) if ns.len() != n => Err(Error::Domain(format!(
            "expected {n} names, got {}",
            ns.len()
        ))),
        Some(ns) => Ok(ns.to_vec()),
        None => Ok(default_names(prefix, n)),
    }
}

/// Symmetric Pearson matrix between the columns of `table`.
pub fn correlation_matrix(table: &Matrix, names: Option<&[String]>) -> Result<Matrix> {
    if table.rows() < 2 {
        return Err(Error::Domain("correlation needs at least 2 rows".into()));
    }
    let names = resolve_names(names, "column ", table.cols())?;
    let columns: Vec<Vec<f64>> = (0..table.cols()).map(|j| table.column(j)).collect();
    correlation_of_vectors(&columns, &names)
}

/// Pearson correlation between the rows of a loading matrix (each row is
/// one variable's profile across all components).
pub fn loading_profile_correlation(loadings: &Matrix, names: Option<&[String]>) -> Result<Matrix> {
    if loadings.rows() != loadings.cols() {
        return Err(Error::Domain(format!(
            "loading matrix must be square, got {}x{}",
            loadings.rows(),
            loadings.cols()
        )));
    }
    let names = resolve_names(names, "row ", loadings.rows())?;
    let rows: Vec<Vec<f64>> = (0..loadings.rows())
        .map(|i| loadings.row(i).to_vec())
        .collect();
    correlation_of_vectors(&rows, &names)
}

/// Eigenvalues (unsorted, diagonal order) and eigenvectors (columns) of a
/// symmetric matrix via cyclic Jacobi rotations.
pub fn jacobi_eigen(a: &Matrix) -> Result<(Vec<f64>, Matrix, usize)> {
    let n = a.rows();
    if n != a.cols() {
        return Err(Error::Domain(
            "eigendecomposition needs a square matrix".into(),
        ));
    }
    for i in 0..n {
        for j in i + 1..n {
            if (a[(i, j)] - a[(j, i)]).abs() > 1e-12 * (1.0 + a[(i, j)].abs()) {
                return Err(Error::Domain(
                    "eigendecomposition needs a symmetric matrix".into(),
                ));
            }
        }
    }
    let mut m = a.clone();
    let mut v = Matrix::identity(n);
    let off_norm = |m: &Matrix| -> f64 {
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    s += m[(i, j)] * m[(i, j)];
                }
            }
        }
        s.sqrt()
    };

    let mut sweeps = 0;
    while off_norm(&m) >= JACOBI_TOLERANCE {
        if sweeps == JACOBI_MAX_SWEEPS {
            return Err(Error::Numerical(format!(
                "Jacobi did not converge after {JACOBI_MAX_SWEEPS} sweeps (off-diagonal norm {:e})",
                off_norm(&m)
            )));
        }
        sweeps += 1;
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let (app, aqq) = (m[(p, p)], m[(q, q)]);
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;

                for k in 0..n {
                    let mkp = m[(k, p)];
                    let mkq = m[(k, q)];
                    m[(k, p)] = c * mkp - s * mkq;
                    m[(k, q)] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[(p, k)];
                    let mqk = m[(q, k)];
                    m[(p, k)] = c * mpk - s * mqk;
                    m[(q, k)] = s * mpk + c * mqk;
                }
                m[(p, q)] = 0.0;
                m[(q, p)] = 0.0;
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    let values = (0..n).map(|i| m[(i, i)]).collect();
    Ok((values, v, sweeps))
}

/// Flips `v` so its largest-magnitude entry is positive (lowest index wins ties).
fn fix_sign(v: &mut [f64]) {
    let max = v.iter().fold(0.0f64, |acc, x| acc.max(x.abs()));
    if let Some(lead) = v.iter().position(|x| x.abs() >= max - 1e-12) {
        if v[lead] < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PcaResult {
    pub variables: Vec<String>,
    /// Non-increasing, clamped at zero.
    pub eigenvalues: Vec<f64>,
    pub proportions: Vec<f64>,
    /// p×p; column k is the unit eigenvector for `eigenvalues[k]`.
    pub loadings: Matrix,
    /// n×p component scores, `Z · loadings`.
    pub scores: Matrix,
    /// Pearson matrix the decomposition was taken of.
    pub correlation: Matrix,
    pub sweeps: usize,
}

impl PcaResult {
    pub fn component_count(&self) -> usize {
        self.eigenvalues.len()
    }

    /// `(variable, loading)` pairs for component `k` (0-based).
    pub fn loading_column(&self, k: usize) -> Vec<(String, f64)> {
        self.variables
            .iter()
            .enumerate()
            .map(|(i, v)| (v.clone(), self.loadings[(i, k)]))
            .collect()
    }

    pub fn cumulative_proportions(&self) -> Vec<f64> {
        self.proportions
            .iter()
            .scan(0.0, |acc, p| {
                *acc += p;
                Some(*acc)
            })
            .collect()
    }
}

/// Principal components of the correlation matrix of `table`'s columns.
pub fn pca(table: &Matrix, variables: &[String]) -> Result<PcaResult> {
    let (n, p) = (table.rows(), table.cols());
    if variables.len() != p {
        return Err(Error::Domain(format!(
            "{p} columns but {} variable names",
            variables.len()
        )));
    }
    if p == 0 || n < 2 {
        return Err(Error::Domain(format!(
            "PCA needs at least two observations and one variable (n = {n}, p = {p})"
        )));
    }
    if n <= p {
        log::warn!("PCA with n = {n} observations and p = {p} variables: the correlation matrix is rank-deficient");
    }
    let mut z_cols = Vec::with_capacity(p);
    for (j, name) in variables.iter().enumerate() {
        z_cols.push(standardize(&table.column(j), name)?);
    }
    let z = Matrix::from_columns(&z_cols)?;
    let correlation = correlation_of_vectors(&z_cols, variables)?;
    let (values, vectors, sweeps) = jacobi_eigen(&correlation)?;

    let mut pairs: Vec<(f64, Vec<f64>)> = (0..p)
        .map(|k| {
            let mut col = vectors.column(k);
            fix_sign(&mut col);
            (values[k].max(0.0), col)
        })
        .collect();
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0));
    // numerically tied eigenvalues: order by eigenvector, descending lexicographic
    let tie = |a: f64, b: f64| (a - b).abs() <= 1e-10 * a.abs().max(1.0);
    let mut start = 0;
    while start < p {
        let mut end = start + 1;
        while end < p && tie(pairs[start].0, pairs[end].0) {
            end += 1;
        }
        pairs[start..end].sort_by(|a, b| {
            b.1.iter()
                .zip(&a.1)
                .map(|(x, y)| x.total_cmp(y))
                .find(|o| o.is_ne())
                .unwrap_or(std::cmp::Ordering::Equal)
        });
        start = end;
    }

    let eigenvalues: Vec<f64> = pairs.iter().map(|(l, _)| *l).collect();
    let total: f64 = eigenvalues.iter().sum();
    let proportions = eigenvalues.iter().map(|l| l / total).collect();
    let vecs: Vec<Vec<f64>> = pairs.into_iter().map(|(_, v)| v).collect();
    let loadings = Matrix::from_columns(&vecs)?;
    let scores = z.matmul(&loadings)?;

    Ok(PcaResult {
        variables: variables.to_vec(),
        eigenvalues,
        proportions,
        loadings,
        scores,
        correlation,
        sweeps,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContributorThresholds {
    pub significant: f64,
    pub secondary: f64,
}

impl Default for ContributorThresholds {
    fn default() -> Self {
        Self {
            significant: 0.4,
            secondary: 0.1,
        }
    }
}

impl ContributorThresholds {
    pub fn validate(&self) -> Result<()> {
        if !(0.0 < self.secondary && self.secondary < self.significant && self.significant <= 1.0) {
            return Err(Error::Config(format!(
                "thresholds must satisfy 0 < secondary ({}) < significant ({}) ≤ 1",
                self.secondary, self.significant
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Contributors {
    pub significant: Vec<String>,
    pub secondary: Vec<String>,
}

/// Role of a variable within one component.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ContributorRole {
    Significant,
    Secondary,
    Minor,
}

impl ContributorRole {
    pub fn label(&self) -> &'static str {
        match self {
            ContributorRole::Significant => "significant",
            ContributorRole::Secondary => "secondary",
            ContributorRole::Minor => "none",
        }
    }
}

pub fn contributor_role(loading: f64, thresholds: &ContributorThresholds) -> ContributorRole {
    let a = loading.abs();
    if a >= thresholds.significant {
        ContributorRole::Significant
    } else if a >= thresholds.secondary {
        ContributorRole::Secondary
    } else {
        ContributorRole::Minor
    }
}

/// Splits one component's variables into significant (|l| ≥ significant)
/// and secondary (secondary ≤ |l| < significant) contributors, keeping
/// input order.
pub fn classify_contributors(
    loading_column: &[(String, f64)],
    thresholds: &ContributorThresholds,
) -> Result<Contributors> {
    thresholds.validate()?;
    let mut out = Contributors::default();
    for (name, loading) in loading_column {
        if !(loading.abs() <= 1.0 + 1e-9) {
            return Err(Error::Domain(format!(
                "loading {loading} for {name} exceeds 1 in magnitude"
            )));
        }
        match contributor_role(*loading, thresholds) {
            ContributorRole::Significant => out.significant.push(name.clone()),
            ContributorRole::Secondary => out.secondary.push(name.clone()),
            ContributorRole::Minor => {}
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct MoranResult {
    pub i: f64,
    pub expected: f64,
    pub permutations: usize,
    pub pseudo_p: f64,
    pub seed: u64,
}

fn check_moran_inputs(values: &[f64], adjacency: &AdjacencyList) -> Result<()> {
    let n = values.len();
    if n < 3 {
        return Err(Error::Domain(format!(
            "Moran's I needs at least 3 units, got {n}"
        )));
    }
    if adjacency.len() != n {
        return Err(Error::Domain(format!(
            "{n} values but {} adjacency rows",
            adjacency.len()
        )));
    }
    if adjacency.isolates() == n {
        return Err(Error::Domain("no unit has a neighbor".into()));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain("Moran's I values must be finite".into()));
    }
    Ok(())
}

/// Moran's I of already-centered values under row-standardized weights.
fn moran_of_deviations(z: &[f64], ss: f64, adjacency: &AdjacencyList, s0: f64) -> f64 {
    let mut cross = 0.0;
    for (i, zi) in z.iter().enumerate() {
        let nb = adjacency.neighbors(i);
        if nb.is_empty() {
            continue;
        }
        let lag: f64 = nb.iter().map(|&j| z[j]).sum::<f64>() / nb.len() as f64;
        cross += zi * lag;
    }
    (z.len() as f64 / s0) * cross / ss
}

/// Global Moran's I statistic with row-standardized weights.
pub fn morans_i_statistic(values: &[f64], adjacency: &AdjacencyList) -> Result<f64> {
    check_moran_inputs(values, adjacency)?;
    let (z, ss) = centered(values, "Moran's I input")?;
    let s0 = (values.len() - adjacency.isolates()) as f64;
    Ok(moran_of_deviations(&z, ss, adjacency, s0))
}

/// I under each of `permutations` random relabelings; relabeling `t` draws
/// from a generator seeded with `seed + t`.
pub fn permutation_null(
    values: &[f64],
    adjacency: &AdjacencyList,
    permutations: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    check_moran_inputs(values, adjacency)?;
    let (z, ss) = centered(values, "Moran's I input")?;
    let s0 = (values.len() - adjacency.isolates()) as f64;
    let mut buf = z.clone();
    Ok((0..permutations as u64)
        .map(|t| {
            buf.copy_from_slice(&z);
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(t));
            buf.shuffle(&mut rng);
            moran_of_deviations(&buf, ss, adjacency, s0)
        })
        .collect())
}

/// Global Moran's I with a two-sided permutation pseudo p-value.
pub fn morans_i(
    values: &[f64],
    adjacency: &AdjacencyList,
    permutations: usize,
    seed: u64,
) -> Result<MoranResult> {
    if permutations < MIN_PERMUTATIONS {
        return Err(Error::Domain(format!(
            "{permutations} permutations requested, at least {MIN_PERMUTATIONS} required"
        )));
    }
    let i = morans_i_statistic(values, adjacency)?;
    let null = permutation_null(values, adjacency, permutations, seed)?;
    // relative slack so relabelings equal to the observed arrangement count
    let cut = i.abs() * (1.0 - 1e-12);
    let extreme = null.iter().filter(|v| v.abs() >= cut).count();
    Ok(MoranResult {
        i,
        expected: -1.0 / (values.len() as f64 - 1.0),
        permutations,
        pseudo_p: (extreme + 1) as f64 / (permutations + 1) as f64,
        seed,
    })
}

//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any fails.

mod common;

use std::fs;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use access_atlas::cli::{cmd_report, load_analysis, moran_table, ConfigFile, Overrides, RunConfig};
use access_atlas::geometry::{
    circle_intersects_polygon, queen_adjacency, AdjacencyList, MultiPolygon, Polygon,
    ProjectedPoint,
};
use access_atlas::report::{boxmap_classify, BoxMapClass};
use access_atlas::stats::{
    classify_contributors, loading_profile_correlation, morans_i_statistic, pca, permutation_null,
    ContributorThresholds, Matrix,
};
use common::graphs::{check_against_oracle, random_graph};
use common::{
    pca3, sampled_boundary_distance, winding_inside, REFERENCE_LOADINGS, REFERENCE_LOADING_CORR,
    REFERENCE_PROPORTIONS, VARS,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tempfile::TempDir;

type Outcome = Result<String, String>;
type Criterion = (&'static str, Duration, fn() -> Outcome);

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn reference_loadings() -> Matrix {
    Matrix::from_rows(
        &REFERENCE_LOADINGS
            .iter()
            .map(|r| r.to_vec())
            .collect::<Vec<_>>(),
    )
    .unwrap()
}

fn loading_profile_reproduction() -> Outcome {
    let r = loading_profile_correlation(&reference_loadings(), None).map_err(|e| e.to_string())?;
    let mut worst = 0.0f64;
    let mut entries = 0;
    for i in 0..10 {
        for j in i + 1..10 {
            let d = (r[(i, j)] - REFERENCE_LOADING_CORR[i][j]).abs();
            check(d <= 2e-3, || {
                format!("entry ({}, {}) off by {d:.2e}", VARS[i], VARS[j])
            })?;
            worst = worst.max(d);
            entries += 1;
        }
    }
    let pov_snap = r[(6, 9)];
    let int_pop = r[(0, 1)];
    Ok(format!(
        "{entries} entries within 2e-3, max |diff| {worst:.1e}; AFF_POV/ACO_SNAP {pov_snap:.5} (ref -0.0361), AV_INT/AV_POP {int_pop:.5} (ref -0.0007)"
    ))
}

fn variance_and_orthonormality() -> Outcome {
    let total: f64 = REFERENCE_PROPORTIONS.iter().sum();
    let first4: f64 = REFERENCE_PROPORTIONS[..4].iter().sum();
    check((total - 1.0).abs() <= 2e-3, || {
        format!("proportions sum to {total}")
    })?;
    check((first4 - 0.8190).abs() <= 1e-3, || {
        format!("first four sum to {first4}")
    })?;
    let l = reference_loadings();
    let gram = l.transpose().matmul(&l).unwrap();
    let (mut norm_err, mut dot_err) = (0.0f64, 0.0f64);
    for a in 0..10 {
        for b in 0..10 {
            if a == b {
                norm_err = norm_err.max((gram[(a, a)].sqrt() - 1.0).abs());
            } else {
                dot_err = dot_err.max(gram[(a, b)].abs());
            }
        }
    }
    check(norm_err <= 5e-3, || {
        format!("column norm off by {norm_err:.2e}")
    })?;
    check(dot_err <= 5e-3, || {
        format!("column dot product {dot_err:.2e}")
    })?;
    Ok(format!(
        "sum {total:.4}, first four {first4:.4}, max |norm-1| {norm_err:.1e}, max |dot| {dot_err:.1e}"
    ))
}

fn first_component_contributors() -> Outcome {
    let col: Vec<(String, f64)> = VARS
        .iter()
        .enumerate()
        .map(|(i, v)| (v.to_string(), REFERENCE_LOADINGS[i][0]))
        .collect();
    let c = classify_contributors(&col, &ContributorThresholds::default())
        .map_err(|e| e.to_string())?;
    check(
        c.significant == ["AFF_POV", "AFF_UNEMP", "ACO_SNAP"],
        || format!("significant = {:?}", c.significant),
    )?;
    check(!c.secondary.iter().any(|v| v == "ACE_ELD"), || {
        "ACE_ELD listed as secondary".into()
    })?;
    Ok(format!(
        "significant {:?}; secondary {:?}",
        c.significant, c.secondary
    ))
}

fn minitown_config() -> RunConfig {
    RunConfig::resolve(
        ConfigFile::load(&common::minitown_config()).unwrap(),
        &Overrides::default(),
        None,
    )
    .unwrap()
}

fn minitown_reruns_identical() -> Outcome {
    let dirs = [TempDir::new().unwrap(), TempDir::new().unwrap()];
    let mut trees = Vec::new();
    for dir in &dirs {
        let mut cfg = minitown_config();
        cfg.out_dir = dir.path().to_path_buf();
        cmd_report(&cfg).map_err(|e| e.to_string())?;
        let mut files: Vec<(String, Vec<u8>)> = fs::read_dir(dir.path())
            .unwrap()
            .map(|e| {
                let e = e.unwrap();
                (
                    e.file_name().to_string_lossy().into_owned(),
                    fs::read(e.path()).unwrap(),
                )
            })
            .collect();
        files.sort();
        trees.push(files);
    }
    check(trees[0] == trees[1], || "output trees differ".into())?;
    let bytes: usize = trees[0].iter().map(|(_, b)| b.len()).sum();
    Ok(format!(
        "{} files, {bytes} bytes, identical across reruns",
        trees[0].len()
    ))
}

fn pca_cubic_oracle() -> Outcome {
    let table =
        Matrix::from_rows(&pca3::TABLE.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap();
    let res = pca(&table, &["a".into(), "b".into(), "c".into()]).map_err(|e| e.to_string())?;
    let (roots, _) = pca3::eigen(&pca3::correlation(&pca3::TABLE));
    let eig_err = (0..3)
        .map(|k| (res.eigenvalues[k] - roots[k]).abs())
        .fold(0.0, f64::max);
    check(eig_err <= 1e-8, || {
        format!("eigenvalue error {eig_err:.2e}")
    })?;
    let mut recon = Matrix::zeros(3, 3);
    for i in 0..3 {
        for j in 0..3 {
            recon[(i, j)] = (0..3)
                .map(|k| res.loadings[(i, k)] * res.eigenvalues[k] * res.loadings[(j, k)])
                .sum();
        }
    }
    let recon_err = recon.max_abs_diff(&res.correlation);
    check(recon_err <= 1e-8, || {
        format!("reconstruction error {recon_err:.2e}")
    })?;
    let trace_err = (res.eigenvalues.iter().sum::<f64>() - 3.0).abs();
    check(trace_err <= 1e-8, || format!("trace error {trace_err:.2e}"))?;
    Ok(format!(
        "eigenvalues {eig_err:.1e}, reconstruction {recon_err:.1e}, trace {trace_err:.1e}"
    ))
}

fn shortest_path_oracle() -> Outcome {
    let mut worst = 0.0f64;
    let mut nodes = 0;
    for seed in 0..30 {
        let g = random_graph(seed);
        nodes += g.nodes.len();
        worst = worst.max(check_against_oracle(&g).map_err(|e| format!("graph {seed}: {e}"))?);
    }
    check(worst <= 1e-9, || format!("relative error {worst:.2e}"))?;
    Ok(format!(
        "30 connected graphs, {nodes} nodes, max relative error {worst:.1e}"
    ))
}

fn chain(n: usize) -> AdjacencyList {
    AdjacencyList::from_pairs(n, (0..n - 1).map(|i| (i, i + 1))).unwrap()
}

fn moran_checks() -> Outcome {
    let alt = morans_i_statistic(&[1.0, -1.0, 1.0, -1.0], &chain(4)).map_err(|e| e.to_string())?;
    let step = morans_i_statistic(&[5.0, 5.0, 0.0, 0.0], &chain(4)).map_err(|e| e.to_string())?;
    check(alt == -1.0, || format!("alternating chain I = {alt}"))?;
    check(step == 0.5, || format!("step chain I = {step}"))?;

    let cfg = minitown_config();
    let analysis = load_analysis(&cfg).map_err(|e| e.to_string())?;
    let shapes: Vec<MultiPolygon> = analysis.tracts.iter().map(|t| t.shape.clone()).collect();
    let adj = queen_adjacency(&shapes);
    let values = analysis.table.column("AFF_POV").unwrap();
    let null = permutation_null(&values, &adj, 10_000, cfg.seed).map_err(|e| e.to_string())?;
    let mean = null.iter().sum::<f64>() / null.len() as f64;
    let expected = -1.0 / (values.len() as f64 - 1.0);
    check((mean - expected).abs() <= 0.01, || {
        format!("null mean {mean:.4} vs {expected:.4}")
    })?;
    // the planted gradient registers through the full table as well
    let pov = moran_table(&cfg, &analysis).map_err(|e| e.to_string())?;
    let pov = &pov.iter().find(|(v, _)| v == "AFF_POV").unwrap().1;
    Ok(format!(
        "chain I = {alt} and {step}; null mean {mean:.4} (expected {expected:.4}) over 10000; AFF_POV I {:.3} p {:.3}",
        pov.i, pov.pseudo_p
    ))
}

/// Random polygon around the origin: convex hull-ordered points on a circle,
/// or a star with jittered radii.
fn random_ring(rng: &mut ChaCha8Rng, convex: bool) -> Vec<ProjectedPoint> {
    let r = rng.random_range(200.0..2000.0);
    let n = rng.random_range(5..20);
    let mut angles: Vec<f64> = (0..n)
        .map(|k| (k as f64 + rng.random_range(0.1..0.9)) / n as f64 * std::f64::consts::TAU)
        .collect();
    angles.sort_by(f64::total_cmp);
    angles
        .iter()
        .map(|a| {
            let rad = if convex {
                r
            } else {
                r * rng.random_range(0.25..1.0)
            };
            ProjectedPoint::new(rad * a.cos(), rad * a.sin())
        })
        .collect()
}

fn geometry_and_boxmap() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x6e6f);
    let (mut agreed, mut skipped, mut hits) = (0, 0, 0);
    for fixture in 0..100 {
        let convex = fixture < 50;
        let ring = random_ring(&mut rng, convex);
        let poly =
            Polygon::from_exterior(ring.clone()).map_err(|e| format!("fixture {fixture}: {e}"))?;
        let mut closed = ring;
        closed.push(closed[0]);
        for _ in 0..20 {
            let c = ProjectedPoint::new(
                rng.random_range(-3000.0..3000.0),
                rng.random_range(-3000.0..3000.0),
            );
            let d = sampled_boundary_distance(&c, &closed, 1.0);
            let radius = d * rng.random_range(0.5..1.5) + rng.random_range(1.0..50.0);
            // samples 1 m apart can overstate the distance by up to half a meter
            if (d - radius).abs() <= 1.0 {
                skipped += 1;
                continue;
            }
            let oracle = winding_inside(&c, &closed) || d <= radius;
            let got = circle_intersects_polygon(&c, radius, &poly);
            check(got == oracle, || {
                format!("fixture {fixture}: center {c:?} r {radius}: got {got}, oracle {oracle}")
            })?;
            agreed += 1;
            hits += got as usize;
        }
    }
    use BoxMapClass::*;
    let classes = boxmap_classify(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 100.0], 1.5)
        .map_err(|e| e.to_string())?;
    let want = [Q1, Q1, Q2, Q2, Q3, Q3, Q4, UpperOutlier];
    check(classes == want, || format!("box map classes {classes:?}"))?;
    Ok(format!(
        "100 polygons, {agreed} circles agree ({hits} intersecting), {skipped} in the 1 m band skipped; box map classes match"
    ))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 8] = [
        (
            "loading-profile correlation of the reference loadings",
            Duration::from_secs(1),
            loading_profile_reproduction,
        ),
        (
            "reference variance proportions and loading orthonormality",
            Duration::from_secs(1),
            variance_and_orthonormality,
        ),
        (
            "first-component contributor sets",
            Duration::from_secs(1),
            first_component_contributors,
        ),
        (
            "minitown end-to-end determinism",
            Duration::from_secs(30),
            minitown_reruns_identical,
        ),
        (
            "PCA vs characteristic-cubic oracle",
            Duration::from_secs(1),
            pca_cubic_oracle,
        ),
        (
            "multi-source Dijkstra vs Floyd-Warshall",
            Duration::from_secs(5),
            shortest_path_oracle,
        ),
        (
            "Moran's I exact values and permutation null",
            Duration::from_secs(10),
            moran_checks,
        ),
        (
            "circle-polygon sampling oracle and box-map classes",
            Duration::from_secs(5),
            geometry_and_boxmap,
        ),
    ];
    let mut failed = 0;
    for (name, budget, f) in criteria {
        let start = Instant::now();
        let outcome = f();
        let elapsed = start.elapsed();
        let outcome = match outcome {
            Ok(detail) if elapsed > budget => {
                Err(format!("{detail}; took {elapsed:?}, budget {budget:?}"))
            }
            other => other,
        };
        match outcome {
            Ok(detail) => println!(
                "PASS  {name}: {detail} [{:.1} ms]",
                elapsed.as_secs_f64() * 1e3
            ),
            Err(why) => {
                failed += 1;
                println!(
                    "FAIL  {name}: {why} [{:.1} ms]",
                    elapsed.as_secs_f64() * 1e3
                );
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", 8 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

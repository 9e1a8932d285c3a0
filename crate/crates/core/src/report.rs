//! Box-map classification of component scores and every file the pipeline
//! writes: CSV tables, an annotated GeoJSON layer, and SVG choropleths.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde_json::{json, Map, Value};

use crate::error::{Error, Result};
use crate::geometry::MultiPolygon;
use crate::ingest::{DroppedTract, TractGeometry, VariableTable, VARIABLES};
use crate::stats::{
    classify_contributors, contributor_role, loading_profile_correlation, ContributorThresholds,
    Contributors, Matrix, MoranResult, PcaResult,
};

pub const DEFAULT_HINGE: f64 = 1.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum BoxMapClass {
    LowerOutlier,
    Q1,
    Q2,
    Q3,
    Q4,
    UpperOutlier,
}

impl BoxMapClass {
    pub const ALL: [BoxMapClass; 6] = [
        BoxMapClass::LowerOutlier,
        BoxMapClass::Q1,
        BoxMapClass::Q2,
        BoxMapClass::Q3,
        BoxMapClass::Q4,
        BoxMapClass::UpperOutlier,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            BoxMapClass::LowerOutlier => "lower_outlier",
            BoxMapClass::Q1 => "q1",
            BoxMapClass::Q2 => "q2",
            BoxMapClass::Q3 => "q3",
            BoxMapClass::Q4 => "q4",
            BoxMapClass::UpperOutlier => "upper_outlier",
        }
    }

    pub fn legend_label(&self) -> &'static str {
        match self {
            BoxMapClass::LowerOutlier => "Lower outlier",
            BoxMapClass::Q1 => "< 25%",
            BoxMapClass::Q2 => "25% - 50%",
            BoxMapClass::Q3 => "50% - 75%",
            BoxMapClass::Q4 => "> 75%",
            BoxMapClass::UpperOutlier => "Upper outlier",
        }
    }

    /// Diverging blue-to-orange palette.
    pub fn color(&self) -> &'static str {
        match self {
            BoxMapClass::LowerOutlier => "#2166ac",
            BoxMapClass::Q1 => "#92c5de",
            BoxMapClass::Q2 => "#e0f3f8",
            BoxMapClass::Q3 => "#fee0b6",
            BoxMapClass::Q4 => "#fdb863",
            BoxMapClass::UpperOutlier => "#e66101",
        }
    }
}

impl FromStr for BoxMapClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        BoxMapClass::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| Error::Domain(format!("unknown box-map class `{s}`")))
    }
}

pub const NO_DATA_COLOR: &str = "#d9d9d9";

/// Quartiles and hinge fences of a sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoxMapBreaks {
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub lower_fence: f64,
    pub upper_fence: f64,
}

impl BoxMapBreaks {
    pub fn classify(&self, v: f64) -> BoxMapClass {
        if v < self.lower_fence {
            BoxMapClass::LowerOutlier
        } else if v > self.upper_fence {
            BoxMapClass::UpperOutlier
        } else if v <= self.q1 {
            BoxMapClass::Q1
        } else if v <= self.median {
            BoxMapClass::Q2
        } else if v <= self.q3 {
            BoxMapClass::Q3
        } else {
            BoxMapClass::Q4
        }
    }
}

/// Linear interpolation at position `p·(n−1)` of a sorted sample.
fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let pos = p * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn boxmap_breaks(values: &[f64], hinge: f64) -> Result<BoxMapBreaks> {
    if values.len() < 5 {
        return Err(Error::Domain(format!(
            "box map needs at least 5 values, got {}",
            values.len()
        )));
    }
    if !(hinge.is_finite() && hinge > 0.0) {
        return Err(Error::Domain(format!("hinge {hinge} must be positive")));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain("box map values must be finite".into()));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let q1 = quantile_sorted(&sorted, 0.25);
    let median = quantile_sorted(&sorted, 0.5);
    let q3 = quantile_sorted(&sorted, 0.75);
    let iqr = q3 - q1;
    Ok(BoxMapBreaks {
        q1,
        median,
        q3,
        lower_fence: q1 - hinge * iqr,
        upper_fence: q3 + hinge * iqr,
    })
}

/// Box-map class of every value with fences at `hinge`×IQR beyond the quartiles.
pub fn boxmap_classify(values: &[f64], hinge: f64) -> Result<Vec<BoxMapClass>> {
    let breaks = boxmap_breaks(values, hinge)?;
    Ok(values.iter().map(|&v| breaks.classify(v)).collect())
}

/// Everything the report tables are rendered from.
#[derive(Debug, Clone)]
pub struct ReportBundle {
    pub pca: PcaResult,
    pub thresholds: ContributorThresholds,
    pub contributors: Vec<Contributors>,
    pub loading_correlation: Matrix,
    pub tract_ids: Vec<String>,
    pub hinge: f64,
    /// `classes[k][i]` is tract `i`'s class on component `k`, for the mapped components.
    pub classes: Vec<Vec<BoxMapClass>>,
    pub moran: Option<Vec<(String, MoranResult)>>,
}

impl ReportBundle {
    pub fn new(
        table: &VariableTable,
        pca: PcaResult,
        thresholds: ContributorThresholds,
        hinge: f64,
        components_mapped: usize,
    ) -> Result<Self> {
        let p = pca.component_count();
        if pca.scores.rows() != table.len() {
            return Err(Error::Domain(format!(
                "{} score rows for {} tracts",
                pca.scores.rows(),
                table.len()
            )));
        }
        if components_mapped == 0 || components_mapped > p {
            return Err(Error::Config(format!(
                "components_mapped must be between 1 and {p}, got {components_mapped}"
            )));
        }
        let contributors = (0..p)
            .map(|k| classify_contributors(&pca.loading_column(k), &thresholds))
            .collect::<Result<Vec<_>>>()?;
        // a one-component profile has no spread; its only entry is the diagonal
        let loading_correlation = if p == 1 {
            Matrix::identity(1)
        } else {
            loading_profile_correlation(&pca.loadings, Some(&pca.variables))?
        };
        let classes = (0..components_mapped)
            .map(|k| boxmap_classify(&pca.scores.column(k), hinge))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            pca,
            thresholds,
            contributors,
            loading_correlation,
            tract_ids: table.tract_ids.clone(),
            hinge,
            classes,
            moran: None,
        })
    }

    pub fn components_mapped(&self) -> usize {
        self.classes.len()
    }

    pub fn with_moran(mut self, moran: Vec<(String, MoranResult)>) -> Self {
        self.moran = Some(moran);
        self
    }
}

/// Six-decimal rendering with negative zero folded into zero.
pub fn fmt6(v: f64) -> String {
    let s = format!("{v:.6}");
    if s == "-0.000000" {
        "0.000000".to_string()
    } else {
        s
    }
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|source| Error::Write {
        path: dir.to_path_buf(),
        source,
    })
}

fn write_csv(path: &Path, header: &[String], rows: &[Vec<String>]) -> Result<PathBuf> {
    let io = |e: csv::Error| Error::Write {
        path: path.to_path_buf(),
        source: e.into(),
    };
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(path)
        .map_err(io)?;
    w.write_record(header).map_err(io)?;
    for row in rows {
        w.write_record(row).map_err(io)?;
    }
    w.flush().map_err(|source| Error::Write {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(path.to_path_buf())
}

fn write_text(path: &Path, text: &str) -> Result<PathBuf> {
    fs::write(path, text).map_err(|source| Error::Write {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(path.to_path_buf())
}

fn component_labels(p: usize) -> Vec<String> {
    (1..=p).map(|k| format!("PC{k}")).collect()
}

fn square_table(names: &[String], m: &Matrix) -> Vec<Vec<String>> {
    names
        .iter()
        .enumerate()
        .map(|(i, name)| {
            std::iter::once(name.clone())
                .chain(m.row(i).iter().map(|v| fmt6(*v)))
                .collect()
        })
        .collect()
}

/// Writes `variables.csv` and `dropped.csv`.
pub fn emit_variables(table: &VariableTable, out_dir: &Path) -> Result<Vec<PathBuf>> {
    ensure_dir(out_dir)?;
    let header: Vec<String> = std::iter::once("tract_id")
        .chain(VARIABLES)
        .map(str::to_string)
        .collect();
    let rows: Vec<Vec<String>> = table
        .tract_ids
        .iter()
        .enumerate()
        .map(|(i, id)| {
            std::iter::once(id.clone())
                .chain(table.values.row(i).iter().map(|v| fmt6(*v)))
                .collect()
        })
        .collect();
    let dropped: Vec<Vec<String>> = table
        .dropped
        .iter()
        .map(|d| vec![d.tract_id.clone(), d.reason.clone()])
        .collect();
    Ok(vec![
        write_csv(&out_dir.join("variables.csv"), &header, &rows)?,
        write_csv(
            &out_dir.join("dropped.csv"),
            &["tract_id".into(), "reason".into()],
            &dropped,
        )?,
    ])
}

/// Writes `moran.csv`: one row per variable.
pub fn emit_moran(moran: &[(String, MoranResult)], out_dir: &Path) -> Result<PathBuf> {
    ensure_dir(out_dir)?;
    let header: Vec<String> = [
        "variable",
        "I",
        "expected",
        "pseudo_p",
        "permutations",
        "seed",
    ]
    .map(str::to_string)
    .to_vec();
    let rows: Vec<Vec<String>> = moran
        .iter()
        .map(|(name, m)| {
            vec![
                name.clone(),
                fmt6(m.i),
                fmt6(m.expected),
                fmt6(m.pseudo_p),
                m.permutations.to_string(),
                m.seed.to_string(),
            ]
        })
        .collect();
    write_csv(&out_dir.join("moran.csv"), &header, &rows)
}

/// Writes the PCA tables, plus `moran.csv` when the bundle carries Moran results.
pub fn emit_tables(bundle: &ReportBundle, out_dir: &Path) -> Result<Vec<PathBuf>> {
    ensure_dir(out_dir)?;
    let pca = &bundle.pca;
    let p = pca.component_count();
    let labels = component_labels(p);
    let mut files = Vec::new();

    let cumulative = pca.cumulative_proportions();
    let variance: Vec<Vec<String>> = (0..p)
        .map(|k| {
            vec![
                labels[k].clone(),
                fmt6(pca.eigenvalues[k]),
                fmt6(pca.proportions[k]),
                fmt6(cumulative[k]),
            ]
        })
        .collect();
    files.push(write_csv(
        &out_dir.join("variance.csv"),
        &["component", "eigenvalue", "proportion", "cumulative"].map(str::to_string),
        &variance,
    )?);

    let with_first = |first: &str| -> Vec<String> {
        std::iter::once(first.to_string())
            .chain(labels.clone())
            .collect()
    };
    files.push(write_csv(
        &out_dir.join("loadings.csv"),
        &with_first("variable"),
        &square_table(&pca.variables, &pca.loadings),
    )?);

    let mut contributors = Vec::new();
    for (k, label) in labels.iter().enumerate() {
        for (name, loading) in pca.loading_column(k) {
            let role = contributor_role(loading, &bundle.thresholds);
            contributors.push(vec![
                label.clone(),
                name,
                fmt6(loading),
                role.label().to_string(),
            ]);
        }
    }
    files.push(write_csv(
        &out_dir.join("contributors.csv"),
        &["component", "variable", "loading", "role"].map(str::to_string),
        &contributors,
    )?);

    let var_header: Vec<String> = std::iter::once("variable".to_string())
        .chain(pca.variables.clone())
        .collect();
    files.push(write_csv(
        &out_dir.join("var_corr.csv"),
        &var_header,
        &square_table(&pca.variables, &pca.correlation),
    )?);
    files.push(write_csv(
        &out_dir.join("loading_corr.csv"),
        &var_header,
        &square_table(&pca.variables, &bundle.loading_correlation),
    )?);

    let mut score_header = with_first("tract_id");
    score_header.extend((1..=bundle.components_mapped()).map(|k| format!("pc{k}_class")));
    let scores: Vec<Vec<String>> = bundle
        .tract_ids
        .iter()
        .enumerate()
        .map(|(i, id)| {
            std::iter::once(id.clone())
                .chain(pca.scores.row(i).iter().map(|v| fmt6(*v)))
                .chain(bundle.classes.iter().map(|c| c[i].as_str().to_string()))
                .collect()
        })
        .collect();
    files.push(write_csv(
        &out_dir.join("scores.csv"),
        &score_header,
        &scores,
    )?);

    if let Some(moran) = &bundle.moran {
        files.push(emit_moran(moran, out_dir)?);
    }
    Ok(files)
}

/// Per-tract lookup of mapped scores and classes.
#[derive(Debug, Clone)]
pub struct MappedScores<'a> {
    bundle: &'a ReportBundle,
    dropped: &'a [DroppedTract],
    index: HashMap<&'a str, usize>,
}

impl<'a> MappedScores<'a> {
    pub fn new(bundle: &'a ReportBundle, dropped: &'a [DroppedTract]) -> Result<Self> {
        let n = bundle.tract_ids.len();
        if bundle.pca.scores.rows() != n || bundle.classes.iter().any(|c| c.len() != n) {
            return Err(Error::Domain(format!(
                "score rows ({}) and class rows do not match {n} tracts",
                bundle.pca.scores.rows()
            )));
        }
        let index = bundle
            .tract_ids
            .iter()
            .enumerate()
            .map(|(i, id)| (id.as_str(), i))
            .collect();
        Ok(Self {
            bundle,
            dropped,
            index,
        })
    }

    fn class(&self, tract_id: &str, component: usize) -> Option<BoxMapClass> {
        self.index
            .get(tract_id)
            .map(|&i| self.bundle.classes[component][i])
    }
}

/// FeatureCollection echoing the input geometry with `pcK_score`/`pcK_class`
/// properties; dropped tracts get nulls and a `dropped_reason`.
pub fn render_geojson(tracts: &[TractGeometry], mapped: &MappedScores) -> Result<String> {
    for id in mapped.index.keys() {
        if !tracts.iter().any(|t| t.tract_id == *id) {
            return Err(Error::Domain(format!("scored tract {id} has no geometry")));
        }
    }
    let bundle = mapped.bundle;
    let k_max = bundle.components_mapped();
    let features: Vec<Value> = tracts
        .iter()
        .map(|t| {
            let mut props = Map::new();
            props.insert("tract_id".into(), json!(t.tract_id));
            let row = mapped.index.get(t.tract_id.as_str()).copied();
            for k in 0..k_max {
                let (score, class) = match row {
                    Some(i) => (
                        json!(bundle.pca.scores[(i, k)]),
                        json!(bundle.classes[k][i].as_str()),
                    ),
                    None => (Value::Null, Value::Null),
                };
                props.insert(format!("pc{}_score", k + 1), score);
                props.insert(format!("pc{}_class", k + 1), class);
            }
            if row.is_none() {
                let reason = mapped
                    .dropped
                    .iter()
                    .find(|d| d.tract_id == t.tract_id)
                    .map_or("not analysed", |d| d.reason.as_str());
                props.insert("dropped_reason".into(), json!(reason));
            }
            json!({
                "type": "Feature",
                "properties": props,
                "geometry": t.source_geometry,
            })
        })
        .collect();
    let doc = json!({ "type": "FeatureCollection", "features": features });
    let mut text = serde_json::to_string_pretty(&doc).expect("JSON values always serialize");
    text.push('\n');
    Ok(text)
}

pub fn emit_geojson(
    tracts: &[TractGeometry],
    mapped: &MappedScores,
    out_path: &Path,
) -> Result<PathBuf> {
    let text = render_geojson(tracts, mapped)?;
    if let Some(dir) = out_path.parent() {
        ensure_dir(dir)?;
    }
    write_text(out_path, &text)
}

/// One polygon to draw on a choropleth; `class` is `None` for no data.
#[derive(Debug, Clone, Copy)]
pub struct MapFeature<'a> {
    pub id: &'a str,
    pub shape: &'a MultiPolygon,
    pub class: Option<BoxMapClass>,
}

const SVG_MAP_WIDTH: f64 = 640.0;
const SVG_MARGIN: f64 = 12.0;
const SVG_LEGEND_WIDTH: f64 = 150.0;

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// SVG 1.1 box map: one `<path>` per feature and a six-swatch legend.
pub fn render_svg_choropleth(features: &[MapFeature], title: &str) -> Result<String> {
    if features.is_empty() {
        return Err(Error::Domain(
            "choropleth needs at least one feature".into(),
        ));
    }
    let bb = features
        .iter()
        .map(|f| f.shape.bbox())
        .reduce(|a, b| crate::geometry::BoundingBox {
            min_x: a.min_x.min(b.min_x),
            min_y: a.min_y.min(b.min_y),
            max_x: a.max_x.max(b.max_x),
            max_y: a.max_y.max(b.max_y),
        })
        .expect("non-empty");
    let span = bb.width().max(bb.height()).max(f64::MIN_POSITIVE);
    let scale = (SVG_MAP_WIDTH - 2.0 * SVG_MARGIN) / span;
    let map_height = (bb.height() * scale + 2.0 * SVG_MARGIN).max(6.0 * 22.0 + 60.0);
    let width = SVG_MAP_WIDTH + SVG_LEGEND_WIDTH;
    let title_h = 28.0;
    let height = map_height + title_h;
    // y grows downward in SVG
    let tx = |x: f64| SVG_MARGIN + (x - bb.min_x) * scale;
    let ty = |y: f64| title_h + SVG_MARGIN + (bb.max_y - y) * scale;

    let mut svg = String::new();
    let _ = writeln!(svg, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{width:.0}" height="{height:.0}" viewBox="0 0 {width:.0} {height:.0}">"#
    );
    let _ = writeln!(
        svg,
        r##"<rect x="0" y="0" width="{width:.0}" height="{height:.0}" fill="#ffffff"/>"##
    );
    let _ = writeln!(
        svg,
        r#"<text x="{SVG_MARGIN}" y="20" font-family="sans-serif" font-size="14">{}</text>"#,
        xml_escape(title)
    );
    let _ = writeln!(
        svg,
        r##"<g stroke="#555555" stroke-width="0.5" fill-rule="evenodd">"##
    );
    for f in features {
        let mut d = String::new();
        for part in f.shape.parts() {
            for ring in part.rings() {
                for (i, p) in ring[..ring.len() - 1].iter().enumerate() {
                    let _ = write!(
                        d,
                        "{}{:.2} {:.2} ",
                        if i == 0 { "M" } else { "L" },
                        tx(p.x),
                        ty(p.y)
                    );
                }
                d.push_str("Z ");
            }
        }
        let (fill, class) = match f.class {
            Some(c) => (c.color(), c.as_str()),
            None => (NO_DATA_COLOR, "no_data"),
        };
        let _ = writeln!(
            svg,
            r#"<path class="tract {class}" data-tract="{}" fill="{fill}" d="{}"/>"#,
            xml_escape(f.id),
            d.trim_end()
        );
    }
    let _ = writeln!(svg, "</g>");
    let lx = SVG_MAP_WIDTH + 8.0;
    let _ = writeln!(svg, r#"<g font-family="sans-serif" font-size="12">"#);
    for (i, c) in BoxMapClass::ALL.iter().enumerate() {
        let y = title_h + SVG_MARGIN + i as f64 * 22.0;
        let _ = writeln!(
            svg,
            r##"<rect class="swatch" x="{lx:.0}" y="{y:.0}" width="16" height="16" fill="{}" stroke="#555555" stroke-width="0.5"/>"##,
            c.color()
        );
        let _ = writeln!(
            svg,
            r#"<text x="{:.0}" y="{:.0}">{}</text>"#,
            lx + 22.0,
            y + 12.0,
            xml_escape(c.legend_label())
        );
    }
    let _ = writeln!(svg, "</g>");
    svg.push_str("</svg>\n");
    Ok(svg)
}

/// Box-map choropleth of component `component_index` (0-based).
pub fn emit_svg_choropleth(
    tracts: &[TractGeometry],
    mapped: &MappedScores,
    component_index: usize,
    out_path: &Path,
) -> Result<PathBuf> {
    let bundle = mapped.bundle;
    if component_index >= bundle.components_mapped() {
        return Err(Error::Domain(format!(
            "component {} is not mapped (only {})",
            component_index + 1,
            bundle.components_mapped()
        )));
    }
    let features: Vec<MapFeature> = tracts
        .iter()
        .map(|t| MapFeature {
            id: &t.tract_id,
            shape: &t.shape,
            class: mapped.class(&t.tract_id, component_index),
        })
        .collect();
    let title = format!(
        "PC{} box map (hinge = {})",
        component_index + 1,
        bundle.hinge
    );
    let svg = render_svg_choropleth(&features, &title)?;
    if let Some(dir) = out_path.parent() {
        ensure_dir(dir)?;
    }
    write_text(out_path, &svg)
}

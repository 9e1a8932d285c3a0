//! Browser demo over the access-atlas kernels. Each operation takes and
//! returns strings (numbers as text, results as JSON with embedded SVG) so
//! the same functions run natively under test and behind `wasm-bindgen`.

use std::fmt::Write as _;

use access_atlas::geometry::{
    availability_count, queen_adjacency, BufferSpec, MultiPolygon, Polygon, ProjectedPoint,
};
use access_atlas::report::{boxmap_breaks, render_svg_choropleth, BoxMapClass, MapFeature};
use access_atlas::stats::morans_i;
use serde::{Deserialize, Serialize};
use serde_json::json;

/// Side of the demo grid tracts, in meters.
pub const CELL_M: f64 = 1000.0;

/// Reads numbers separated by commas, whitespace or semicolons.
pub fn parse_values(text: &str) -> Result<Vec<f64>, String> {
    text.split(|c: char| c == ',' || c == ';' || c.is_whitespace())
        .filter(|t| !t.is_empty())
        .map(|t| {
            t.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| format!("`{t}` is not a number"))
        })
        .collect()
}

/// Square grid of `k`×`k` tracts, row-major from the bottom-left.
pub fn grid_tracts(k: usize) -> Vec<MultiPolygon> {
    let mut out = Vec::with_capacity(k * k);
    for row in 0..k {
        for col in 0..k {
            let (x, y) = (col as f64 * CELL_M, row as f64 * CELL_M);
            out.push(
                Polygon::rectangle(x, y, x + CELL_M, y + CELL_M)
                    .expect("grid cell is a valid rectangle")
                    .into(),
            );
        }
    }
    out
}

/// Quartiles, fences and classes for a sample, plus a strip-plot SVG.
pub fn boxmap_json(values_text: &str, hinge: f64) -> Result<String, String> {
    let values = parse_values(values_text)?;
    let breaks = boxmap_breaks(&values, hinge).map_err(|e| e.to_string())?;
    let classes: Vec<BoxMapClass> = values.iter().map(|&v| breaks.classify(v)).collect();
    let counts: Vec<usize> = BoxMapClass::ALL
        .iter()
        .map(|c| classes.iter().filter(|x| *x == c).count())
        .collect();
    Ok(json!({
        "q1": breaks.q1,
        "median": breaks.median,
        "q3": breaks.q3,
        "lower_fence": breaks.lower_fence,
        "upper_fence": breaks.upper_fence,
        "classes": classes.iter().map(|c| c.as_str()).collect::<Vec<_>>(),
        "counts": BoxMapClass::ALL.iter().zip(&counts)
            .map(|(c, n)| json!({"class": c.as_str(), "label": c.legend_label(), "color": c.color(), "count": n}))
            .collect::<Vec<_>>(),
        "svg": strip_svg(&values, &classes, &breaks),
    })
    .to_string())
}

fn strip_svg(
    values: &[f64],
    classes: &[BoxMapClass],
    b: &access_atlas::report::BoxMapBreaks,
) -> String {
    let (w, h, pad) = (640.0, 120.0, 20.0);
    let lo = values.iter().copied().fold(b.lower_fence, f64::min);
    let hi = values.iter().copied().fold(b.upper_fence, f64::max);
    let span = if hi > lo { hi - lo } else { 1.0 };
    let sx = |v: f64| pad + (v - lo) / span * (w - 2.0 * pad);
    let mut svg = format!(
        r#"<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {w} {h}" width="{w}" height="{h}">"#
    );
    let _ = write!(
        svg,
        r##"<rect x="{:.2}" y="30" width="{:.2}" height="40" fill="#f0f0f0" stroke="#888"/>"##,
        sx(b.q1),
        (sx(b.q3) - sx(b.q1)).max(0.5)
    );
    for (v, label) in [
        (b.lower_fence, "fence"),
        (b.median, "median"),
        (b.upper_fence, "fence"),
    ] {
        let _ = write!(
            svg,
            r##"<line x1="{x:.2}" y1="24" x2="{x:.2}" y2="76" stroke="#444" stroke-dasharray="{}"/><text x="{x:.2}" y="92" font-size="10" text-anchor="middle">{label}</text>"##,
            if label == "median" { "none" } else { "3 2" },
            x = sx(v)
        );
    }
    for (i, (&v, c)) in values.iter().zip(classes).enumerate() {
        let jitter = (i % 5) as f64 * 6.0 - 12.0;
        let _ = write!(
            svg,
            r##"<circle cx="{:.2}" cy="{:.2}" r="5" fill="{}" stroke="#333"><title>{v} ({})</title></circle>"##,
            sx(v),
            50.0 + jitter,
            c.color(),
            c.as_str()
        );
    }
    svg.push_str("</svg>");
    svg
}

#[derive(Debug, Clone, Copy, Deserialize)]
pub struct Provider {
    pub x: f64,
    pub y: f64,
    pub r: f64,
}

const COUNT_COLORS: [&str; 5] = ["#f7fcf5", "#c7e9c0", "#74c476", "#31a354", "#006d2c"];

/// Providers within reach of each tract of a `k`×`k` grid, drawn with their buffers.
/// `providers_json` is an array of `{x, y, r}` in meters.
pub fn availability_json(k: usize, providers_json: &str) -> Result<String, String> {
    if !(1..=12).contains(&k) {
        return Err(format!("grid size {k} must be between 1 and 12"));
    }
    let providers: Vec<Provider> =
        serde_json::from_str(providers_json).map_err(|e| e.to_string())?;
    let buffers = providers
        .iter()
        .map(|p| {
            BufferSpec::new(p.r)
                .map(|b| (ProjectedPoint::new(p.x, p.y), b))
                .map_err(|e| e.to_string())
        })
        .collect::<Result<Vec<_>, _>>()?;
    let tracts = grid_tracts(k);
    let counts: Vec<usize> = tracts
        .iter()
        .map(|t| availability_count(t, buffers.iter().copied()))
        .collect();

    let size = k as f64 * CELL_M;
    let mut svg = format!(
        r#"<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {size} {size}" width="480" height="480">"#
    );
    // flip so north is up
    let _ = write!(svg, r#"<g transform="translate(0 {size}) scale(1 -1)">"#);
    for (i, (t, n)) in tracts.iter().zip(&counts).enumerate() {
        let bb = t.bbox();
        let _ = write!(
            svg,
            r##"<rect class="tract" data-index="{i}" x="{}" y="{}" width="{CELL_M}" height="{CELL_M}" fill="{}" stroke="#555" stroke-width="8"/>"##,
            bb.min_x,
            bb.min_y,
            COUNT_COLORS[(*n).min(COUNT_COLORS.len() - 1)]
        );
    }
    for p in &providers {
        let _ = write!(
            svg,
            r##"<circle cx="{}" cy="{}" r="{}" fill="#e66101" fill-opacity="0.12" stroke="#e66101" stroke-width="10"/><circle cx="{}" cy="{}" r="40" fill="#b35806"/>"##,
            p.x, p.y, p.r, p.x, p.y
        );
    }
    svg.push_str("</g>");
    for (t, n) in tracts.iter().zip(&counts) {
        let bb = t.bbox();
        let _ = write!(
            svg,
            r#"<text x="{}" y="{}" font-size="{}" text-anchor="middle" font-family="sans-serif">{n}</text>"#,
            bb.min_x + CELL_M / 2.0,
            size - bb.min_y - CELL_M / 2.0 + 90.0,
            CELL_M * 0.25
        );
    }
    svg.push_str("</svg>");
    Ok(json!({ "counts": counts, "svg": svg }).to_string())
}

#[derive(Debug, Serialize)]
struct MoranOut {
    i: f64,
    expected: f64,
    pseudo_p: f64,
    permutations: usize,
    seed: u64,
    svg: String,
}

/// Global Moran's I (queen contiguity) of `k`×`k` grid values, with a box-map
/// choropleth of the values.
pub fn moran_json(
    k: usize,
    values_text: &str,
    permutations: usize,
    seed: u64,
) -> Result<String, String> {
    let values = parse_values(values_text)?;
    if k < 2 || values.len() != k * k {
        return Err(format!(
            "expected {} values for a {k}x{k} grid, got {}",
            k * k,
            values.len()
        ));
    }
    let tracts = grid_tracts(k);
    let adjacency = queen_adjacency(&tracts);
    let m = morans_i(&values, &adjacency, permutations, seed).map_err(|e| e.to_string())?;
    let ids: Vec<String> = (0..values.len()).map(|i| format!("cell {i}")).collect();
    let classes: Vec<Option<BoxMapClass>> = match boxmap_breaks(&values, 1.5) {
        Ok(b) => values.iter().map(|&v| Some(b.classify(v))).collect(),
        Err(_) => vec![None; values.len()],
    };
    let features: Vec<MapFeature> = tracts
        .iter()
        .zip(&ids)
        .zip(&classes)
        .map(|((shape, id), class)| MapFeature {
            id,
            shape,
            class: *class,
        })
        .collect();
    let svg = render_svg_choropleth(&features, "value box map (hinge = 1.5)")
        .map_err(|e| e.to_string())?;
    serde_json::to_string(&MoranOut {
        i: m.i,
        expected: m.expected,
        pseudo_p: m.pseudo_p,
        permutations: m.permutations,
        seed: m.seed,
        svg,
    })
    .map_err(|e| e.to_string())
}

#[cfg(target_arch = "wasm32")]
mod bindings {
    use wasm_bindgen::prelude::*;

    #[wasm_bindgen]
    pub fn boxmap(values: &str, hinge: f64) -> Result<String, JsError> {
        super::boxmap_json(values, hinge).map_err(|e| JsError::new(&e))
    }

    #[wasm_bindgen]
    pub fn availability(k: usize, providers_json: &str) -> Result<String, JsError> {
        super::availability_json(k, providers_json).map_err(|e| JsError::new(&e))
    }

    #[wasm_bindgen]
    pub fn moran(
        k: usize,
        values: &str,
        permutations: usize,
        seed: u64,
    ) -> Result<String, JsError> {
        super::moran_json(k, values, permutations, seed).map_err(|e| JsError::new(&e))
    }
}

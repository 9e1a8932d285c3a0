//! Loading and joining tract geometry, food providers, road records, and
//! demographic tables into the ten-variable analysis matrix.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::fs::File;
use std::path::Path;
use std::str::FromStr;

use log::warn;
use serde_json::Value;

use crate::error::{Error, Result};
use crate::geometry::{
    availability_count, BufferSpec, MultiPolygon, Polygon, ProjectedPoint, Projection,
};
use crate::network::{
    multisource_shortest_distances, snap_point, tract_network_distance, EdgeRecord, NodeId,
    NodeRecord, OriginSampling, RoadNetwork, DEFAULT_MAX_SNAP_M,
};
use crate::stats::Matrix;

/// Column order of the variable table.
pub const VARIABLES: [&str; 10] = [
    "AV_INT",
    "AV_POP",
    "ACE_NET",
    "ACE_NV",
    "ACE_ELD",
    "ACE_DIS",
    "AFF_POV",
    "AFF_UNEMP",
    "ACO_ENG",
    "ACO_SNAP",
];

/// Demographic columns, in file order. All but `AV_POP` are percentages.
pub const DEMOGRAPHIC_COLUMNS: [&str; 8] = [
    "AV_POP",
    "ACE_NV",
    "ACE_ELD",
    "ACE_DIS",
    "AFF_POV",
    "AFF_UNEMP",
    "ACO_ENG",
    "ACO_SNAP",
];

pub fn variable_names() -> Vec<String> {
    VARIABLES.iter().map(|s| s.to_string()).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct TractGeometry {
    pub tract_id: String,
    pub shape: MultiPolygon,
    /// The feature's geometry exactly as read, in lon/lat.
    pub source_geometry: Value,
}

fn read_to_string(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|source| Error::Read {
        path: path.to_path_buf(),
        source,
    })
}

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|source| Error::Read {
        path: path.to_path_buf(),
        source,
    })
}

fn parse_ring(value: &Value, projection: &Projection, ctx: &str) -> Result<Vec<ProjectedPoint>> {
    let positions = value
        .as_array()
        .ok_or_else(|| Error::schema(ctx, "ring is not an array"))?;
    positions
        .iter()
        .map(|pos| {
            let lon = pos.get(0).and_then(Value::as_f64);
            let lat = pos.get(1).and_then(Value::as_f64);
            match (lon, lat) {
                (Some(lon), Some(lat)) => projection
                    .project(lon, lat)
                    .map_err(|e| Error::schema(ctx, e.to_string())),
                _ => Err(Error::schema(ctx, "position is not [lon, lat]")),
            }
        })
        .collect()
}

fn parse_polygon(value: &Value, projection: &Projection, ctx: &str) -> Result<Polygon> {
    let rings = value
        .as_array()
        .ok_or_else(|| Error::schema(ctx, "polygon coordinates are not an array"))?
        .iter()
        .map(|r| parse_ring(r, projection, ctx))
        .collect::<Result<Vec<_>>>()?;
    Polygon::new(rings).map_err(|e| Error::DegenerateGeometry(format!("{ctx}: {e}")))
}

/// Reads a GeoJSON FeatureCollection of Polygon/MultiPolygon tracts.
pub fn load_tracts(path: &Path, projection: &Projection) -> Result<Vec<TractGeometry>> {
    let text = read_to_string(path)?;
    let file_ctx = path.display().to_string();
    let doc: Value = serde_json::from_str(&text)
        .map_err(|e| Error::schema(&file_ctx, format!("invalid JSON: {e}")))?;
    if doc.get("type").and_then(Value::as_str) != Some("FeatureCollection") {
        return Err(Error::schema(
            &file_ctx,
            "expected a GeoJSON FeatureCollection",
        ));
    }
    let features = doc
        .get("features")
        .and_then(Value::as_array)
        .ok_or_else(|| Error::schema(&file_ctx, "FeatureCollection has no features array"))?;

    let mut seen = BTreeSet::new();
    let mut tracts = Vec::with_capacity(features.len());
    for (idx, feature) in features.iter().enumerate() {
        let ctx = format!("{file_ctx} feature {idx}");
        let tract_id = match feature.get("properties").and_then(|p| p.get("tract_id")) {
            Some(Value::String(s)) if !s.is_empty() => s.clone(),
            Some(Value::Number(n)) => n.to_string(),
            _ => return Err(Error::schema(&ctx, "missing tract_id property")),
        };
        let ctx = format!("{ctx} (tract {tract_id})");
        if !seen.insert(tract_id.clone()) {
            return Err(Error::schema(
                &ctx,
                format!("duplicate tract_id {tract_id}"),
            ));
        }
        let geometry = feature
            .get("geometry")
            .filter(|g| !g.is_null())
            .ok_or_else(|| Error::schema(&ctx, "feature has no geometry"))?;
        let coords = geometry
            .get("coordinates")
            .ok_or_else(|| Error::schema(&ctx, "geometry has no coordinates"))?;
        let parts = match geometry.get("type").and_then(Value::as_str) {
            Some("Polygon") => vec![parse_polygon(coords, projection, &ctx)?],
            Some("MultiPolygon") => coords
                .as_array()
                .ok_or_else(|| Error::schema(&ctx, "multipolygon coordinates are not an array"))?
                .iter()
                .map(|p| parse_polygon(p, projection, &ctx))
                .collect::<Result<Vec<_>>>()?,
            other => {
                return Err(Error::schema(
                    &ctx,
                    format!("unsupported geometry type {other:?}"),
                ));
            }
        };
        let shape = MultiPolygon::new(parts)
            .map_err(|e| Error::DegenerateGeometry(format!("{ctx}: {e}")))?;
        tracts.push(TractGeometry {
            tract_id,
            shape,
            source_geometry: geometry.clone(),
        });
    }
    Ok(tracts)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ProviderKind {
    Supermarket,
    GroceryLarge,
    GrocerySmall,
    ProduceCart,
    FarmersMarket,
}

impl ProviderKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ProviderKind::Supermarket => "supermarket",
            ProviderKind::GroceryLarge => "grocery_large",
            ProviderKind::GrocerySmall => "grocery_small",
            ProviderKind::ProduceCart => "produce_cart",
            ProviderKind::FarmersMarket => "farmers_market",
        }
    }
}

impl fmt::Display for ProviderKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ProviderKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Ok(match s {
            "supermarket" => ProviderKind::Supermarket,
            "grocery_large" => ProviderKind::GroceryLarge,
            "grocery_small" => ProviderKind::GrocerySmall,
            "produce_cart" => ProviderKind::ProduceCart,
            "farmers_market" => ProviderKind::FarmersMarket,
            other => return Err(format!("unknown provider kind `{other}`")),
        })
    }
}

/// Default buffer radius per provider kind, in meters.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProviderRadii {
    pub supermarket: f64,
    pub grocery_large: f64,
    pub grocery_small: f64,
    pub produce_cart: f64,
    pub farmers_market: f64,
}

impl Default for ProviderRadii {
    fn default() -> Self {
        Self {
            supermarket: 3000.0,
            grocery_large: 1600.0,
            grocery_small: 800.0,
            produce_cart: 500.0,
            farmers_market: 1000.0,
        }
    }
}

impl ProviderRadii {
    pub fn radius(&self, kind: ProviderKind) -> f64 {
        match kind {
            ProviderKind::Supermarket => self.supermarket,
            ProviderKind::GroceryLarge => self.grocery_large,
            ProviderKind::GrocerySmall => self.grocery_small,
            ProviderKind::ProduceCart => self.produce_cart,
            ProviderKind::FarmersMarket => self.farmers_market,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, r) in [
            ("supermarket", self.supermarket),
            ("grocery_large", self.grocery_large),
            ("grocery_small", self.grocery_small),
            ("produce_cart", self.produce_cart),
            ("farmers_market", self.farmers_market),
        ] {
            if !(r.is_finite() && r > 0.0) {
                return Err(Error::Config(format!("{name} radius {r} must be positive")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProviderPoint {
    pub id: String,
    pub kind: ProviderKind,
    pub location: ProjectedPoint,
    pub radius_m: f64,
}

impl ProviderPoint {
    pub fn buffer(&self) -> BufferSpec {
        BufferSpec::new(self.radius_m).expect("radius validated at load")
    }
}

fn csv_reader(path: &Path) -> Result<csv::Reader<File>> {
    Ok(csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .flexible(false)
        .from_reader(open(path)?))
}

fn headers(reader: &mut csv::Reader<File>, path: &Path) -> Result<Vec<String>> {
    let h = reader.headers().map_err(|e| {
        Error::schema(
            path.display().to_string(),
            format!("unreadable header: {e}"),
        )
    })?;
    Ok(h.iter().map(str::to_string).collect())
}

fn csv_record(
    result: std::result::Result<csv::StringRecord, csv::Error>,
    path: &Path,
    row: usize,
) -> Result<csv::StringRecord> {
    result.map_err(|e| Error::schema(row_ctx(path, row), e.to_string()))
}

fn row_ctx(path: &Path, row: usize) -> String {
    format!("{} row {row}", path.display())
}

fn parse_f64(field: &str, name: &str, ctx: &str) -> Result<f64> {
    field
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| Error::schema(ctx, format!("{name} `{field}` is not a number")))
}

/// Reads `id,kind,lon,lat[,radius_m]`. Row numbers in errors count the
/// header as row 1.
pub fn load_providers(
    path: &Path,
    projection: &Projection,
    radii: &ProviderRadii,
) -> Result<Vec<ProviderPoint>> {
    let mut reader = csv_reader(path)?;
    let header = headers(&mut reader, path)?;
    let expected = ["id", "kind", "lon", "lat"];
    if header.len() < 4
        || header[..4] != expected
        || (header.len() == 5 && header[4] != "radius_m")
        || header.len() > 5
    {
        return Err(Error::schema(
            path.display().to_string(),
            format!(
                "expected header id,kind,lon,lat[,radius_m], found {}",
                header.join(",")
            ),
        ));
    }
    let mut out = Vec::new();
    for (k, rec) in reader.records().enumerate() {
        let row = k + 2;
        let rec = csv_record(rec, path, row)?;
        let ctx = row_ctx(path, row);
        let id = rec[0].to_string();
        let kind = match &rec[1] {
            "grocery" => {
                warn!("{ctx}: grocery store {id} has no size class, using grocery_large");
                ProviderKind::GroceryLarge
            }
            other => other
                .parse::<ProviderKind>()
                .map_err(|m| Error::schema(&ctx, m))?,
        };
        let lon = parse_f64(&rec[2], "lon", &ctx)?;
        let lat = parse_f64(&rec[3], "lat", &ctx)?;
        let radius_m = match rec.get(4).filter(|s| !s.is_empty()) {
            Some(s) => parse_f64(s, "radius_m", &ctx)?,
            None => radii.radius(kind),
        };
        if radius_m <= 0.0 {
            return Err(Error::schema(
                &ctx,
                format!("radius_m {radius_m} must be positive"),
            ));
        }
        let location = projection
            .project(lon, lat)
            .map_err(|e| Error::schema(&ctx, e.to_string()))?;
        out.push(ProviderPoint {
            id,
            kind,
            location,
            radius_m,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DemographicRecord {
    pub tract_id: String,
    /// In [`DEMOGRAPHIC_COLUMNS`] order; `None` marks an empty cell.
    pub values: [Option<f64>; 8],
}

impl DemographicRecord {
    pub fn get(&self, column: &str) -> Option<f64> {
        DEMOGRAPHIC_COLUMNS
            .iter()
            .position(|c| *c == column)
            .and_then(|i| self.values[i])
    }

    pub fn first_missing(&self) -> Option<&'static str> {
        self.values
            .iter()
            .position(Option::is_none)
            .map(|i| DEMOGRAPHIC_COLUMNS[i])
    }
}

/// Reads `tract_id,AV_POP,ACE_NV,…,ACO_SNAP`; empty cells are kept as missing.
pub fn load_demographics(path: &Path) -> Result<Vec<DemographicRecord>> {
    let mut reader = csv_reader(path)?;
    let header = headers(&mut reader, path)?;
    let expected: Vec<&str> = std::iter::once("tract_id")
        .chain(DEMOGRAPHIC_COLUMNS)
        .collect();
    if header != expected {
        return Err(Error::schema(
            path.display().to_string(),
            format!(
                "expected header {}, found {}",
                expected.join(","),
                header.join(",")
            ),
        ));
    }
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for (k, rec) in reader.records().enumerate() {
        let row = k + 2;
        let rec = csv_record(rec, path, row)?;
        let ctx = row_ctx(path, row);
        let tract_id = rec[0].to_string();
        if tract_id.is_empty() {
            return Err(Error::schema(&ctx, "empty tract_id"));
        }
        if !seen.insert(tract_id.clone()) {
            return Err(Error::schema(
                &ctx,
                format!("duplicate tract_id {tract_id}"),
            ));
        }
        let mut values = [None; 8];
        for (i, name) in DEMOGRAPHIC_COLUMNS.iter().enumerate() {
            let cell = &rec[i + 1];
            if cell.is_empty() {
                continue;
            }
            let v = parse_f64(cell, name, &ctx)?;
            let in_range = if i == 0 {
                v >= 0.0
            } else {
                (0.0..=100.0).contains(&v)
            };
            if !in_range {
                return Err(Error::Range {
                    tract_id,
                    field: name.to_string(),
                    value: v,
                });
            }
            values[i] = Some(v);
        }
        out.push(DemographicRecord { tract_id, values });
    }
    Ok(out)
}

/// Reads road nodes as `node_id,x,y` (projected meters) or `node_id,lon,lat`.
pub fn load_road_nodes(path: &Path, projection: &Projection) -> Result<Vec<NodeRecord>> {
    let mut reader = csv_reader(path)?;
    let header = headers(&mut reader, path)?;
    let geographic = match header.iter().map(String::as_str).collect::<Vec<_>>()[..] {
        ["node_id", "x", "y"] => false,
        ["node_id", "lon", "lat"] => true,
        _ => {
            return Err(Error::schema(
                path.display().to_string(),
                format!(
                    "expected header node_id,x,y or node_id,lon,lat, found {}",
                    header.join(",")
                ),
            ))
        }
    };
    let mut out = Vec::new();
    for (k, rec) in reader.records().enumerate() {
        let row = k + 2;
        let rec = csv_record(rec, path, row)?;
        let ctx = row_ctx(path, row);
        let id = rec[0].parse::<NodeId>().map_err(|_| {
            Error::schema(
                &ctx,
                format!("node_id `{}` is not a non-negative integer", &rec[0]),
            )
        })?;
        let a = parse_f64(&rec[1], &header[1], &ctx)?;
        let b = parse_f64(&rec[2], &header[2], &ctx)?;
        let location = if geographic {
            projection
                .project(a, b)
                .map_err(|e| Error::schema(&ctx, e.to_string()))?
        } else {
            ProjectedPoint::new(a, b)
        };
        out.push(NodeRecord { id, location });
    }
    Ok(out)
}

/// Reads road edges as `from_node,to_node,length_m,road_class`.
pub fn load_road_edges(path: &Path) -> Result<Vec<EdgeRecord>> {
    let mut reader = csv_reader(path)?;
    let header = headers(&mut reader, path)?;
    if header != ["from_node", "to_node", "length_m", "road_class"] {
        return Err(Error::schema(
            path.display().to_string(),
            format!(
                "expected header from_node,to_node,length_m,road_class, found {}",
                header.join(",")
            ),
        ));
    }
    let mut out = Vec::new();
    for (k, rec) in reader.records().enumerate() {
        let row = k + 2;
        let rec = csv_record(rec, path, row)?;
        let ctx = row_ctx(path, row);
        let node = |s: &str| {
            s.parse::<NodeId>().map_err(|_| {
                Error::schema(&ctx, format!("node id `{s}` is not a non-negative integer"))
            })
        };
        let length_m = match &rec[2] {
            "" => None,
            s => Some(parse_f64(s, "length_m", &ctx)?),
        };
        out.push(EdgeRecord {
            from: node(&rec[0])?,
            to: node(&rec[1])?,
            length_m,
            road_class: rec[3].to_string(),
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DroppedTract {
    pub tract_id: String,
    pub reason: String,
}

/// Tract × variable matrix with columns in [`VARIABLES`] order and rows in
/// ascending tract id order.
#[derive(Debug, Clone, PartialEq)]
pub struct VariableTable {
    pub tract_ids: Vec<String>,
    pub values: Matrix,
    pub dropped: Vec<DroppedTract>,
}

impl VariableTable {
    pub fn len(&self) -> usize {
        self.tract_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tract_ids.is_empty()
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        VARIABLES
            .iter()
            .position(|v| *v == name)
            .map(|j| self.values.column(j))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AssemblyConfig {
    pub sampling: OriginSampling,
    pub max_snap_m: f64,
}

impl Default for AssemblyConfig {
    fn default() -> Self {
        Self {
            sampling: OriginSampling::Centroid,
            max_snap_m: DEFAULT_MAX_SNAP_M,
        }
    }
}

/// Computes AV_INT and ACE_NET per tract and joins the demographic columns.
/// Tracts with any missing value are moved to `dropped`.
pub fn assemble_variable_table(
    tracts: &[TractGeometry],
    providers: &[ProviderPoint],
    net: &RoadNetwork,
    demographics: &[DemographicRecord],
    config: &AssemblyConfig,
) -> Result<VariableTable> {
    let mut supermarket_nodes = BTreeSet::new();
    let mut supermarket_count = 0;
    for p in providers
        .iter()
        .filter(|p| p.kind == ProviderKind::Supermarket)
    {
        supermarket_count += 1;
        match snap_point(&p.location, net, config.max_snap_m) {
            Ok(node) => {
                supermarket_nodes.insert(node);
            }
            Err(e) => warn!("supermarket {} skipped for network distance: {e}", p.id),
        }
    }
    if supermarket_nodes.is_empty() {
        return Err(Error::MissingInput(format!(
            "network distance needs at least one supermarket on the road network ({supermarket_count} supplied)"
        )));
    }
    let to_supermarket = multisource_shortest_distances(net, &supermarket_nodes)?;

    let by_id: HashMap<&str, &DemographicRecord> = demographics
        .iter()
        .map(|d| (d.tract_id.as_str(), d))
        .collect();
    let mut order: BTreeMap<&str, &TractGeometry> = BTreeMap::new();
    for t in tracts {
        if order.insert(t.tract_id.as_str(), t).is_some() {
            return Err(Error::schema(
                "tracts",
                format!("duplicate tract_id {}", t.tract_id),
            ));
        }
    }
    for d in demographics {
        if !order.contains_key(d.tract_id.as_str()) {
            warn!("demographic row for unknown tract {} ignored", d.tract_id);
        }
    }

    let buffers: Vec<(ProjectedPoint, BufferSpec)> =
        providers.iter().map(|p| (p.location, p.buffer())).collect();
    let mut tract_ids = Vec::new();
    let mut rows = Vec::new();
    let mut dropped = Vec::new();
    for (id, tract) in order {
        let av_int = availability_count(&tract.shape, buffers.iter().copied()) as f64;
        let network = tract_network_distance(
            id,
            &tract.shape,
            net,
            &to_supermarket,
            config.sampling,
            config.max_snap_m,
        );
        let reason = match (by_id.get(id), &network) {
            (None, _) => Some("missing demographics".to_string()),
            (Some(d), _) if d.first_missing().is_some() => {
                Some(format!("missing value: {}", d.first_missing().unwrap()))
            }
            (_, Err(e)) => Some(format!("snap failed: {e}")),
            (_, Ok(r)) if r.is_unreachable() => Some("unreachable".to_string()),
            _ => None,
        };
        if let Some(reason) = reason {
            warn!("tract {id} dropped: {reason}");
            dropped.push(DroppedTract {
                tract_id: id.to_string(),
                reason,
            });
            continue;
        }
        let d = by_id[id];
        let ace_net = network
            .expect("checked above")
            .distance_m
            .expect("checked above");
        let v = |col: &str| d.get(col).expect("checked above");
        rows.push(vec![
            av_int,
            v("AV_POP"),
            ace_net,
            v("ACE_NV"),
            v("ACE_ELD"),
            v("ACE_DIS"),
            v("AFF_POV"),
            v("AFF_UNEMP"),
            v("ACO_ENG"),
            v("ACO_SNAP"),
        ]);
        tract_ids.push(id.to_string());
    }
    if rows.is_empty() {
        return Err(Error::EmptyTable);
    }
    Ok(VariableTable {
        tract_ids,
        values: Matrix::from_rows(&rows)?,
        dropped,
    })
}

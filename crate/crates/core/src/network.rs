//! Road graph construction and network distance to the nearest supermarket.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap};
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::geometry::{MultiPolygon, ProjectedPoint};

pub type NodeId = u64;

/// Default maximum snapping distance, in meters.
pub const DEFAULT_MAX_SNAP_M: f64 = 500.0;

/// Road classes kept by default (motorways and their links are excluded).
pub const DEFAULT_ROAD_CLASSES: [&str; 6] = [
    "residential",
    "living_street",
    "unclassified",
    "tertiary",
    "secondary",
    "primary",
];

pub fn default_road_classes() -> BTreeSet<String> {
    DEFAULT_ROAD_CLASSES.iter().map(|s| s.to_string()).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct NodeRecord {
    pub id: NodeId,
    pub location: ProjectedPoint,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EdgeRecord {
    pub from: NodeId,
    pub to: NodeId,
    /// `None` means "use the Euclidean distance between the endpoints".
    pub length_m: Option<f64>,
    pub road_class: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoadEdge {
    pub a: NodeId,
    pub b: NodeId,
    pub length_m: f64,
    pub road_class: String,
}

/// Undirected weighted road graph. Node indices follow ascending node id.
#[derive(Debug, Clone)]
pub struct RoadNetwork {
    ids: Vec<NodeId>,
    points: Vec<ProjectedPoint>,
    adjacency: Vec<Vec<(usize, f64)>>,
    edges: Vec<RoadEdge>,
    /// Node indices sorted by x coordinate, for nearest-node search.
    by_x: Vec<usize>,
}

impl RoadNetwork {
    pub fn node_count(&self) -> usize {
        self.ids.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn node_ids(&self) -> &[NodeId] {
        &self.ids
    }

    pub fn edges(&self) -> &[RoadEdge] {
        &self.edges
    }

    pub fn contains(&self, id: NodeId) -> bool {
        self.index_of(id).is_some()
    }

    pub fn location(&self, id: NodeId) -> Option<ProjectedPoint> {
        self.index_of(id).map(|i| self.points[i])
    }

    fn index_of(&self, id: NodeId) -> Option<usize> {
        self.ids.binary_search(&id).ok()
    }
}

/// Builds the graph from raw records, keeping only edges whose class is in
/// `allowed_classes`. Nodes left without any edge are dropped.
pub fn build_network(
    edge_records: &[EdgeRecord],
    node_records: &[NodeRecord],
    allowed_classes: &BTreeSet<String>,
) -> Result<RoadNetwork> {
    let mut all_nodes: BTreeMap<NodeId, ProjectedPoint> = BTreeMap::new();
    for (row, node) in node_records.iter().enumerate() {
        if !node.location.x.is_finite() || !node.location.y.is_finite() {
            return Err(Error::schema(
                format!("node record {row}"),
                format!("node {} has non-finite coordinates", node.id),
            ));
        }
        if all_nodes.insert(node.id, node.location).is_some() {
            return Err(Error::schema(
                format!("node record {row}"),
                format!("duplicate node id {}", node.id),
            ));
        }
    }

    let mut kept = Vec::new();
    for (row, edge) in edge_records.iter().enumerate() {
        let context = format!("edge record {row}");
        let a = all_nodes
            .get(&edge.from)
            .ok_or_else(|| Error::schema(&context, format!("unknown node {}", edge.from)))?;
        let b = all_nodes
            .get(&edge.to)
            .ok_or_else(|| Error::schema(&context, format!("unknown node {}", edge.to)))?;
        let length = edge.length_m.unwrap_or_else(|| a.distance(b));
        if !(length.is_finite() && length > 0.0) {
            return Err(Error::schema(
                &context,
                format!("edge length {length} must be positive"),
            ));
        }
        if allowed_classes.contains(&edge.road_class) {
            kept.push(RoadEdge {
                a: edge.from,
                b: edge.to,
                length_m: length,
                road_class: edge.road_class.clone(),
            });
        }
    }

    let used: BTreeSet<NodeId> = kept.iter().flat_map(|e| [e.a, e.b]).collect();
    let ids: Vec<NodeId> = used.into_iter().collect();
    let points: Vec<ProjectedPoint> = ids.iter().map(|id| all_nodes[id]).collect();
    let mut adjacency = vec![Vec::new(); ids.len()];
    for e in &kept {
        let ia = ids.binary_search(&e.a).expect("endpoint retained");
        let ib = ids.binary_search(&e.b).expect("endpoint retained");
        adjacency[ia].push((ib, e.length_m));
        adjacency[ib].push((ia, e.length_m));
    }
    let mut by_x: Vec<usize> = (0..ids.len()).collect();
    by_x.sort_by(|&i, &j| points[i].x.total_cmp(&points[j].x).then(i.cmp(&j)));

    Ok(RoadNetwork {
        ids,
        points,
        adjacency,
        edges: kept,
        by_x,
    })
}

/// Nearest node by Euclidean distance; ties go to the lowest node id.
pub fn snap_point(pt: &ProjectedPoint, net: &RoadNetwork, max_snap_m: f64) -> Result<NodeId> {
    if net.is_empty() {
        return Err(Error::Snap("road network has no nodes".into()));
    }
    let start = net.by_x.partition_point(|&i| net.points[i].x < pt.x);
    let mut best: Option<(f64, usize)> = None;
    let consider = |best: &mut Option<(f64, usize)>, i: usize| {
        let d = pt.distance(&net.points[i]);
        let better = match *best {
            None => true,
            Some((bd, bi)) => d < bd || (d == bd && i < bi),
        };
        if better {
            *best = Some((d, i));
        }
    };
    // walk outwards from the insertion point until |dx| exceeds the best distance
    let (mut lo, mut hi) = (start, start);
    loop {
        let bound = best.map_or(f64::INFINITY, |(d, _)| d);
        let right = (hi < net.by_x.len()).then(|| net.by_x[hi]);
        let left = (lo > 0).then(|| net.by_x[lo - 1]);
        let right_ok = right.filter(|&i| net.points[i].x - pt.x <= bound);
        let left_ok = left.filter(|&i| pt.x - net.points[i].x <= bound);
        if right_ok.is_none() && left_ok.is_none() {
            break;
        }
        if let Some(i) = right_ok {
            consider(&mut best, i);
            hi += 1;
        }
        if let Some(i) = left_ok {
            consider(&mut best, i);
            lo -= 1;
        }
    }
    let (dist, idx) = best.expect("non-empty network");
    if dist > max_snap_m {
        return Err(Error::Snap(format!(
            "nearest road node {} is {dist:.1} m from ({:.1}, {:.1}), beyond {max_snap_m} m",
            net.ids[idx], pt.x, pt.y
        )));
    }
    Ok(net.ids[idx])
}

/// Shortest distance from every node to its nearest source.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeDistances {
    ids: Vec<NodeId>,
    dist: Vec<f64>,
}

impl NodeDistances {
    /// `None` if the node is unreachable from every source or unknown.
    pub fn get(&self, id: NodeId) -> Option<f64> {
        let i = self.ids.binary_search(&id).ok()?;
        let d = self.dist[i];
        d.is_finite().then_some(d)
    }

    pub fn iter(&self) -> impl Iterator<Item = (NodeId, Option<f64>)> + '_ {
        self.ids
            .iter()
            .zip(&self.dist)
            .map(|(&id, &d)| (id, d.is_finite().then_some(d)))
    }

    pub fn to_map(&self) -> BTreeMap<NodeId, Option<f64>> {
        self.iter().collect()
    }
}

#[derive(Debug, PartialEq)]
struct HeapEntry {
    dist: f64,
    node: usize,
}

impl Eq for HeapEntry {}

impl Ord for HeapEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        // min-heap on distance
        other
            .dist
            .total_cmp(&self.dist)
            .then_with(|| other.node.cmp(&self.node))
    }
}

impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// One multi-source Dijkstra pass from every source at distance zero.
pub fn multisource_shortest_distances(
    net: &RoadNetwork,
    sources: &BTreeSet<NodeId>,
) -> Result<NodeDistances> {
    if sources.is_empty() {
        return Err(Error::Domain(
            "shortest distances need at least one source".into(),
        ));
    }
    let mut dist = vec![f64::INFINITY; net.node_count()];
    let mut heap = BinaryHeap::new();
    for &s in sources {
        let i = net
            .index_of(s)
            .ok_or_else(|| Error::Domain(format!("source node {s} is not in the network")))?;
        dist[i] = 0.0;
        heap.push(HeapEntry { dist: 0.0, node: i });
    }
    while let Some(HeapEntry { dist: d, node }) = heap.pop() {
        if d > dist[node] {
            continue;
        }
        for &(next, w) in &net.adjacency[node] {
            let nd = d + w;
            if nd < dist[next] {
                dist[next] = nd;
                heap.push(HeapEntry {
                    dist: nd,
                    node: next,
                });
            }
        }
    }
    Ok(NodeDistances {
        ids: net.ids.clone(),
        dist,
    })
}

/// How origin points are chosen within a tract.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OriginSampling {
    #[default]
    Centroid,
    /// Mean over a k×k grid of interior sample points.
    Grid(u32),
}

impl FromStr for OriginSampling {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "centroid" {
            return Ok(OriginSampling::Centroid);
        }
        s.strip_prefix("grid-")
            .and_then(|k| k.parse::<u32>().ok())
            .filter(|&k| k > 0)
            .map(OriginSampling::Grid)
            .ok_or_else(|| {
                Error::Config(format!(
                    "unknown origin sampling mode `{s}` (expected centroid or grid-K)"
                ))
            })
    }
}

impl fmt::Display for OriginSampling {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OriginSampling::Centroid => f.write_str("centroid"),
            OriginSampling::Grid(k) => write!(f, "grid-{k}"),
        }
    }
}

impl serde::Serialize for OriginSampling {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> serde::Deserialize<'de> for OriginSampling {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkDistanceResult {
    pub tract_id: String,
    /// `None` when no origin reaches any supermarket.
    pub distance_m: Option<f64>,
}

impl NetworkDistanceResult {
    pub fn is_unreachable(&self) -> bool {
        self.distance_m.is_none()
    }
}

/// Origin points for a tract under the given sampling mode.
pub fn origin_points(
    shape: &MultiPolygon,
    sampling: OriginSampling,
) -> Result<Vec<ProjectedPoint>> {
    let centroid = || shape.area_centroid().map(|(_, c)| c);
    match sampling {
        OriginSampling::Centroid => Ok(vec![centroid()?]),
        OriginSampling::Grid(k) => {
            let bb = shape.bbox();
            let k = k as usize;
            let mut pts = Vec::with_capacity(k * k);
            for row in 0..k {
                for col in 0..k {
                    let p = ProjectedPoint::new(
                        bb.min_x + (col as f64 + 0.5) / k as f64 * bb.width(),
                        bb.min_y + (row as f64 + 0.5) / k as f64 * bb.height(),
                    );
                    if shape.contains(&p) {
                        pts.push(p);
                    }
                }
            }
            if pts.is_empty() {
                pts.push(centroid()?);
            }
            Ok(pts)
        }
    }
}

/// Network distance from a tract to its nearest supermarket.
///
/// `to_supermarket` is the output of [`multisource_shortest_distances`] seeded
/// with the supermarkets' snapped nodes. In grid mode the result is the mean
/// over sample points that reach a supermarket.
pub fn tract_network_distance(
    tract_id: &str,
    shape: &MultiPolygon,
    net: &RoadNetwork,
    to_supermarket: &NodeDistances,
    sampling: OriginSampling,
    max_snap_m: f64,
) -> Result<NetworkDistanceResult> {
    let mut reached = Vec::new();
    for origin in origin_points(shape, sampling)? {
        let node = snap_point(&origin, net, max_snap_m)
            .map_err(|e| Error::Snap(format!("tract {tract_id}: {e}")))?;
        if let Some(d) = to_supermarket.get(node) {
            reached.push(d);
        }
    }
    let distance_m =
        (!reached.is_empty()).then(|| reached.iter().sum::<f64>() / reached.len() as f64);
    Ok(NetworkDistanceResult {
        tract_id: tract_id.to_string(),
        distance_m,
    })
}

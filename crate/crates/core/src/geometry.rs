//! Planar geometry kernels over projected (metric) coordinates.
//!
//! Everything here uses the closed-set convention: a point on a polygon
//! boundary is inside it, and a disk tangent to a polygon intersects it.

use crate::error::{Error, Result};

/// Mean Earth radius used by the equirectangular projection, in meters.
pub const EARTH_RADIUS_M: f64 = 6_371_000.0;

/// Shared-boundary tolerance for contiguity, in meters.
pub const ADJACENCY_EPS_M: f64 = 1e-3;

/// Distance below which a point is treated as lying on a polygon edge.
const BOUNDARY_EPS_M: f64 = 1e-9;

const MAX_ABS_COORD: f64 = 1e7;

/// A point in meters east/north of the projection reference.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProjectedPoint {
    pub x: f64,
    pub y: f64,
}

impl ProjectedPoint {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &ProjectedPoint) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn translate(&self, dx: f64, dy: f64) -> Self {
        Self::new(self.x + dx, self.y + dy)
    }
}

/// Equirectangular projection about a reference point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Projection {
    pub ref_lon: f64,
    pub ref_lat: f64,
}

impl Projection {
    pub fn new(ref_lon: f64, ref_lat: f64) -> Result<Self> {
        check_latitude(ref_lat, "reference latitude")?;
        if !ref_lon.is_finite() {
            return Err(Error::Domain(format!(
                "reference longitude {ref_lon} is not finite"
            )));
        }
        Ok(Self { ref_lon, ref_lat })
    }

    pub fn project(&self, lon: f64, lat: f64) -> Result<ProjectedPoint> {
        project_lonlat(lon, lat, self.ref_lon, self.ref_lat)
    }
}

fn check_latitude(lat: f64, what: &str) -> Result<()> {
    if !(lat > -89.0 && lat < 89.0) {
        return Err(Error::Domain(format!("{what} {lat} outside (-89, 89)")));
    }
    Ok(())
}

/// Projects geographic coordinates (degrees) to meters about `(ref_lon, ref_lat)`.
pub fn project_lonlat(lon: f64, lat: f64, ref_lon: f64, ref_lat: f64) -> Result<ProjectedPoint> {
    check_latitude(lat, "latitude")?;
    check_latitude(ref_lat, "reference latitude")?;
    if !lon.is_finite() || !ref_lon.is_finite() {
        return Err(Error::Domain(format!(
            "longitude {lon} / {ref_lon} is not finite"
        )));
    }
    let to_rad = std::f64::consts::PI / 180.0;
    let x = EARTH_RADIUS_M * (lon - ref_lon) * to_rad * (ref_lat * to_rad).cos();
    let y = EARTH_RADIUS_M * (lat - ref_lat) * to_rad;
    if x.abs() >= MAX_ABS_COORD || y.abs() >= MAX_ABS_COORD {
        return Err(Error::Domain(format!(
            "projected point ({x:.1}, {y:.1}) is too far from the reference"
        )));
    }
    Ok(ProjectedPoint::new(x, y))
}

/// Axis-aligned bounding box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundingBox {
    pub min_x: f64,
    pub min_y: f64,
    pub max_x: f64,
    pub max_y: f64,
}

impl BoundingBox {
    fn empty() -> Self {
        Self {
            min_x: f64::INFINITY,
            min_y: f64::INFINITY,
            max_x: f64::NEG_INFINITY,
            max_y: f64::NEG_INFINITY,
        }
    }

    fn extend(&mut self, p: &ProjectedPoint) {
        self.min_x = self.min_x.min(p.x);
        self.min_y = self.min_y.min(p.y);
        self.max_x = self.max_x.max(p.x);
        self.max_y = self.max_y.max(p.y);
    }

    fn union(&self, other: &BoundingBox) -> Self {
        Self {
            min_x: self.min_x.min(other.min_x),
            min_y: self.min_y.min(other.min_y),
            max_x: self.max_x.max(other.max_x),
            max_y: self.max_y.max(other.max_y),
        }
    }

    pub fn overlaps(&self, other: &BoundingBox, eps: f64) -> bool {
        self.min_x <= other.max_x + eps
            && other.min_x <= self.max_x + eps
            && self.min_y <= other.max_y + eps
            && other.min_y <= self.max_y + eps
    }

    pub fn width(&self) -> f64 {
        self.max_x - self.min_x
    }

    pub fn height(&self) -> f64 {
        self.max_y - self.min_y
    }
}

/// A polygon with one exterior ring followed by zero or more holes.
///
/// Rings are stored closed (first vertex repeated at the end).
#[derive(Debug, Clone, PartialEq)]
pub struct Polygon {
    rings: Vec<Vec<ProjectedPoint>>,
}

impl Polygon {
    /// Builds a polygon, closing any open ring.
    pub fn new(rings: Vec<Vec<ProjectedPoint>>) -> Result<Self> {
        if rings.is_empty() {
            return Err(Error::DegenerateGeometry("polygon has no rings".into()));
        }
        let mut closed = Vec::with_capacity(rings.len());
        for (k, mut ring) in rings.into_iter().enumerate() {
            if ring.iter().any(|p| !p.x.is_finite() || !p.y.is_finite()) {
                return Err(Error::DegenerateGeometry(format!(
                    "ring {k} has non-finite coordinates"
                )));
            }
            if ring.first() != ring.last() {
                let first = ring[0];
                ring.push(first);
            }
            let mut distinct: Vec<ProjectedPoint> = Vec::new();
            for p in &ring[..ring.len() - 1] {
                if !distinct.contains(p) {
                    distinct.push(*p);
                }
            }
            if distinct.len() < 3 {
                return Err(Error::DegenerateGeometry(format!(
                    "ring {k} has {} distinct vertices, need at least 3",
                    distinct.len()
                )));
            }
            closed.push(ring);
        }
        if ring_signed_area(&closed[0]) == 0.0 {
            return Err(Error::DegenerateGeometry(
                "exterior ring has zero area".into(),
            ));
        }
        Ok(Self { rings: closed })
    }

    /// Single-ring convenience constructor.
    pub fn from_exterior(vertices: Vec<ProjectedPoint>) -> Result<Self> {
        Self::new(vec![vertices])
    }

    /// Axis-aligned rectangle.
    pub fn rectangle(min_x: f64, min_y: f64, max_x: f64, max_y: f64) -> Result<Self> {
        Self::from_exterior(vec![
            ProjectedPoint::new(min_x, min_y),
            ProjectedPoint::new(max_x, min_y),
            ProjectedPoint::new(max_x, max_y),
            ProjectedPoint::new(min_x, max_y),
        ])
    }

    pub fn rings(&self) -> &[Vec<ProjectedPoint>] {
        &self.rings
    }

    pub fn exterior(&self) -> &[ProjectedPoint] {
        &self.rings[0]
    }

    pub fn holes(&self) -> &[Vec<ProjectedPoint>] {
        &self.rings[1..]
    }

    pub fn bbox(&self) -> BoundingBox {
        let mut bb = BoundingBox::empty();
        for p in self.exterior() {
            bb.extend(p);
        }
        bb
    }

    pub fn translate(&self, dx: f64, dy: f64) -> Self {
        Self {
            rings: self
                .rings
                .iter()
                .map(|r| r.iter().map(|p| p.translate(dx, dy)).collect())
                .collect(),
        }
    }

    fn segments(&self) -> impl Iterator<Item = (ProjectedPoint, ProjectedPoint)> + '_ {
        self.rings
            .iter()
            .flat_map(|r| r.windows(2).map(|w| (w[0], w[1])))
    }

    /// Minimum distance from `pt` to any ring edge.
    pub fn boundary_distance(&self, pt: &ProjectedPoint) -> f64 {
        self.segments()
            .map(|(a, b)| point_segment_distance(pt, &a, &b))
            .fold(f64::INFINITY, f64::min)
    }
}

/// A tract made of one or more polygon parts, treated as a single unit.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiPolygon {
    parts: Vec<Polygon>,
}

impl MultiPolygon {
    pub fn new(parts: Vec<Polygon>) -> Result<Self> {
        if parts.is_empty() {
            return Err(Error::DegenerateGeometry(
                "multipolygon has no parts".into(),
            ));
        }
        Ok(Self { parts })
    }

    pub fn parts(&self) -> &[Polygon] {
        &self.parts
    }

    pub fn bbox(&self) -> BoundingBox {
        self.parts
            .iter()
            .map(Polygon::bbox)
            .fold(BoundingBox::empty(), |acc, b| acc.union(&b))
    }

    pub fn contains(&self, pt: &ProjectedPoint) -> bool {
        self.parts.iter().any(|p| point_in_polygon(pt, p))
    }

    pub fn intersects_circle(&self, center: &ProjectedPoint, radius_m: f64) -> bool {
        self.parts
            .iter()
            .any(|p| circle_intersects_polygon(center, radius_m, p))
    }

    /// Area-weighted combination of every part.
    pub fn area_centroid(&self) -> Result<(f64, ProjectedPoint)> {
        let mut area = 0.0;
        let (mut cx, mut cy) = (0.0, 0.0);
        for part in &self.parts {
            let (a, c) = polygon_area_centroid(part)?;
            area += a;
            cx += a * c.x;
            cy += a * c.y;
        }
        Ok((area, ProjectedPoint::new(cx / area, cy / area)))
    }

    pub fn translate(&self, dx: f64, dy: f64) -> Self {
        Self {
            parts: self.parts.iter().map(|p| p.translate(dx, dy)).collect(),
        }
    }
}

impl From<Polygon> for MultiPolygon {
    fn from(p: Polygon) -> Self {
        Self { parts: vec![p] }
    }
}

/// Buffer radius attached to a provider.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BufferSpec {
    radius_m: f64,
}

impl BufferSpec {
    pub fn new(radius_m: f64) -> Result<Self> {
        if !(radius_m.is_finite() && radius_m > 0.0) {
            return Err(Error::Domain(format!(
                "buffer radius {radius_m} must be positive"
            )));
        }
        Ok(Self { radius_m })
    }

    pub fn radius_m(&self) -> f64 {
        self.radius_m
    }
}

/// Per-tract neighbor sets; symmetric and irreflexive.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct AdjacencyList {
    neighbors: Vec<Vec<usize>>,
}

impl AdjacencyList {
    /// Builds from undirected pairs; self-pairs are ignored.
    pub fn from_pairs(n: usize, pairs: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut neighbors = vec![Vec::new(); n];
        for (i, j) in pairs {
            if i >= n || j >= n {
                return Err(Error::Domain(format!(
                    "pair ({i}, {j}) out of range for {n} units"
                )));
            }
            if i != j {
                neighbors[i].push(j);
                neighbors[j].push(i);
            }
        }
        for list in &mut neighbors {
            list.sort_unstable();
            list.dedup();
        }
        Ok(Self { neighbors })
    }

    pub fn len(&self) -> usize {
        self.neighbors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.neighbors.is_empty()
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.neighbors[i]
    }

    pub fn are_neighbors(&self, i: usize, j: usize) -> bool {
        self.neighbors[i].binary_search(&j).is_ok()
    }

    pub fn isolates(&self) -> usize {
        self.neighbors.iter().filter(|n| n.is_empty()).count()
    }

    pub fn link_count(&self) -> usize {
        self.neighbors.iter().map(Vec::len).sum::<usize>() / 2
    }
}

fn ring_signed_area(ring: &[ProjectedPoint]) -> f64 {
    let origin = ring[0];
    ring.windows(2)
        .map(|w| {
            let (a, b) = (w[0], w[1]);
            (a.x - origin.x) * (b.y - origin.y) - (b.x - origin.x) * (a.y - origin.y)
        })
        .sum::<f64>()
        / 2.0
}

/// Absolute area and centroid of one ring, computed relative to its first vertex.
fn ring_area_centroid(ring: &[ProjectedPoint]) -> (f64, ProjectedPoint) {
    let origin = ring[0];
    let (mut a2, mut cx, mut cy) = (0.0, 0.0, 0.0);
    for w in ring.windows(2) {
        let (x0, y0) = (w[0].x - origin.x, w[0].y - origin.y);
        let (x1, y1) = (w[1].x - origin.x, w[1].y - origin.y);
        let cross = x0 * y1 - x1 * y0;
        a2 += cross;
        cx += (x0 + x1) * cross;
        cy += (y0 + y1) * cross;
    }
    if a2 == 0.0 {
        return (0.0, origin);
    }
    let centroid = ProjectedPoint::new(origin.x + cx / (3.0 * a2), origin.y + cy / (3.0 * a2));
    ((a2 / 2.0).abs(), centroid)
}

/// Shoelace area with holes subtracted, and the area-weighted centroid.
pub fn polygon_area_centroid(p: &Polygon) -> Result<(f64, ProjectedPoint)> {
    let (ext_area, ext_c) = ring_area_centroid(p.exterior());
    let mut area = ext_area;
    let (mut mx, mut my) = (ext_area * ext_c.x, ext_area * ext_c.y);
    for hole in p.holes() {
        let (a, c) = ring_area_centroid(hole);
        area -= a;
        mx -= a * c.x;
        my -= a * c.y;
    }
    if !(area > 0.0) {
        return Err(Error::DegenerateGeometry(format!(
            "net polygon area {area} is not positive"
        )));
    }
    Ok((area, ProjectedPoint::new(mx / area, my / area)))
}

pub fn point_segment_distance(p: &ProjectedPoint, a: &ProjectedPoint, b: &ProjectedPoint) -> f64 {
    let (dx, dy) = (b.x - a.x, b.y - a.y);
    let len2 = dx * dx + dy * dy;
    if len2 == 0.0 {
        return p.distance(a);
    }
    let t = (((p.x - a.x) * dx + (p.y - a.y) * dy) / len2).clamp(0.0, 1.0);
    p.distance(&ProjectedPoint::new(a.x + t * dx, a.y + t * dy))
}

fn orientation(a: &ProjectedPoint, b: &ProjectedPoint, c: &ProjectedPoint) -> f64 {
    (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x)
}

fn segments_cross(
    a: &ProjectedPoint,
    b: &ProjectedPoint,
    c: &ProjectedPoint,
    d: &ProjectedPoint,
) -> bool {
    let o1 = orientation(a, b, c);
    let o2 = orientation(a, b, d);
    let o3 = orientation(c, d, a);
    let o4 = orientation(c, d, b);
    o1 * o2 < 0.0 && o3 * o4 < 0.0
}

fn segment_segment_distance(
    a: &ProjectedPoint,
    b: &ProjectedPoint,
    c: &ProjectedPoint,
    d: &ProjectedPoint,
) -> f64 {
    if segments_cross(a, b, c, d) {
        return 0.0;
    }
    point_segment_distance(a, c, d)
        .min(point_segment_distance(b, c, d))
        .min(point_segment_distance(c, a, b))
        .min(point_segment_distance(d, a, b))
}

/// Even-odd ray casting over every ring; boundary points are inside.
pub fn point_in_polygon(pt: &ProjectedPoint, p: &Polygon) -> bool {
    let mut inside = false;
    for (a, b) in p.segments() {
        if point_segment_distance(pt, &a, &b) <= BOUNDARY_EPS_M {
            return true;
        }
        if (a.y > pt.y) != (b.y > pt.y) {
            let x_cross = a.x + (pt.y - a.y) * (b.x - a.x) / (b.y - a.y);
            if pt.x < x_cross {
                inside = !inside;
            }
        }
    }
    inside
}

/// Whether the closed disk of `radius_m` about `center` meets the closed polygon.
pub fn circle_intersects_polygon(center: &ProjectedPoint, radius_m: f64, p: &Polygon) -> bool {
    point_in_polygon(center, p) || p.boundary_distance(center) <= radius_m
}

/// Number of providers whose buffer disk meets the tract.
pub fn availability_count<I>(tract: &MultiPolygon, providers: I) -> usize
where
    I: IntoIterator<Item = (ProjectedPoint, BufferSpec)>,
{
    providers
        .into_iter()
        .filter(|(loc, buffer)| tract.intersects_circle(loc, buffer.radius_m()))
        .count()
}

fn touches(a: &MultiPolygon, b: &MultiPolygon, eps: f64) -> bool {
    for pa in a.parts() {
        for pb in b.parts() {
            if !pa.bbox().overlaps(&pb.bbox(), eps) {
                continue;
            }
            let segs_b: Vec<_> = pb.segments().collect();
            for (s0, s1) in pa.segments() {
                let (lo_x, hi_x) = (s0.x.min(s1.x) - eps, s0.x.max(s1.x) + eps);
                let (lo_y, hi_y) = (s0.y.min(s1.y) - eps, s0.y.max(s1.y) + eps);
                for (t0, t1) in &segs_b {
                    if t0.x.max(t1.x) < lo_x
                        || t0.x.min(t1.x) > hi_x
                        || t0.y.max(t1.y) < lo_y
                        || t0.y.min(t1.y) > hi_y
                    {
                        continue;
                    }
                    if segment_segment_distance(&s0, &s1, t0, t1) <= eps {
                        return true;
                    }
                }
            }
        }
    }
    false
}

/// Queen contiguity: tracts sharing any boundary point (within
/// [`ADJACENCY_EPS_M`]) are neighbors.
pub fn queen_adjacency(tracts: &[MultiPolygon]) -> AdjacencyList {
    let eps = ADJACENCY_EPS_M;
    let boxes: Vec<BoundingBox> = tracts.iter().map(MultiPolygon::bbox).collect();
    let mut order: Vec<usize> = (0..tracts.len()).collect();
    order.sort_by(|&i, &j| boxes[i].min_x.total_cmp(&boxes[j].min_x).then(i.cmp(&j)));

    let mut pairs = Vec::new();
    for (k, &i) in order.iter().enumerate() {
        for &j in &order[k + 1..] {
            if boxes[j].min_x > boxes[i].max_x + eps {
                break;
            }
            if boxes[i].overlaps(&boxes[j], eps) && touches(&tracts[i], &tracts[j], eps) {
                pairs.push((i, j));
            }
        }
    }
    AdjacencyList::from_pairs(tracts.len(), pairs).expect("indices come from the tract list")
}

mod common;

use access_atlas::geometry::{
    availability_count, circle_intersects_polygon, point_in_polygon, queen_adjacency, BufferSpec,
    MultiPolygon, Polygon, ProjectedPoint,
};
use common::{sampled_boundary_distance, winding_inside};
use proptest::prelude::*;

fn pt(x: f64, y: f64) -> ProjectedPoint {
    ProjectedPoint::new(x, y)
}

/// Star-shaped ring around the origin from polar radii.
fn star_ring(radii: &[f64]) -> Vec<ProjectedPoint> {
    let n = radii.len();
    radii
        .iter()
        .enumerate()
        .map(|(k, r)| {
            let a = std::f64::consts::TAU * k as f64 / n as f64;
            pt(r * a.cos(), r * a.sin())
        })
        .collect()
}

fn closed(mut ring: Vec<ProjectedPoint>) -> Vec<ProjectedPoint> {
    ring.push(ring[0]);
    ring
}

fn grid_tracts(n: usize, side: f64) -> Vec<MultiPolygon> {
    let mut out = Vec::new();
    for j in 0..n {
        for i in 0..n {
            let (x, y) = (i as f64 * side, j as f64 * side);
            out.push(Polygon::rectangle(x, y, x + side, y + side).unwrap().into());
        }
    }
    out
}

/// Disk-covering oracle: the disk is hit if any sample on a 0.25 m lattice
/// inside the disk, or on its rim, lies inside the polygon.
fn disk_grid_hits(c: &ProjectedPoint, r: f64, ring: &[ProjectedPoint]) -> bool {
    let step = 0.25;
    let k = (r / step).ceil() as i64;
    for i in -k..=k {
        for j in -k..=k {
            let (dx, dy) = (i as f64 * step, j as f64 * step);
            if dx * dx + dy * dy <= r * r && winding_inside(&pt(c.x + dx, c.y + dy), ring) {
                return true;
            }
        }
    }
    (0..720).any(|s| {
        let a = std::f64::consts::TAU * s as f64 / 720.0;
        winding_inside(&pt(c.x + r * a.cos(), c.y + r * a.sin()), ring)
    })
}

#[test]
fn square_hole_excluded_from_containment() {
    let outer = closed(vec![
        pt(0.0, 0.0),
        pt(10.0, 0.0),
        pt(10.0, 10.0),
        pt(0.0, 10.0),
    ]);
    let hole = closed(vec![pt(4.0, 4.0), pt(6.0, 4.0), pt(6.0, 6.0), pt(4.0, 6.0)]);
    let p = Polygon::new(vec![outer, hole]).unwrap();
    assert!(!point_in_polygon(&pt(5.0, 5.0), &p));
    assert!(point_in_polygon(&pt(1.0, 1.0), &p));
    assert!(point_in_polygon(&pt(4.0, 5.0), &p), "hole edge is boundary");
    // circle fully within the hole still touches nothing
    assert!(!circle_intersects_polygon(&pt(5.0, 5.0), 0.5, &p));
    assert!(circle_intersects_polygon(&pt(5.0, 5.0), 1.0, &p));
}

#[test]
fn degenerate_polygons_rejected() {
    assert!(Polygon::from_exterior(vec![pt(0.0, 0.0), pt(1.0, 1.0), pt(2.0, 2.0)]).is_err());
    assert!(Polygon::from_exterior(vec![pt(0.0, 0.0), pt(1.0, 0.0)]).is_err());
    assert!(Polygon::from_exterior(vec![pt(0.0, 0.0), pt(f64::NAN, 0.0), pt(1.0, 1.0)]).is_err());
    assert!(BufferSpec::new(0.0).is_err());
    assert!(BufferSpec::new(-5.0).is_err());
}

#[test]
fn multipart_centroid_is_area_weighted() {
    let a = Polygon::rectangle(0.0, 0.0, 2.0, 2.0).unwrap();
    let b = Polygon::rectangle(10.0, 0.0, 11.0, 1.0).unwrap();
    let (area, c) = MultiPolygon::new(vec![a, b])
        .unwrap()
        .area_centroid()
        .unwrap();
    assert!((area - 5.0).abs() < 1e-12);
    assert!((c.x - (4.0 * 1.0 + 1.0 * 10.5) / 5.0).abs() < 1e-12);
    assert!((c.y - (4.0 * 1.0 + 1.0 * 0.5) / 5.0).abs() < 1e-12);
}

#[test]
fn queen_grid_links_and_corner_touch() {
    let adj = queen_adjacency(&grid_tracts(3, 1000.0));
    assert_eq!(adj.link_count(), 20);
    assert_eq!(adj.neighbors(4).len(), 8);
    assert_eq!(adj.neighbors(0).len(), 3);
    // a 4x4 grid has 2*4*3 rook + 2*3*3 diagonal links
    assert_eq!(queen_adjacency(&grid_tracts(4, 50.0)).link_count(), 42);
    // separated by more than the tolerance
    let far = vec![
        Polygon::rectangle(0.0, 0.0, 1.0, 1.0).unwrap().into(),
        Polygon::rectangle(1.01, 0.0, 2.0, 1.0).unwrap().into(),
    ];
    assert_eq!(queen_adjacency(&far).link_count(), 0);
    assert_eq!(queen_adjacency(&far).isolates(), 2);
}

fn convex_ring() -> impl Strategy<Value = Vec<ProjectedPoint>> {
    (3usize..9, 5.0f64..20.0).prop_flat_map(|(n, r)| {
        prop::collection::vec(0.0f64..1.0, n).prop_map(move |mut ts| {
            ts.sort_by(|a, b| a.partial_cmp(b).unwrap());
            ts.dedup_by(|a, b| (*a - *b).abs() < 0.02);
            ts.iter()
                .map(|t| {
                    let a = std::f64::consts::TAU * t;
                    pt(r * a.cos(), r * a.sin())
                })
                .collect::<Vec<_>>()
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn small_convex_matches_disk_grid(
        ring in convex_ring(),
        cx in -30.0f64..30.0, cy in -30.0f64..30.0, r in 1.0f64..15.0,
    ) {
        prop_assume!(ring.len() >= 3);
        let Ok(poly) = Polygon::from_exterior(ring.clone()) else { return Ok(()) };
        let ring = closed(ring);
        let c = pt(cx, cy);
        let d = sampled_boundary_distance(&c, &ring, 0.01);
        // lattice spacing leaves a thin undecidable band
        prop_assume!((d - r).abs() > 0.5);
        let expected = winding_inside(&c, &ring) || disk_grid_hits(&c, r, &ring);
        prop_assert_eq!(circle_intersects_polygon(&c, r, &poly), expected);
    }

    #[test]
    fn intersection_monotone_in_radius(
        radii in prop::collection::vec(50.0f64..200.0, 5..12),
        cx in -400.0f64..400.0, cy in -400.0f64..400.0,
        r1 in 1.0f64..300.0, dr in 0.0f64..300.0,
    ) {
        let poly = Polygon::from_exterior(star_ring(&radii)).unwrap();
        let c = pt(cx, cy);
        if circle_intersects_polygon(&c, r1, &poly) {
            prop_assert!(circle_intersects_polygon(&c, r1 + dr, &poly));
        }
    }

    #[test]
    fn containment_implies_intersection(
        radii in prop::collection::vec(50.0f64..200.0, 5..12),
        cx in -250.0f64..250.0, cy in -250.0f64..250.0, r in 1e-6f64..50.0,
    ) {
        let poly = Polygon::from_exterior(star_ring(&radii)).unwrap();
        let c = pt(cx, cy);
        if point_in_polygon(&c, &poly) {
            prop_assert!(circle_intersects_polygon(&c, r, &poly));
        }
    }

    #[test]
    fn availability_is_additive_and_order_free(
        circles in prop::collection::vec((-500.0f64..500.0, -500.0f64..500.0, 1.0f64..400.0), 0..20),
        split in 0usize..20,
    ) {
        let tract: MultiPolygon = Polygon::rectangle(-100.0, -100.0, 100.0, 100.0).unwrap().into();
        let providers: Vec<_> = circles
            .iter()
            .map(|&(x, y, r)| (pt(x, y), BufferSpec::new(r).unwrap()))
            .collect();
        let split = split.min(providers.len());
        let whole = availability_count(&tract, providers.iter().copied());
        let a = availability_count(&tract, providers[..split].iter().copied());
        let b = availability_count(&tract, providers[split..].iter().copied());
        prop_assert_eq!(whole, a + b);
        let reversed = availability_count(&tract, providers.iter().rev().copied());
        prop_assert_eq!(whole, reversed);
        prop_assert!(whole <= providers.len());
    }

    #[test]
    fn queen_adjacency_symmetric_irreflexive_translation_free(
        n in 1usize..5, side in 10.0f64..2000.0,
        dx in -1e5f64..1e5, dy in -1e5f64..1e5,
        holes in prop::collection::vec(any::<bool>(), 16),
    ) {
        let tracts: Vec<MultiPolygon> = grid_tracts(n, side)
            .into_iter()
            .zip(holes.iter())
            .filter(|(_, keep)| **keep)
            .map(|(t, _)| t)
            .collect();
        let adj = queen_adjacency(&tracts);
        for i in 0..adj.len() {
            prop_assert!(!adj.are_neighbors(i, i));
            for &j in adj.neighbors(i) {
                prop_assert!(adj.are_neighbors(j, i));
            }
        }
        let moved: Vec<MultiPolygon> = tracts.iter().map(|t| t.translate(dx, dy)).collect();
        let adj2 = queen_adjacency(&moved);
        for i in 0..adj.len() {
            prop_assert_eq!(adj.neighbors(i), adj2.neighbors(i));
        }
    }

    #[test]
    fn centroid_follows_translation(
        radii in prop::collection::vec(50.0f64..200.0, 5..12),
        dx in -1e4f64..1e4, dy in -1e4f64..1e4,
    ) {
        let shape: MultiPolygon = Polygon::from_exterior(star_ring(&radii)).unwrap().into();
        let (a0, c0) = shape.area_centroid().unwrap();
        let (a1, c1) = shape.translate(dx, dy).area_centroid().unwrap();
        prop_assert!((a0 - a1).abs() <= 1e-9 * a0);
        prop_assert!((c1.x - c0.x - dx).abs() < 1e-6);
        prop_assert!((c1.y - c0.y - dy).abs() < 1e-6);
    }
}

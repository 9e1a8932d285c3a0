#![allow(dead_code)]

use std::path::{Path, PathBuf};

use access_atlas::geometry::ProjectedPoint;

pub fn minitown_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/minitown")
}

pub fn minitown_config() -> PathBuf {
    minitown_dir().join("minitown.json")
}

pub const VARS: [&str; 10] = [
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

/// Reference loading matrix: rows are variables, columns PC1..PC10.
pub const REFERENCE_LOADINGS: [[f64; 10]; 10] = [
    [
        0.2829, 0.3406, 0.2905, -0.0098, 0.0999, -0.8138, -0.2051, 0.0674, -0.0216, -0.0119,
    ],
    [
        -0.1845, 0.5316, 0.1506, 0.0789, -0.5102, 0.2748, -0.4744, 0.1729, 0.2120, 0.1367,
    ],
    [
        -0.2541, -0.2855, -0.4735, -0.1457, -0.6200, -0.4622, 0.0505, 0.0437, 0.0771, -0.0113,
    ],
    [
        -0.3167, 0.1955, 0.4965, -0.2898, -0.1618, -0.0475, 0.6843, -0.0250, 0.1720, 0.0639,
    ],
    [
        -0.0998, -0.4463, 0.4630, 0.4842, -0.2021, -0.0411, -0.0085, 0.4350, -0.3256, 0.0648,
    ],
    [
        -0.3744, -0.2304, 0.2442, 0.3293, 0.0861, -0.1291, -0.2388, -0.5867, 0.4109, -0.2111,
    ],
    [
        -0.4246, 0.2851, -0.0664, -0.0194, 0.0519, -0.0131, -0.0299, 0.0102, -0.5328, -0.6678,
    ],
    [
        -0.4215, -0.0074, -0.1687, -0.0066, 0.4725, -0.0989, -0.0528, 0.6128, 0.4271, -0.0086,
    ],
    [
        0.1278, 0.3538, -0.3109, 0.7315, -0.0584, -0.0503, 0.4469, -0.0051, 0.1354, -0.0522,
    ],
    [
        -0.4435, 0.1512, -0.1367, 0.1001, 0.2039, -0.1246, -0.0400, -0.2324, -0.3995, 0.6924,
    ],
];

pub const REFERENCE_PROPORTIONS: [f64; 10] = [
    0.4068, 0.2056, 0.1127, 0.0939, 0.0498, 0.0486, 0.0294, 0.0273, 0.0141, 0.0118,
];

/// Reference correlation between loading-matrix rows.
pub const REFERENCE_LOADING_CORR: [[f64; 10]; 10] = [
    [
        1.0000, -0.0007, 0.0052, -0.0015, -0.0006, 0.0014, 0.0030, -0.0015, -0.0028, 0.0004,
    ],
    [
        -0.0007, 1.0000, 0.1081, -0.0311, -0.0127, 0.0281, 0.0615, -0.0301, -0.0568, 0.0090,
    ],
    [
        0.0052, 0.1081, 1.0000, 0.2199, 0.0899, -0.1984, -0.4341, 0.2127, 0.4009, -0.0634,
    ],
    [
        -0.0015, -0.0311, 0.2199, 1.0000, -0.0259, 0.0571, 0.1250, -0.0612, -0.1154, 0.0183,
    ],
    [
        -0.0006, -0.0127, 0.0899, -0.0259, 1.0000, 0.0233, 0.0511, -0.0250, -0.0472, 0.0075,
    ],
    [
        0.0014, 0.0281, -0.1984, 0.0571, 0.0233, 1.0000, -0.1127, 0.0552, 0.1041, -0.0165,
    ],
    [
        0.0030, 0.0615, -0.4341, 0.1250, 0.0511, -0.1127, 1.0000, 0.1209, 0.2278, -0.0361,
    ],
    [
        -0.0015, -0.0301, 0.2127, -0.0612, -0.0250, 0.0552, 0.1209, 1.0000, -0.1116, 0.0177,
    ],
    [
        -0.0028, -0.0568, 0.4009, -0.1154, -0.0472, 0.1041, 0.2278, -0.1116, 1.0000, 0.0333,
    ],
    [
        0.0004, 0.0090, -0.0634, 0.0183, 0.0075, -0.0165, -0.0361, 0.0177, 0.0333, 1.0000,
    ],
];

/// Even-odd point-in-ring by winding number, independent of the library.
pub fn winding_inside(pt: &ProjectedPoint, ring: &[ProjectedPoint]) -> bool {
    let mut wn = 0i32;
    for w in ring.windows(2) {
        let (a, b) = (w[0], w[1]);
        let cross = (b.x - a.x) * (pt.y - a.y) - (pt.x - a.x) * (b.y - a.y);
        if a.y <= pt.y {
            if b.y > pt.y && cross > 0.0 {
                wn += 1;
            }
        } else if b.y <= pt.y && cross < 0.0 {
            wn -= 1;
        }
    }
    wn != 0
}

/// Minimum distance from `c` to boundary samples spaced at most `step` meters apart.
pub fn sampled_boundary_distance(c: &ProjectedPoint, ring: &[ProjectedPoint], step: f64) -> f64 {
    let mut best = f64::INFINITY;
    for w in ring.windows(2) {
        let (a, b) = (w[0], w[1]);
        let len = ((b.x - a.x).powi(2) + (b.y - a.y).powi(2)).sqrt();
        let k = (len / step).ceil().max(1.0) as usize;
        for s in 0..=k {
            let t = s as f64 / k as f64;
            let (x, y) = (a.x + t * (b.x - a.x), a.y + t * (b.y - a.y));
            best = best.min(((x - c.x).powi(2) + (y - c.y).powi(2)).sqrt());
        }
    }
    best
}

pub mod graphs {
    use access_atlas::geometry::ProjectedPoint;
    use access_atlas::network::{EdgeRecord, NodeId, NodeRecord};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    pub struct RandomGraph {
        pub nodes: Vec<NodeRecord>,
        pub edges: Vec<EdgeRecord>,
        pub sources: Vec<NodeId>,
    }

    /// Connected random graph with scattered ids: a random spanning tree plus extra edges.
    pub fn random_graph(seed: u64) -> RandomGraph {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = rng.random_range(2..=50);
        let nodes: Vec<NodeRecord> = (0..n)
            .map(|i| NodeRecord {
                id: 1000 + 7 * i as u64 + rng.random_range(0..7),
                location: ProjectedPoint::new(
                    rng.random_range(0.0..5000.0),
                    rng.random_range(0.0..5000.0),
                ),
            })
            .collect();
        let extra = rng.random_range(0..=2 * n);
        let mut edges = Vec::with_capacity(n + extra);
        for k in 0..n - 1 + extra {
            let (a, b) = if k < n - 1 {
                (k + 1, rng.random_range(0..=k))
            } else {
                let a = rng.random_range(0..n);
                (a, (a + rng.random_range(1..n)) % n)
            };
            let length_m = if rng.random_bool(0.3) {
                None
            } else {
                Some(rng.random_range(1.0..1000.0))
            };
            edges.push(EdgeRecord {
                from: nodes[a].id,
                to: nodes[b].id,
                length_m,
                road_class: "residential".into(),
            });
        }
        let k = rng.random_range(1..=3.min(n));
        let mut sources: Vec<NodeId> = (0..k).map(|_| nodes[rng.random_range(0..n)].id).collect();
        sources.sort_unstable();
        sources.dedup();
        RandomGraph {
            nodes,
            edges,
            sources,
        }
    }

    /// All-pairs shortest paths. Indexed by position in `nodes`.
    pub fn floyd_warshall(nodes: &[NodeRecord], edges: &[EdgeRecord]) -> Vec<Vec<f64>> {
        let n = nodes.len();
        let idx = |id: NodeId| nodes.iter().position(|r| r.id == id).unwrap();
        let mut d = vec![vec![f64::INFINITY; n]; n];
        for (i, row) in d.iter_mut().enumerate() {
            row[i] = 0.0;
        }
        for e in edges {
            let (a, b) = (idx(e.from), idx(e.to));
            let w = e.length_m.unwrap_or_else(|| {
                let (p, q) = (nodes[a].location, nodes[b].location);
                ((p.x - q.x).powi(2) + (p.y - q.y).powi(2)).sqrt()
            });
            if w < d[a][b] {
                d[a][b] = w;
                d[b][a] = w;
            }
        }
        for k in 0..n {
            for i in 0..n {
                for j in 0..n {
                    let via = d[i][k] + d[k][j];
                    if via < d[i][j] {
                        d[i][j] = via;
                    }
                }
            }
        }
        d
    }

    /// Compares Dijkstra output to the oracle; returns the worst relative error
    /// or an error string on a reachability mismatch.
    pub fn check_against_oracle(g: &RandomGraph) -> Result<f64, String> {
        use access_atlas::network::{build_network, multisource_shortest_distances};
        let classes = ["residential".to_string()].into_iter().collect();
        let net = build_network(&g.edges, &g.nodes, &classes).map_err(|e| e.to_string())?;
        let fw = floyd_warshall(&g.nodes, &g.edges);
        let src_idx: Vec<usize> = g
            .sources
            .iter()
            .map(|s| g.nodes.iter().position(|r| r.id == *s).unwrap())
            .collect();
        // isolated sources are dropped from the network
        let live: std::collections::BTreeSet<NodeId> = g
            .sources
            .iter()
            .copied()
            .filter(|s| net.contains(*s))
            .collect();
        if live.is_empty() {
            return Ok(0.0);
        }
        let got = multisource_shortest_distances(&net, &live).map_err(|e| e.to_string())?;
        let mut worst = 0.0f64;
        for (i, rec) in g.nodes.iter().enumerate() {
            if !net.contains(rec.id) {
                continue;
            }
            let want = src_idx
                .iter()
                .map(|&s| fw[s][i])
                .fold(f64::INFINITY, f64::min);
            match (got.get(rec.id), want.is_finite()) {
                (Some(d), true) => worst = worst.max((d - want).abs() / want.max(1.0)),
                (None, false) => {}
                (g, _) => return Err(format!("node {}: got {g:?}, oracle {want}", rec.id)),
            }
        }
        Ok(worst)
    }
}

pub mod pca3 {
    pub const TABLE: [[f64; 3]; 6] = [
        [2.0, 1.0, 3.5],
        [4.0, 3.0, 2.0],
        [1.0, 2.5, 4.0],
        [5.0, 4.0, 1.5],
        [3.0, 2.0, 3.0],
        [6.0, 5.5, 0.5],
    ];

    /// Reference eigenvalues from an external symmetric eigensolver.
    pub const FROZEN_EIGENVALUES: [f64; 3] =
        [2.81747521029494, 0.17839053386351805, 0.00413425584154083];

    /// Reference loadings (rows: variables, columns: components), signs normalized.
    pub const FROZEN_LOADINGS: [[f64; 3]; 3] = [
        [
            -0.5822639880763454,
            -0.49126336784489055,
            0.6477877365334457,
        ],
        [-0.5588152452420376, 0.8205640294618408, 0.12000081349069286],
        [0.5905033191054139, 0.29212151062022573, 0.7523103436471192],
    ];

    /// Pearson correlation from raw sums.
    pub fn correlation(x: &[[f64; 3]]) -> [[f64; 3]; 3] {
        let n = x.len() as f64;
        let mut r = [[0.0; 3]; 3];
        for a in 0..3 {
            for b in 0..3 {
                let (mut sa, mut sb, mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0, 0.0, 0.0);
                for row in x {
                    sa += row[a];
                    sb += row[b];
                    sab += row[a] * row[b];
                    saa += row[a] * row[a];
                    sbb += row[b] * row[b];
                }
                r[a][b] =
                    (n * sab - sa * sb) / ((n * saa - sa * sa).sqrt() * (n * sbb - sb * sb).sqrt());
            }
        }
        r
    }

    /// Eigenpairs of a symmetric 3x3 matrix from its characteristic cubic.
    /// Eigenvalues descending; each vector has its largest-magnitude entry positive.
    pub fn eigen(r: &[[f64; 3]; 3]) -> ([f64; 3], [[f64; 3]; 3]) {
        let tr = r[0][0] + r[1][1] + r[2][2];
        let minors = r[0][0] * r[1][1] - r[0][1] * r[1][0] + r[0][0] * r[2][2] - r[0][2] * r[2][0]
            + r[1][1] * r[2][2]
            - r[1][2] * r[2][1];
        let det = r[0][0] * (r[1][1] * r[2][2] - r[1][2] * r[2][1])
            - r[0][1] * (r[1][0] * r[2][2] - r[1][2] * r[2][0])
            + r[0][2] * (r[1][0] * r[2][1] - r[1][1] * r[2][0]);
        // λ³ + aλ² + bλ + c = 0
        let (a, b, c) = (-tr, minors, -det);
        let q = (3.0 * b - a * a) / 9.0;
        let s = (9.0 * a * b - 27.0 * c - 2.0 * a * a * a) / 54.0;
        let theta = (s / (-q * q * q).sqrt()).clamp(-1.0, 1.0).acos();
        let mut l: Vec<f64> = (0..3)
            .map(|k| {
                2.0 * (-q).sqrt() * ((theta + 2.0 * std::f64::consts::PI * k as f64) / 3.0).cos()
                    - a / 3.0
            })
            .collect();
        l.sort_by(|x, y| y.partial_cmp(x).unwrap());

        let mut vecs = [[0.0; 3]; 3];
        for (k, &lam) in l.iter().enumerate() {
            let m: Vec<[f64; 3]> = (0..3)
                .map(|i| {
                    let mut row = r[i];
                    row[i] -= lam;
                    row
                })
                .collect();
            // the null vector is parallel to the cross product of any two independent rows
            let mut best = [0.0; 3];
            let mut best_norm = 0.0;
            for (i, j) in [(0, 1), (0, 2), (1, 2)] {
                let (u, v) = (m[i], m[j]);
                let x = [
                    u[1] * v[2] - u[2] * v[1],
                    u[2] * v[0] - u[0] * v[2],
                    u[0] * v[1] - u[1] * v[0],
                ];
                let nrm = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt();
                if nrm > best_norm {
                    best_norm = nrm;
                    best = x;
                }
            }
            let mut v = best.map(|e| e / best_norm);
            let big = (0..3).fold(0, |b, i| {
                if v[i].abs() > v[b].abs() + 1e-12 {
                    i
                } else {
                    b
                }
            });
            if v[big] < 0.0 {
                v = v.map(|e| -e);
            }
            for i in 0..3 {
                vecs[i][k] = v[i];
            }
        }
        ([l[0], l[1], l[2]], vecs)
    }
}

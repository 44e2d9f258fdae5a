use std::sync::OnceLock;

use crate::geom::Vec3;
use crate::meshkit::{GridSpec, TriMesh};

pub const ISO: f64 = 0.5;

/// Field values at the cell centers of `spec`, x fastest.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField {
    pub spec: GridSpec,
    pub values: Vec<f64>,
}

impl ScalarField {
    pub fn from_fn(spec: GridSpec, f: impl Fn(&Vec3) -> f64) -> Self {
        let values = (0..spec.len()).map(|i| f(&spec.center_of(i))).collect();
        Self { spec, values }
    }

    pub fn node(&self, i: usize, j: usize, k: usize) -> f64 {
        self.values[self.spec.index(i, j, k)]
    }

    /// Whether any node lies above `iso`.
    pub fn has_inside(&self, iso: f64) -> bool {
        self.values.iter().any(|&v| v > iso)
    }

    /// Trilinear interpolation between node values, clamped to the grid.
    pub fn trilinear(&self, p: &Vec3) -> f64 {
        let s = &self.spec;
        let first = s.center(0, 0, 0);
        let mut base = [0usize; 3];
        let mut frac = [0.0; 3];
        for a in 0..3 {
            let u = ((p[a] - first[a]) / s.cell).clamp(0.0, (s.res[a] - 1) as f64);
            let i = (u.floor() as usize).min(s.res[a].saturating_sub(2));
            base[a] = i;
            frac[a] = u - i as f64;
        }
        let mut acc = 0.0;
        for c in 0..8 {
            let o = [c & 1, (c >> 1) & 1, (c >> 2) & 1];
            let w: f64 = (0..3)
                .map(|a| if o[a] == 1 { frac[a] } else { 1.0 - frac[a] })
                .product();
            let idx = [
                (base[0] + o[0]).min(s.res[0] - 1),
                (base[1] + o[1]).min(s.res[1] - 1),
                (base[2] + o[2]).min(s.res[2] - 1),
            ];
            acc += w * self.node(idx[0], idx[1], idx[2]);
        }
        acc
    }
}

/// Corner `c` of a cube sits at offset `(c & 1, (c >> 1) & 1, c >> 2)`.
const EDGES: [(usize, usize); 12] = [
    (0, 1),
    (2, 3),
    (4, 5),
    (6, 7),
    (0, 2),
    (1, 3),
    (4, 6),
    (5, 7),
    (0, 4),
    (1, 5),
    (2, 6),
    (3, 7),
];

fn edge_of(a: usize, b: usize) -> usize {
    let key = (a.min(b), a.max(b));
    EDGES.iter().position(|&e| e == key).expect("cube edge")
}

/// Corners of each face, counter-clockwise seen from outside the cube.
fn faces() -> Vec<[usize; 4]> {
    let mut out = Vec::new();
    for axis in 0..3 {
        let (u, w) = ((axis + 1) % 3, (axis + 2) % 3);
        for side in 0..2 {
            let corner = |du: usize, dw: usize| (side << axis) | (du << u) | (dw << w);
            let ccw = [corner(0, 0), corner(1, 0), corner(1, 1), corner(0, 1)];
            out.push(if side == 1 {
                ccw
            } else {
                [ccw[0], ccw[3], ccw[2], ccw[1]]
            });
        }
    }
    out
}

/// Triangulation of one corner configuration. Indices below 12 are cube
/// edges; `12 + c` is an extra vertex at the iso point near the centre of
/// chain `c`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Case {
    pub triangles: Vec<[u8; 3]>,
    pub chains: Vec<Vec<u8>>,
}

fn corners_of(e: usize) -> [usize; 2] {
    [EDGES[e].0, EDGES[e].1]
}

fn share_face(e: usize, f: usize, quads: &[[usize; 4]]) -> bool {
    quads
        .iter()
        .any(|q| corners_of(e).iter().chain(corners_of(f).iter()).all(|c| q.contains(c)))
}

/// Triangles for one corner configuration. Each face's crossings are joined
/// so that inside corners are never connected across the face, which
/// depends only on that face and keeps neighbouring cubes consistent.
/// Chains are fanned from a vertex whose diagonals avoid the cube faces;
/// when no such vertex exists the chain is fanned around an extra vertex.
fn triangulate(config: usize) -> Case {
    let inside = |c: usize| config >> c & 1 == 1;
    let quads = faces();
    let mut next = [usize::MAX; 12];
    for q in &quads {
        let mut crossings = Vec::new();
        for i in 0..4 {
            let (a, b) = (q[i], q[(i + 1) % 4]);
            if inside(a) != inside(b) {
                crossings.push((edge_of(a, b), inside(a)));
            }
        }
        let n = crossings.len();
        for p in 0..n {
            let (start, leaving) = crossings[p];
            if !leaving {
                continue;
            }
            let end = (1..n)
                .map(|back| crossings[(p + n - back) % n])
                .find(|c| !c.1)
                .expect("paired crossing")
                .0;
            next[start] = end;
        }
    }
    let mut out = Case::default();
    let mut seen = [false; 12];
    for e in 0..12 {
        if next[e] == usize::MAX || seen[e] {
            continue;
        }
        let mut poly = Vec::new();
        let mut cur = e;
        while !seen[cur] {
            seen[cur] = true;
            poly.push(cur);
            cur = next[cur];
        }
        let m = poly.len();
        let start = (0..m).find(|&r| (2..m - 1).all(|d| !share_face(poly[r], poly[(r + d) % m], &quads)));
        // The chain runs clockwise about the outward normal.
        match start {
            Some(r) => {
                for i in 1..m - 1 {
                    let at = |k: usize| poly[(r + k) % m] as u8;
                    out.triangles.push([at(0), at(i + 1), at(i)]);
                }
            }
            None => {
                let centre = (12 + out.chains.len()) as u8;
                for i in 0..m {
                    out.triangles.push([centre, poly[(i + 1) % m] as u8, poly[i] as u8]);
                }
                out.chains.push(poly.iter().map(|&v| v as u8).collect());
            }
        }
    }
    out
}

/// The 256-case table, generated once.
pub fn case_table() -> &'static [Case] {
    static TABLE: OnceLock<Vec<Case>> = OnceLock::new();
    TABLE.get_or_init(|| (0..256).map(triangulate).collect())
}

/// Trilinear value and gradient inside a unit cube with corner values `v`.
fn cube_eval(v: &[f64; 8], u: &[f64; 3]) -> (f64, [f64; 3]) {
    let mut val = 0.0;
    let mut grad = [0.0; 3];
    for (c, &vc) in v.iter().enumerate() {
        let o = [c & 1, (c >> 1) & 1, c >> 2];
        let w: [f64; 3] = std::array::from_fn(|a| if o[a] == 1 { u[a] } else { 1.0 - u[a] });
        let sgn: [f64; 3] = std::array::from_fn(|a| if o[a] == 1 { 1.0 } else { -1.0 });
        val += vc * w[0] * w[1] * w[2];
        grad[0] += vc * sgn[0] * w[1] * w[2];
        grad[1] += vc * w[0] * sgn[1] * w[2];
        grad[2] += vc * w[0] * w[1] * sgn[2];
    }
    (val, grad)
}

/// Moves `u` (unit-cube coordinates) onto the trilinear iso level by
/// gradient steps, staying inside the cube.
fn project_to_iso(v: &[f64; 8], mut u: [f64; 3], iso: f64) -> [f64; 3] {
    for _ in 0..20 {
        let (f, g) = cube_eval(v, &u);
        let g2 = g.iter().map(|x| x * x).sum::<f64>();
        if (f - iso).abs() < 1e-12 || g2 == 0.0 {
            break;
        }
        for a in 0..3 {
            u[a] = (u[a] - (f - iso) * g[a] / g2).clamp(0.0, 1.0);
        }
    }
    u
}

/// Iso-surface at `iso` with normals facing decreasing values. Vertices on
/// shared grid edges are shared, so closed surfaces come out watertight.
pub fn marching_cubes(field: &ScalarField, iso: f64) -> TriMesh {
    let s = &field.spec;
    let [nx, ny, nz] = s.res;
    let mut mesh = TriMesh::default();
    if nx < 2 || ny < 2 || nz < 2 {
        return mesh;
    }
    let table = case_table();
    let mut cache = vec![u32::MAX; 3 * s.len()];
    let mut edge_vertex = |mesh: &mut TriMesh, i: usize, j: usize, k: usize, e: usize| -> usize {
        let (a, b) = EDGES[e];
        let off = |c: usize| [i + (c & 1), j + ((c >> 1) & 1), k + (c >> 2)];
        let (pa, pb) = (off(a), off(b));
        let axis = (0..3).find(|&d| pa[d] != pb[d]).expect("edge axis");
        let slot = 3 * s.index(pa[0], pa[1], pa[2]) + axis;
        if cache[slot] != u32::MAX {
            return cache[slot] as usize;
        }
        let (va, vb) = (field.node(pa[0], pa[1], pa[2]), field.node(pb[0], pb[1], pb[2]));
        let t = if vb != va {
            ((iso - va) / (vb - va)).clamp(0.0, 1.0)
        } else {
            0.5
        };
        let (xa, xb) = (s.center(pa[0], pa[1], pa[2]), s.center(pb[0], pb[1], pb[2]));
        mesh.vertices.push(xa + (xb - xa) * t);
        let id = mesh.vertices.len() - 1;
        cache[slot] = id as u32;
        id
    };
    for k in 0..nz - 1 {
        for j in 0..ny - 1 {
            for i in 0..nx - 1 {
                let corners: [f64; 8] =
                    std::array::from_fn(|c| field.node(i + (c & 1), j + ((c >> 1) & 1), k + (c >> 2)));
                let config = (0..8).filter(|&c| corners[c] > iso).fold(0, |m, c| m | 1 << c);
                let case = &table[config];
                if case.triangles.is_empty() {
                    continue;
                }
                let origin = s.center(i, j, k);
                let mut extra = Vec::with_capacity(case.chains.len());
                for chain in &case.chains {
                    let mut u = [0.0; 3];
                    for &e in chain {
                        let (a, b) = EDGES[e as usize];
                        for (ax, ua) in u.iter_mut().enumerate() {
                            *ua += 0.5 * (((a >> ax) & 1) + ((b >> ax) & 1)) as f64 / chain.len() as f64;
                        }
                    }
                    let u = project_to_iso(&corners, u, iso);
                    mesh.vertices.push(origin + Vec3::new(u[0], u[1], u[2]) * s.cell);
                    extra.push(mesh.vertices.len() - 1);
                }
                for t in &case.triangles {
                    let v = t.map(|e| {
                        if e < 12 {
                            edge_vertex(&mut mesh, i, j, k, e as usize)
                        } else {
                            extra[e as usize - 12]
                        }
                    });
                    mesh.triangles.push(v);
                }
            }
        }
    }
    mesh.compute_normals();
    mesh
}

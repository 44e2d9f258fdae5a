use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::geom::{Aabb, Similarity, Vec3};

/// Faces with area at or below this are dropped on construction.
pub const DEGENERATE_AREA: f64 = 1e-12;

/// Indexed triangle mesh. Counter-clockwise winding faces outward.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TriMesh {
    pub vertices: Vec<Vec3>,
    pub triangles: Vec<[usize; 3]>,
    pub normals: Vec<Vec3>,
}

impl TriMesh {
    /// Validates indices, drops degenerate faces and computes vertex normals.
    pub fn new(vertices: Vec<Vec3>, triangles: Vec<[usize; 3]>) -> Result<Self> {
        let n = vertices.len();
        for (f, t) in triangles.iter().enumerate() {
            if let Some(&bad) = t.iter().find(|&&i| i >= n) {
                return Err(Error::invalid(format!(
                    "triangle {f}: index out of range ({bad} >= {n})"
                )));
            }
        }
        let mut mesh = Self::from_raw(vertices, triangles);
        mesh.drop_degenerate();
        mesh.compute_normals();
        Ok(mesh)
    }

    /// Builds without validation or cleanup; normals are computed.
    pub fn from_raw(vertices: Vec<Vec3>, triangles: Vec<[usize; 3]>) -> Self {
        let mut mesh = Self {
            vertices,
            triangles,
            normals: Vec::new(),
        };
        mesh.compute_normals();
        mesh
    }

    pub fn is_empty(&self) -> bool {
        self.triangles.is_empty()
    }

    pub fn drop_degenerate(&mut self) {
        let keep: Vec<_> = (0..self.triangles.len())
            .filter(|&f| {
                let [a, b, c] = self.triangles[f];
                a != b && b != c && a != c && self.face_area(f) > DEGENERATE_AREA
            })
            .collect();
        if keep.len() != self.triangles.len() {
            self.triangles = keep.iter().map(|&f| self.triangles[f]).collect();
        }
    }

    pub fn face_cross(&self, f: usize) -> Vec3 {
        let [a, b, c] = self.triangles[f];
        let (a, b, c) = (self.vertices[a], self.vertices[b], self.vertices[c]);
        (b - a).cross(&(c - a))
    }

    pub fn face_area(&self, f: usize) -> f64 {
        0.5 * self.face_cross(f).norm()
    }

    pub fn face_normal(&self, f: usize) -> Vec3 {
        let c = self.face_cross(f);
        let n = c.norm();
        if n > 0.0 {
            c / n
        } else {
            Vec3::zeros()
        }
    }

    pub fn face_centroid(&self, f: usize) -> Vec3 {
        let [a, b, c] = self.triangles[f];
        (self.vertices[a] + self.vertices[b] + self.vertices[c]) / 3.0
    }

    pub fn total_area(&self) -> f64 {
        (0..self.triangles.len()).map(|f| self.face_area(f)).sum()
    }

    /// Area-weighted average of incident face normals.
    pub fn compute_normals(&mut self) {
        let mut acc = vec![Vec3::zeros(); self.vertices.len()];
        for f in 0..self.triangles.len() {
            let c = self.face_cross(f);
            for &v in &self.triangles[f] {
                acc[v] += c;
            }
        }
        self.normals = acc
            .into_iter()
            .map(|n| {
                let len = n.norm();
                if len > 0.0 {
                    n / len
                } else {
                    Vec3::zeros()
                }
            })
            .collect();
    }

    pub fn bbox(&self) -> Aabb {
        Aabb::from_points(&self.vertices)
    }

    /// Bounding box of the vertices referenced by faces.
    pub fn used_bbox(&self) -> Aabb {
        Aabb::from_points(self.triangles.iter().flatten().map(|&v| &self.vertices[v]))
    }

    pub fn transformed(&self, xf: &Similarity) -> TriMesh {
        TriMesh {
            vertices: self.vertices.iter().map(|p| xf.apply(p)).collect(),
            triangles: self.triangles.clone(),
            normals: self.normals.clone(),
        }
    }

    /// Concatenates `other`, offsetting its indices. Returns the offset.
    pub fn append(&mut self, other: &TriMesh) -> usize {
        let off = self.vertices.len();
        self.vertices.extend_from_slice(&other.vertices);
        self.normals.extend_from_slice(&other.normals);
        self.triangles
            .extend(other.triangles.iter().map(|t| [t[0] + off, t[1] + off, t[2] + off]));
        off
    }

    /// Keeps the listed faces and the vertices they use; vertex normals are
    /// carried over rather than recomputed. Returns the new mesh and a map
    /// from old vertex ids to new ones.
    pub fn submesh(&self, faces: &[usize]) -> (TriMesh, Vec<Option<usize>>) {
        let mut map = vec![None; self.vertices.len()];
        let mut vertices = Vec::new();
        let mut normals = Vec::new();
        let mut triangles = Vec::with_capacity(faces.len());
        for &f in faces {
            let mut t = [0; 3];
            for (k, &v) in self.triangles[f].iter().enumerate() {
                t[k] = *map[v].get_or_insert_with(|| {
                    vertices.push(self.vertices[v]);
                    normals.push(self.normals.get(v).copied().unwrap_or_else(Vec3::zeros));
                    vertices.len() - 1
                });
            }
            triangles.push(t);
        }
        (
            TriMesh {
                vertices,
                triangles,
                normals,
            },
            map,
        )
    }

    /// Undirected edge to incident face count.
    pub fn edge_face_counts(&self) -> HashMap<(usize, usize), usize> {
        let mut m = HashMap::with_capacity(self.triangles.len() * 3 / 2);
        for t in &self.triangles {
            for k in 0..3 {
                *m.entry(undirected(t[k], t[(k + 1) % 3])).or_insert(0) += 1;
            }
        }
        m
    }

    /// Number of edges with exactly one incident face.
    pub fn boundary_edge_count(&self) -> usize {
        self.edge_face_counts().values().filter(|&&c| c == 1).count()
    }

    /// Edges with three or more incident faces.
    pub fn non_manifold_edges(&self) -> Vec<(usize, usize)> {
        let mut v: Vec<_> = self
            .edge_face_counts()
            .into_iter()
            .filter(|&(_, c)| c > 2)
            .map(|(e, _)| e)
            .collect();
        v.sort_unstable();
        v
    }

    /// V - E + F over vertices referenced by faces.
    pub fn euler_characteristic(&self) -> i64 {
        let mut used = vec![false; self.vertices.len()];
        for t in &self.triangles {
            for &v in t {
                used[v] = true;
            }
        }
        let v = used.iter().filter(|&&u| u).count() as i64;
        v - self.edge_face_counts().len() as i64 + self.triangles.len() as i64
    }

    /// Vertex adjacency through face edges, sorted and deduplicated.
    pub fn vertex_neighbors(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.vertices.len()];
        for t in &self.triangles {
            for k in 0..3 {
                let (a, b) = (t[k], t[(k + 1) % 3]);
                adj[a].push(b);
                adj[b].push(a);
            }
        }
        for l in &mut adj {
            l.sort_unstable();
            l.dedup();
        }
        adj
    }

    /// Drops vertices not referenced by any face.
    pub fn compact(&self) -> TriMesh {
        let all: Vec<_> = (0..self.triangles.len()).collect();
        self.submesh(&all).0
    }

    /// Connected face components (sharing a vertex), each a list of faces.
    pub fn face_components(&self) -> Vec<Vec<usize>> {
        let mut parent: Vec<usize> = (0..self.vertices.len()).collect();
        for t in &self.triangles {
            union(&mut parent, t[0], t[1]);
            union(&mut parent, t[1], t[2]);
        }
        let mut index: HashMap<usize, usize> = HashMap::new();
        let mut comps: Vec<Vec<usize>> = Vec::new();
        for (f, t) in self.triangles.iter().enumerate() {
            let r = find(&mut parent, t[0]);
            let c = *index.entry(r).or_insert_with(|| {
                comps.push(Vec::new());
                comps.len() - 1
            });
            comps[c].push(f);
        }
        comps
    }
}

pub fn undirected(a: usize, b: usize) -> (usize, usize) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

pub(crate) fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

pub(crate) fn union(parent: &mut [usize], a: usize, b: usize) {
    let (ra, rb) = (find(parent, a), find(parent, b));
    if ra != rb {
        parent[ra.max(rb)] = ra.min(rb);
    }
}

/// Merges vertices closer than `tol`, then removes faces that became
/// degenerate, exact duplicate faces, and pairs of opposite duplicates.
pub fn weld(mesh: &TriMesh, tol: f64) -> TriMesh {
    let mut out = weld_topological(mesh, tol);
    out.drop_degenerate();
    out.compact()
}

/// [`weld`] that keeps zero-area faces whose three vertex ids differ, so
/// sliver triangles still close the connectivity.
pub fn weld_topological(mesh: &TriMesh, tol: f64) -> TriMesh {
    let n = mesh.vertices.len();
    let cell = if tol > 0.0 { tol } else { f64::MIN_POSITIVE };
    let key = |p: &Vec3| -> [i64; 3] {
        [
            (p.x / cell).floor() as i64,
            (p.y / cell).floor() as i64,
            (p.z / cell).floor() as i64,
        ]
    };
    let mut grid: HashMap<[i64; 3], Vec<usize>> = HashMap::new();
    let mut rep = vec![0usize; n];
    let mut kept: Vec<usize> = Vec::new();
    for i in 0..n {
        let p = mesh.vertices[i];
        let k = key(&p);
        let mut found = None;
        'search: for dx in -1..=1 {
            for dy in -1..=1 {
                for dz in -1..=1 {
                    if let Some(c) = grid.get(&[k[0] + dx, k[1] + dy, k[2] + dz]) {
                        for &j in c {
                            if (mesh.vertices[kept[j]] - p).norm() <= tol {
                                found = Some(j);
                                break 'search;
                            }
                        }
                    }
                }
            }
        }
        rep[i] = match found {
            Some(j) => j,
            None => {
                kept.push(i);
                grid.entry(k).or_default().push(kept.len() - 1);
                kept.len() - 1
            }
        };
    }
    let vertices: Vec<Vec3> = kept.iter().map(|&i| mesh.vertices[i]).collect();
    let mut faces: HashMap<[usize; 3], (usize, usize)> = HashMap::new();
    let mut order = Vec::new();
    for t in &mesh.triangles {
        let t = [rep[t[0]], rep[t[1]], rep[t[2]]];
        if t[0] == t[1] || t[1] == t[2] || t[0] == t[2] {
            continue;
        }
        let mut key = t;
        key.sort_unstable();
        let e = faces.entry(key).or_insert_with(|| {
            order.push((key, t));
            (0, 0)
        });
        if parity(&t) {
            e.0 += 1;
        } else {
            e.1 += 1;
        }
    }
    let mut triangles = Vec::new();
    for (key, first) in order {
        let (even, odd) = faces[&key];
        let keep = even.max(odd) - even.min(odd);
        if keep > 0 {
            let want_even = even > odd;
            let t = if parity(&first) == want_even {
                first
            } else {
                [first[0], first[2], first[1]]
            };
            triangles.push(t);
        }
    }
    TriMesh::from_raw(vertices, triangles).compact()
}

/// Whether `t` is an even permutation of its sorted order.
fn parity(t: &[usize; 3]) -> bool {
    let inv = (t[0] > t[1]) as u8 + (t[0] > t[2]) as u8 + (t[1] > t[2]) as u8;
    inv % 2 == 0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::meshkit::shapes;

    #[test]
    fn out_of_range_index_is_reported() {
        let err = TriMesh::new(vec![Vec3::zeros(); 3], vec![[0, 1, 3]]).unwrap_err();
        assert!(err.to_string().contains("index out of range"));
    }

    #[test]
    fn cube_is_closed_with_euler_two() {
        let m = shapes::unit_cube();
        assert_eq!(m.boundary_edge_count(), 0);
        assert_eq!(m.euler_characteristic(), 2);
        assert!((m.total_area() - 6.0).abs() < 1e-12);
        for n in &m.normals {
            assert!((n.norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn weld_merges_split_cube_faces() {
        let cube = shapes::unit_cube();
        let mut split = TriMesh::default();
        for f in 0..cube.triangles.len() {
            split.append(&cube.submesh(&[f]).0);
        }
        assert_eq!(split.vertices.len(), 36);
        let w = weld(&split, 1e-9);
        assert_eq!(w.vertices.len(), 8);
        assert_eq!(w.boundary_edge_count(), 0);
    }

    #[test]
    fn weld_cancels_opposite_duplicate_faces() {
        let v = vec![Vec3::zeros(), Vec3::x(), Vec3::y()];
        let m = TriMesh::from_raw(v, vec![[0, 1, 2], [0, 2, 1]]);
        assert!(weld(&m, 1e-9).is_empty());
    }
}

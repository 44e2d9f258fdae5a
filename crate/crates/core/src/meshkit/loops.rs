use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::meshkit::mesh::{undirected, TriMesh};

/// Closed directed chain of boundary vertices. Walking it keeps the mesh
/// surface on the left when viewed from the outward side.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BoundaryLoop {
    pub vertex_ids: Vec<usize>,
}

impl BoundaryLoop {
    pub fn len(&self) -> usize {
        self.vertex_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertex_ids.is_empty()
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let n = self.vertex_ids.len();
        (0..n).map(move |i| (self.vertex_ids[i], self.vertex_ids[(i + 1) % n]))
    }
}

/// Extracts every boundary loop, oriented by the winding of its faces.
///
/// At vertices where several boundary chains meet, the successor is found
/// by rotating through the fan of the incoming face, so pinched boundaries
/// split into separate loops.
pub fn boundary_loops(mesh: &TriMesh) -> Result<Vec<BoundaryLoop>> {
    let counts = mesh.edge_face_counts();
    if let Some((&(a, b), _)) = counts.iter().filter(|(_, &c)| c > 2).min_by_key(|(e, _)| **e) {
        return Err(Error::NonManifoldEdge(a, b, counts[&(a, b)]));
    }
    // Directed half-edge to owning face.
    let mut half: HashMap<(usize, usize), usize> = HashMap::new();
    let mut boundary: Vec<(usize, usize)> = Vec::new();
    for (f, t) in mesh.triangles.iter().enumerate() {
        for k in 0..3 {
            let (a, b) = (t[k], t[(k + 1) % 3]);
            half.insert((a, b), f);
            if counts[&undirected(a, b)] == 1 {
                boundary.push((a, b));
            }
        }
    }
    boundary.sort_unstable();
    let mut outgoing: HashMap<usize, Vec<usize>> = HashMap::new();
    for &(a, b) in &boundary {
        outgoing.entry(a).or_default().push(b);
    }
    let mut used: HashMap<(usize, usize), bool> = boundary.iter().map(|&e| (e, false)).collect();

    let next_in_fan = |a: usize, v: usize| -> Option<usize> {
        // Rotate around v starting from the face that owns a -> v.
        let mut f = *half.get(&(a, v))?;
        for _ in 0..mesh.triangles.len() {
            let t = mesh.triangles[f];
            let k = t.iter().position(|&x| x == v)?;
            let w = t[(k + 1) % 3];
            if counts[&undirected(v, w)] == 1 {
                return Some(w);
            }
            f = *half.get(&(w, v))?;
        }
        None
    };

    let mut loops = Vec::new();
    for &start in &boundary {
        if used[&start] {
            continue;
        }
        let mut chain = vec![start.0];
        let (mut prev, mut cur) = start;
        *used.get_mut(&start).unwrap() = true;
        while cur != start.0 {
            chain.push(cur);
            let next = next_in_fan(prev, cur)
                .filter(|&w| used.get(&(cur, w)) == Some(&false))
                .or_else(|| outgoing.get(&cur)?.iter().copied().find(|&w| used[&(cur, w)] == false));
            let Some(w) = next else { break };
            *used.get_mut(&(cur, w)).unwrap() = true;
            prev = cur;
            cur = w;
        }
        loops.extend(split_repeats(chain));
    }
    Ok(loops)
}

/// Splits a closed chain at repeated vertices into simple loops.
fn split_repeats(chain: Vec<usize>) -> Vec<BoundaryLoop> {
    let mut out = Vec::new();
    let mut stack: Vec<usize> = Vec::new();
    let mut pos: HashMap<usize, usize> = HashMap::new();
    for v in chain {
        if let Some(&p) = pos.get(&v) {
            let sub: Vec<usize> = stack.drain(p..).collect();
            for u in &sub {
                pos.remove(u);
            }
            if sub.len() >= 2 {
                out.push(BoundaryLoop { vertex_ids: sub });
            }
        }
        pos.insert(v, stack.len());
        stack.push(v);
    }
    if stack.len() >= 2 {
        out.push(BoundaryLoop { vertex_ids: stack });
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::meshkit::shapes;

    #[test]
    fn closed_cube_has_no_loops() {
        assert!(boundary_loops(&shapes::unit_cube()).unwrap().is_empty());
    }

    #[test]
    fn cube_missing_a_face_has_one_square_loop() {
        let mut m = shapes::unit_cube();
        m.triangles.drain(0..2);
        let loops = boundary_loops(&m).unwrap();
        assert_eq!(loops.len(), 1);
        assert_eq!(loops[0].len(), 4);
    }

    #[test]
    fn open_cylinder_loops_run_opposite_ways() {
        let m = shapes::open_cylinder(1.0, 0.0, 1.0, 16, 3);
        let loops = boundary_loops(&m).unwrap();
        assert_eq!(loops.len(), 2);
        let winding = |l: &BoundaryLoop| {
            l.edges()
                .map(|(a, b)| m.vertices[a].cross(&m.vertices[b]).z)
                .sum::<f64>()
        };
        let (w0, w1) = (winding(&loops[0]), winding(&loops[1]));
        assert!(w0 * w1 < 0.0);
        let bottom = loops.iter().find(|l| m.vertices[l.vertex_ids[0]].z == 0.0).unwrap();
        assert!(winding(bottom) > 0.0);
    }

    #[test]
    fn three_faces_on_an_edge_is_an_error() {
        let v = vec![
            crate::geom::v3(0., 0., 0.),
            crate::geom::v3(1., 0., 0.),
            crate::geom::v3(0., 1., 0.),
            crate::geom::v3(0., -1., 0.),
            crate::geom::v3(0., 0., 1.),
        ];
        let m = TriMesh::from_raw(v, vec![[0, 1, 2], [1, 0, 3], [0, 1, 4]]);
        let err = boundary_loops(&m).unwrap_err();
        assert!(err.to_string().contains("(0, 1)"), "{err}");
    }

    #[test]
    fn pinched_boundary_splits_into_two_loops() {
        // Two triangles sharing only vertex 0.
        let v = vec![
            crate::geom::v3(0., 0., 0.),
            crate::geom::v3(1., 0., 0.),
            crate::geom::v3(1., 1., 0.),
            crate::geom::v3(-1., 0., 0.),
            crate::geom::v3(-1., -1., 0.),
        ];
        let m = TriMesh::from_raw(v, vec![[0, 1, 2], [0, 3, 4]]);
        let loops = boundary_loops(&m).unwrap();
        assert_eq!(loops.len(), 2);
        assert!(loops.iter().all(|l| l.len() == 3));
    }
}

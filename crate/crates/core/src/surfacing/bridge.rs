use crate::error::{Error, Result};
use crate::geom::Vec3;

/// Zipper triangulation between two closed loops running in the same
/// direction. Vertex `i` of `a` is index `i`; vertex `j` of `b` is
/// `a.len() + j`. Each step advances the loop whose next vertex gives the
/// shorter new diagonal; the ring has `|a| + |b|` triangles and starts at
/// the vertex of `b` nearest to `a[0]`.
pub fn bridge_loops(a: &[Vec3], b: &[Vec3]) -> Result<Vec<[usize; 3]>> {
    let (na, nb) = (a.len(), b.len());
    if na < 3 || nb < 3 {
        return Err(Error::Degenerate(format!("bridge loops of sizes {na} and {nb}")));
    }
    let j0 = (0..nb)
        .min_by(|&x, &y| (b[x] - a[0]).norm_squared().total_cmp(&(b[y] - a[0]).norm_squared()))
        .unwrap_or(0);
    let ai = |k: usize| k % na;
    let bj = |k: usize| na + (j0 + k) % nb;
    let bp = |k: usize| b[(j0 + k) % nb];
    let mut out = Vec::with_capacity(na + nb);
    let (mut i, mut j) = (0, 0);
    while i < na || j < nb {
        let advance_a = if i == na {
            false
        } else if j == nb {
            true
        } else {
            (a[ai(i + 1)] - bp(j)).norm_squared() <= (a[ai(i)] - bp(j + 1)).norm_squared()
        };
        if advance_a {
            out.push([ai(i), ai(i + 1), bj(j)]);
            i += 1;
        } else {
            out.push([ai(i), bj(j + 1), bj(j)]);
            j += 1;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::v3;
    use crate::meshkit::mesh::undirected;
    use crate::meshkit::{weld, TriMesh};
    use std::collections::HashMap;

    fn polygon(n: usize, r: f64, z: f64) -> Vec<Vec3> {
        (0..n)
            .map(|k| {
                let t = std::f64::consts::TAU * k as f64 / n as f64;
                v3(r * t.cos(), r * t.sin(), z)
            })
            .collect()
    }

    fn ring_mesh(a: &[Vec3], b: &[Vec3]) -> TriMesh {
        let tris = bridge_loops(a, b).unwrap();
        TriMesh::from_raw([a, b].concat(), tris)
    }

    fn assert_loop_edges_once(a: &[Vec3], b: &[Vec3]) {
        let tris = bridge_loops(a, b).unwrap();
        let mut count: HashMap<(usize, usize), usize> = HashMap::new();
        for t in &tris {
            for k in 0..3 {
                *count.entry(undirected(t[k], t[(k + 1) % 3])).or_default() += 1;
            }
        }
        let (na, nb) = (a.len(), b.len());
        for i in 0..na {
            assert_eq!(count[&undirected(i, (i + 1) % na)], 1);
        }
        for j in 0..nb {
            assert_eq!(count[&undirected(na + j, na + (j + 1) % nb)], 1);
        }
        assert!(tris.iter().flatten().all(|&v| v < na + nb));
    }

    #[test]
    fn squares_form_a_prism_side() {
        let a = polygon(4, 1.0, 0.0);
        let b = polygon(4, 1.0, 0.3);
        let m = ring_mesh(&a, &b);
        assert_eq!(m.triangles.len(), 8);
        let perimeter = 4.0 * 2f64.sqrt();
        assert!((m.total_area() - perimeter * 0.3).abs() < 1e-12);
        assert_loop_edges_once(&a, &b);
    }

    #[test]
    fn uneven_loops() {
        let a = polygon(3, 1.0, 0.0);
        let b = polygon(5, 1.2, 0.1);
        assert_eq!(bridge_loops(&a, &b).unwrap().len(), 8);
        assert_loop_edges_once(&a, &b);
        assert_loop_edges_once(&b, &a);
    }

    #[test]
    fn coincident_loops_collapse() {
        let a = polygon(6, 1.0, 0.0);
        let m = ring_mesh(&a, &a);
        assert!(m.total_area() < 1e-12);
        assert!(weld(&m, 1e-9).is_empty());
    }

    #[test]
    fn tiny_loop_is_an_error() {
        assert!(bridge_loops(&polygon(2, 1.0, 0.0), &polygon(4, 1.0, 0.0)).is_err());
    }
}

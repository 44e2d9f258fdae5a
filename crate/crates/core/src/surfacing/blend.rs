use std::collections::{HashMap, HashSet};

use log::warn;

use crate::error::{Error, Result};
use crate::geom::Vec3;
use crate::meshkit::mesh::{find, undirected, union};
use crate::meshkit::TriMesh;
use crate::surfacing::corr::LoopCorrespondence;

/// Removes joint-mesh components that lie on the part side of matched
/// loops. The mesh is cut along loop edges; each component touching a loop
/// is scored by the mean of `(centroid − nearest loop vertex) · outward`
/// and deleted when negative. Vertex ids and normals are preserved. Components found on both sides of one loop
/// edge are kept with a warning.
pub fn remove_redundant(joint: &TriMesh, corrs: &[LoopCorrespondence]) -> TriMesh {
    let matched: Vec<&LoopCorrespondence> = corrs.iter().filter(|c| c.matched).collect();
    if matched.is_empty() || joint.is_empty() {
        return joint.clone();
    }
    let mut cut: HashSet<(usize, usize)> = HashSet::new();
    // Loop vertex -> outward direction at its corresponding part vertex.
    let mut anchors: Vec<(Vec3, Vec3)> = Vec::new();
    for c in &matched {
        let t = &c.joint_loop;
        for i in 0..t.len() {
            cut.insert(undirected(t[i], t[(i + 1) % t.len()]));
            let q = joint.vertices[t[i]];
            let s = c.nearest_part_vertex(&q, &joint.normals[t[i]]);
            anchors.push((q, c.outward(s)));
        }
    }
    // Face adjacency that does not cross the cut.
    let nf = joint.triangles.len();
    let mut edge_faces: HashMap<(usize, usize), Vec<usize>> = HashMap::new();
    for (f, t) in joint.triangles.iter().enumerate() {
        for k in 0..3 {
            edge_faces.entry(undirected(t[k], t[(k + 1) % 3])).or_default().push(f);
        }
    }
    let mut parent: Vec<usize> = (0..nf).collect();
    for (e, fs) in &edge_faces {
        if cut.contains(e) {
            continue;
        }
        for w in fs.windows(2) {
            union(&mut parent, w[0], w[1]);
        }
    }
    let comp: Vec<usize> = (0..nf).map(|f| find(&mut parent, f)).collect();
    let mut touching: HashSet<usize> = HashSet::new();
    let mut ambiguous: HashSet<usize> = HashSet::new();
    for e in &cut {
        if let Some(fs) = edge_faces.get(e) {
            for &f in fs {
                touching.insert(comp[f]);
            }
            if fs.len() == 2 && comp[fs[0]] == comp[fs[1]] {
                ambiguous.insert(comp[fs[0]]);
            }
        }
    }
    let mut score: HashMap<usize, (f64, usize)> = HashMap::new();
    for f in 0..nf {
        if !touching.contains(&comp[f]) || ambiguous.contains(&comp[f]) {
            continue;
        }
        let c = joint.face_centroid(f);
        let (q, u) = anchors
            .iter()
            .min_by(|a, b| (a.0 - c).norm_squared().total_cmp(&(b.0 - c).norm_squared()))
            .expect("anchors");
        let e = score.entry(comp[f]).or_insert((0.0, 0));
        e.0 += (c - q).dot(u);
        e.1 += 1;
    }
    if !ambiguous.is_empty() {
        warn!("{} joint components lie on both sides of a loop; kept", ambiguous.len());
    }
    let triangles = (0..nf)
        .filter(|&f| score.get(&comp[f]).is_none_or(|&(s, n)| s / n as f64 >= 0.0))
        .map(|f| joint.triangles[f])
        .collect();
    // Vertex ids and normals stay valid for the loops.
    TriMesh {
        vertices: joint.vertices.clone(),
        triangles,
        normals: joint.normals.clone(),
    }
}

/// Statistics of a conjugate-gradient solve.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct SolveStats {
    pub iterations: usize,
    /// `‖b − A x‖ / ‖b‖` (zero when `b = 0`).
    pub relative_residual: f64,
}

/// Conjugate gradients for a symmetric positive (semi)definite operator.
pub fn conjugate_gradient(
    apply: impl Fn(&[f64], &mut [f64]),
    b: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<(Vec<f64>, SolveStats)> {
    let n = b.len();
    let bnorm = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    let mut x = vec![0.0; n];
    if bnorm == 0.0 {
        return Ok((x, SolveStats::default()));
    }
    let mut r = b.to_vec();
    let mut p = r.clone();
    let mut ap = vec![0.0; n];
    let mut rr: f64 = r.iter().map(|v| v * v).sum();
    for it in 0..max_iter {
        if rr.sqrt() <= tol * bnorm {
            return Ok((
                x,
                SolveStats {
                    iterations: it,
                    relative_residual: rr.sqrt() / bnorm,
                },
            ));
        }
        apply(&p, &mut ap);
        let pap: f64 = p.iter().zip(&ap).map(|(a, b)| a * b).sum();
        if pap <= 0.0 {
            break;
        }
        let alpha = rr / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let rr_new: f64 = r.iter().map(|v| v * v).sum();
        let beta = rr_new / rr;
        rr = rr_new;
        for i in 0..n {
            p[i] = r[i] + beta * p[i];
        }
    }
    // Recompute the true residual before giving up.
    apply(&x, &mut ap);
    let res = b.iter().zip(&ap).map(|(b, a)| (b - a) * (b - a)).sum::<f64>().sqrt() / bnorm;
    if res <= tol {
        return Ok((
            x,
            SolveStats {
                iterations: max_iter,
                relative_residual: res,
            },
        ));
    }
    Err(Error::NoConvergence {
        iterations: max_iter,
        residual: res,
    })
}

pub const CG_TOLERANCE: f64 = 1e-8;

/// Harmonic displacement of `mesh` under the uniform graph Laplacian with
/// `constraints` fixing the displacement of selected vertices to
/// `target − current`.
pub fn harmonic_deform(mesh: &TriMesh, constraints: &[(usize, Vec3)]) -> Result<(TriMesh, SolveStats)> {
    let n = mesh.vertices.len();
    let neighbors = mesh.vertex_neighbors();
    let mut fixed: Vec<Option<Vec3>> = vec![None; n];
    for &(v, target) in constraints {
        if v >= n {
            return Err(Error::invalid(format!("constraint on missing vertex {v}")));
        }
        fixed[v] = Some(target - mesh.vertices[v]);
    }
    let free: Vec<usize> = (0..n).filter(|&v| fixed[v].is_none()).collect();
    let mut slot = vec![usize::MAX; n];
    for (i, &v) in free.iter().enumerate() {
        slot[v] = i;
    }
    let apply = |x: &[f64], y: &mut [f64]| {
        for (i, &v) in free.iter().enumerate() {
            let mut acc = neighbors[v].len() as f64 * x[i];
            for &u in &neighbors[v] {
                if slot[u] != usize::MAX {
                    acc -= x[slot[u]];
                }
            }
            y[i] = acc;
        }
    };
    let mut out = mesh.clone();
    let mut stats = SolveStats::default();
    for axis in 0..3 {
        let b: Vec<f64> = free
            .iter()
            .map(|&v| neighbors[v].iter().filter_map(|&u| fixed[u].map(|d| d[axis])).sum())
            .collect();
        let (x, s) = conjugate_gradient(&apply, &b, CG_TOLERANCE, 10 * free.len().max(1))?;
        stats.iterations = stats.iterations.max(s.iterations);
        stats.relative_residual = stats.relative_residual.max(s.relative_residual);
        for (i, &v) in free.iter().enumerate() {
            out.vertices[v][axis] += x[i];
        }
    }
    for (v, d) in fixed.iter().enumerate() {
        if let Some(d) = d {
            out.vertices[v] += d;
        }
    }
    out.compute_normals();
    Ok((out, stats))
}

/// Moves every matched joint-loop vertex onto its nearest part-loop vertex
/// (loop metric) and propagates the displacement harmonically. Parts are
/// not touched.
pub fn poisson_blend(joint: &TriMesh, corrs: &[LoopCorrespondence]) -> Result<(TriMesh, SolveStats)> {
    let mut constraints = Vec::new();
    for c in corrs.iter().filter(|c| c.matched) {
        for &t in &c.joint_loop {
            let s = c.nearest_part_vertex(&joint.vertices[t], &joint.normals[t]);
            constraints.push((t, c.part_points[s]));
        }
    }
    harmonic_deform(joint, &constraints)
}

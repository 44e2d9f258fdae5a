use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::geom::Vec3;
use crate::meshkit::TriMesh;

pub const RETRIES: u64 = 8;

/// `‖p − q‖·(2 − n_p·n_q)`: distance penalized by normal disagreement.
pub fn loop_metric(p: &Vec3, np: &Vec3, q: &Vec3, nq: &Vec3) -> f64 {
    (p - q).norm() * (2.0 - np.dot(nq))
}

/// A part boundary loop and the matching closed vertex loop on the joint
/// mesh (empty when no match was found).
#[derive(Clone, Debug, PartialEq)]
pub struct LoopCorrespondence {
    /// Positions of the part loop, in loop order.
    pub part_points: Vec<Vec3>,
    pub part_normals: Vec<Vec3>,
    /// Joint-mesh vertex ids, following the part loop's direction.
    pub joint_loop: Vec<usize>,
    pub matched: bool,
}

impl LoopCorrespondence {
    /// Index of the part loop vertex closest to `q` under the loop metric.
    pub fn nearest_part_vertex(&self, q: &Vec3, nq: &Vec3) -> usize {
        argmin(self.part_points.len(), |i| {
            loop_metric(&self.part_points[i], &self.part_normals[i], q, nq)
        })
    }

    /// Unit direction pointing away from the part surface across the loop
    /// at part vertex `i`: loop tangent × surface normal.
    pub fn outward(&self, i: usize) -> Vec3 {
        let n = self.part_points.len();
        let tangent = self.part_points[(i + 1) % n] - self.part_points[(i + n - 1) % n];
        tangent
            .cross(&self.part_normals[i])
            .try_normalize(1e-300)
            .unwrap_or_else(Vec3::zeros)
    }
}

fn argmin(n: usize, f: impl Fn(usize) -> f64) -> usize {
    let mut best = (f64::INFINITY, 0);
    for i in 0..n {
        let d = f(i);
        if d < best.0 {
            best = (d, i);
        }
    }
    best.1
}

/// The longest simple cycle obtained by cutting a closed walk at repeated
/// vertices.
pub fn largest_subloop(walk: &[usize]) -> Vec<usize> {
    let mut stack: Vec<usize> = Vec::new();
    let mut best: Vec<usize> = Vec::new();
    for &v in walk {
        if let Some(pos) = stack.iter().position(|&u| u == v) {
            let cycle: Vec<usize> = stack.drain(pos..).collect();
            if cycle.len() > best.len() {
                best = cycle;
            }
        }
        stack.push(v);
    }
    if stack.len() > best.len() {
        best = stack;
    }
    best
}

/// One walk from part vertex `r`: follow the part loop and, for every part
/// vertex, step the joint vertex through edge neighbours while that lowers
/// the metric, finishing at `r` again. Succeeds if the joint walk ends
/// where it started.
fn walk(s: &[Vec3], sn: &[Vec3], joint: &TriMesh, neighbors: &[Vec<usize>], r: usize) -> Option<Vec<usize>> {
    let x = &joint.vertices;
    let xn = &joint.normals;
    let init = argmin(x.len(), |j| loop_metric(&s[r], &sn[r], &x[j], &xn[j]));
    let mut t = vec![init];
    let mut cur = init;
    for step in 1..=s.len() {
        let k = (r + step) % s.len();
        let d = |j: usize| loop_metric(&s[k], &sn[k], &x[j], &xn[j]);
        for _ in 0..x.len() {
            let mut best = (d(cur), cur);
            for &j in &neighbors[cur] {
                let dj = d(j);
                if dj < best.0 {
                    best = (dj, j);
                }
            }
            if best.1 == cur {
                break;
            }
            cur = best.1;
            t.push(cur);
        }
    }
    if t.len() > 1 && t.first() == t.last() {
        t.pop();
        let sub = largest_subloop(&t);
        (sub.len() >= 3).then_some(sub)
    } else {
        None
    }
}

/// Finds the joint-mesh loop matching a part boundary loop, retrying from
/// random starting vertices drawn with seeds `0..RETRIES`.
pub fn loop_correspondence(
    part_points: &[Vec3],
    part_normals: &[Vec3],
    joint: &TriMesh,
    neighbors: &[Vec<usize>],
) -> LoopCorrespondence {
    let mut out = LoopCorrespondence {
        part_points: part_points.to_vec(),
        part_normals: part_normals.to_vec(),
        joint_loop: Vec::new(),
        matched: false,
    };
    if part_points.len() < 3 || joint.vertices.is_empty() {
        return out;
    }
    for seed in 0..RETRIES {
        let r = ChaCha8Rng::seed_from_u64(seed).random_range(0..part_points.len());
        if let Some(t) = walk(part_points, part_normals, joint, neighbors, r) {
            out.joint_loop = t;
            out.matched = true;
            break;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::v3;

    #[test]
    fn metric_prefers_aligned_normals() {
        let p = Vec3::zeros();
        let n = v3(0., 0., 1.);
        assert_eq!(loop_metric(&p, &n, &v3(1., 0., 0.), &n), 1.0);
        assert_eq!(loop_metric(&p, &n, &v3(-1., 0., 0.), &-n), 3.0);
    }

    #[test]
    fn subloops() {
        assert_eq!(largest_subloop(&[1, 2, 3, 4, 2, 5]), vec![2, 3, 4]);
        assert_eq!(largest_subloop(&[1, 2, 1, 3, 4, 5, 6]), vec![1, 3, 4, 5, 6]);
        assert_eq!(largest_subloop(&[7, 8, 9]), vec![7, 8, 9]);
    }
}

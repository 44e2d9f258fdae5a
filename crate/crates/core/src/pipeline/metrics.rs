use kiddo::ImmutableKdTree;
use kiddo::SquaredEuclidean;

use crate::error::{Error, Result};
use crate::geom::Vec3;
use crate::meshkit::{sample_surface, OccupancyGrid, SampleMode, TriMesh};

/// Reported chamfer values are multiplied by this factor.
pub const CHAMFER_SCALE: f64 = 1e3;
/// Sampling seed shared by every chamfer evaluation.
pub const CHAMFER_SEED: u64 = 0x00C0_FFEE;

/// Nearest-neighbour index over a fixed point set.
pub struct NearestIndex {
    tree: ImmutableKdTree<f64, 3>,
}

impl NearestIndex {
    pub fn new(points: &[Vec3]) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::Empty("nearest-neighbour index"));
        }
        let entries: Vec<[f64; 3]> = points.iter().map(|p| [p.x, p.y, p.z]).collect();
        Ok(Self {
            tree: ImmutableKdTree::new_from_slice(&entries),
        })
    }

    /// Squared distance to the nearest indexed point.
    pub fn nearest_squared(&self, p: &Vec3) -> f64 {
        self.tree.nearest_one::<SquaredEuclidean>(&[p.x, p.y, p.z]).distance
    }

    pub fn nearest(&self, p: &Vec3) -> (usize, f64) {
        let n = self.tree.nearest_one::<SquaredEuclidean>(&[p.x, p.y, p.z]);
        (n.item as usize, n.distance.sqrt())
    }
}

fn one_way(from: &[Vec3], to: &NearestIndex, squared: bool) -> f64 {
    let sum: f64 = from
        .iter()
        .map(|p| {
            let d2 = to.nearest_squared(p);
            if squared {
                d2
            } else {
                d2.sqrt()
            }
        })
        .sum();
    sum / from.len() as f64
}

/// Symmetric chamfer distance between point sets: the mean of the two
/// one-way mean nearest-neighbour distances (squared or plain), times 10³.
pub fn chamfer_points(a: &[Vec3], b: &[Vec3], squared: bool) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Empty("chamfer input"));
    }
    let ia = NearestIndex::new(a)?;
    let ib = NearestIndex::new(b)?;
    Ok(0.5 * (one_way(a, &ib, squared) + one_way(b, &ia, squared)) * CHAMFER_SCALE)
}

/// Chamfer distance between two meshes from `n` uniform surface samples
/// each, drawn with [`CHAMFER_SEED`].
pub fn chamfer_meshes(a: &TriMesh, b: &TriMesh, n: usize, squared: bool) -> Result<f64> {
    if a.triangles.is_empty() || b.triangles.is_empty() {
        return Err(Error::Empty("chamfer input"));
    }
    let pa = sample_surface(a, n, SampleMode::Uniform, CHAMFER_SEED)?;
    let pb = sample_surface(b, n, SampleMode::Uniform, CHAMFER_SEED)?;
    chamfer_points(&pa.points, &pb.points, squared)
}

/// Intersection over union of two aligned grids; 1 when both are empty.
pub fn grid_iou(a: &OccupancyGrid, b: &OccupancyGrid) -> Result<f64> {
    let inter = a.intersection(b)?.count();
    let union = a.union(b)?.count();
    Ok(if union == 0 { 1.0 } else { inter as f64 / union as f64 })
}

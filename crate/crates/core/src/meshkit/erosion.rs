use crate::error::{Error, Result};
use crate::geom::{Polyline, SegmentSet};
use crate::meshkit::mesh::TriMesh;
use crate::meshkit::sampling::PointCloud;

/// Erosion radius as a fraction of the shape's bounding-box diameter.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ErosionConfig {
    pub tau: f64,
}

impl Default for ErosionConfig {
    fn default() -> Self {
        Self { tau: 0.05 }
    }
}

impl ErosionConfig {
    pub fn radius(&self, shape_diameter: f64) -> f64 {
        self.tau * shape_diameter
    }
}

/// Removes every triangle with a vertex closer than `tau * diameter` to the
/// segmentation boundary. Vertices are compacted; normals are kept from
/// the input mesh.
pub fn erode_part(
    part: &TriMesh,
    seg_boundary: &[Polyline],
    cfg: ErosionConfig,
    shape_diameter: f64,
) -> Result<TriMesh> {
    if cfg.tau < 0.0 {
        return Err(Error::invalid("erosion tau must be non-negative"));
    }
    let r = cfg.radius(shape_diameter);
    if r == 0.0 || seg_boundary.iter().all(|l| l.points.is_empty()) {
        return Ok(part.clone());
    }
    let set = SegmentSet::new(seg_boundary, r);
    let near: Vec<bool> = part.vertices.iter().map(|p| set.within(p, r)).collect();
    let keep: Vec<usize> = (0..part.triangles.len())
        .filter(|&f| part.triangles[f].iter().all(|&v| !near[v]))
        .collect();
    if keep.is_empty() {
        return Err(Error::FullyEroded);
    }
    Ok(part.submesh(&keep).0)
}

/// Point analogue of [`erode_part`].
pub fn erode_cloud(
    cloud: &PointCloud,
    seg_boundary: &[Polyline],
    cfg: ErosionConfig,
    shape_diameter: f64,
) -> Result<PointCloud> {
    let r = cfg.radius(shape_diameter);
    if r == 0.0 || seg_boundary.iter().all(|l| l.points.is_empty()) {
        return Ok(cloud.clone());
    }
    let set = SegmentSet::new(seg_boundary, r);
    let out = cloud.filter(|i| !set.within(&cloud.points[i], r));
    if out.is_empty() && !cloud.is_empty() {
        return Err(Error::FullyEroded);
    }
    Ok(out)
}

/// Exact distance of each point to the boundary polylines.
pub fn boundary_distances(points: &[crate::geom::Vec3], seg_boundary: &[Polyline]) -> Vec<f64> {
    let set = SegmentSet::new(seg_boundary, 1.0);
    points.iter().map(|p| set.distance(p)).collect()
}

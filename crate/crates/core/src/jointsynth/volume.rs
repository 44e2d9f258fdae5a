use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::encoders::near_joint_indices;
use crate::error::{Error, Result};
use crate::geom::{Polyline, SegmentSet, Vec3};
use crate::meshkit::{dilate, GridSpec, InsideTester, OccupancyGrid, PointCloud};

pub const DILATION_STEPS: usize = 5;

/// Shape cells whose centers stay at least `radius` from the segmentation
/// boundary: the voxelized interiors of the eroded parts.
pub fn eroded_interior(shape: &OccupancyGrid, seg_boundary: &[Polyline], radius: f64) -> OccupancyGrid {
    if radius <= 0.0 {
        return shape.clone();
    }
    let set = SegmentSet::new(seg_boundary, radius);
    let mut out = OccupancyGrid::empty(shape.spec);
    for idx in shape.iter_set() {
        if !set.within(&shape.spec.center_of(idx), radius) {
            out.set(idx, true);
        }
    }
    out
}

/// Shape interior minus eroded-part interiors, dilated `steps` times.
pub fn build_joint_volume(shape: &OccupancyGrid, eroded: &OccupancyGrid, steps: usize) -> Result<OccupancyGrid> {
    let removed = shape.difference(eroded)?;
    if removed.count() == 0 {
        return Err(Error::NoJointVolume);
    }
    Ok(dilate(&removed, steps))
}

/// Fractions of joint-volume, near-surface-outside and far-outside samples.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SampleFractions {
    pub joint: f64,
    pub near: f64,
    pub far: f64,
}

impl Default for SampleFractions {
    fn default() -> Self {
        Self {
            joint: 0.8,
            near: 0.1,
            far: 0.1,
        }
    }
}

impl SampleFractions {
    /// `(floor, floor, remainder)` counts for `n` samples.
    pub fn counts(&self, n: usize) -> [usize; 3] {
        let a = (self.joint * n as f64 + 1e-9).floor() as usize;
        let b = ((self.near * n as f64 + 1e-9).floor() as usize).min(n - a.min(n));
        [a.min(n), b, n - a.min(n) - b]
    }
}

/// Labeled occupancy samples; 1 means inside.
#[derive(Clone, Debug, Default, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct TrainingSampleSet {
    pub points: Vec<Vec3>,
    pub labels: Vec<f64>,
    /// Samples drawn from each of the three regions.
    pub counts: [usize; 3],
}

impl TrainingSampleSet {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// The first `n` samples of a seeded permutation.
    pub fn subset(&self, n: usize, seed: u64) -> (Vec<Vec3>, Vec<f64>) {
        let mut idx: Vec<usize> = (0..self.len()).collect();
        idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        idx.truncate(n);
        (
            idx.iter().map(|&i| self.points[i]).collect(),
            idx.iter().map(|&i| self.labels[i]).collect(),
        )
    }
}

fn point_in_cell(spec: &GridSpec, idx: usize, rng: &mut ChaCha8Rng) -> Vec3 {
    let c = spec.center_of(idx);
    let h = spec.cell * 0.5;
    c + Vec3::new(
        rng.random_range(-h..h),
        rng.random_range(-h..h),
        rng.random_range(-h..h),
    )
}

/// Draws a point accepted by `keep`, uniformly over `cells`.
fn rejection_sample(
    spec: &GridSpec,
    cells: &[usize],
    rng: &mut ChaCha8Rng,
    keep: impl Fn(&Vec3) -> bool,
    what: &'static str,
) -> Result<Vec3> {
    for _ in 0..10_000 {
        let p = point_in_cell(spec, cells[rng.random_range(0..cells.len())], rng);
        if keep(&p) {
            return Ok(p);
        }
    }
    Err(Error::Empty(what))
}

/// Dense samples in the joint volume labeled by exact containment, plus
/// outside samples near the surface (within two cells) and across the grid.
pub fn sample_training_points(
    shape: &InsideTester,
    shape_grid: &OccupancyGrid,
    joint: &OccupancyGrid,
    n: usize,
    fractions: SampleFractions,
    seed: u64,
) -> Result<TrainingSampleSet> {
    let spec = shape_grid.spec;
    if joint.spec != spec {
        return Err(Error::invalid("joint volume and shape grid are not aligned"));
    }
    let counts = fractions.counts(n);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = TrainingSampleSet {
        points: Vec::with_capacity(n),
        labels: Vec::with_capacity(n),
        counts,
    };
    if counts[0] > 0 {
        let cells: Vec<usize> = joint.iter_set().collect();
        if cells.is_empty() {
            return Err(Error::NoJointVolume);
        }
        for _ in 0..counts[0] {
            let p = point_in_cell(&spec, cells[rng.random_range(0..cells.len())], &mut rng);
            out.labels.push(if shape.contains(&p) { 1.0 } else { 0.0 });
            out.points.push(p);
        }
    }
    if counts[1] > 0 {
        let band: Vec<usize> = dilate(shape_grid, 2).difference(shape_grid)?.iter_set().collect();
        let band = if band.is_empty() {
            (0..spec.len()).collect()
        } else {
            band
        };
        for _ in 0..counts[1] {
            let p = rejection_sample(&spec, &band, &mut rng, |p| !shape.contains(p), "near-surface samples")?;
            out.points.push(p);
            out.labels.push(0.0);
        }
    }
    if counts[2] > 0 {
        let all: Vec<usize> = (0..spec.len()).collect();
        for _ in 0..counts[2] {
            let p = rejection_sample(&spec, &all, &mut rng, |p| !shape.contains(p), "outside samples")?;
            out.points.push(p);
            out.labels.push(0.0);
        }
    }
    Ok(out)
}

/// Part-surface points nearest the joint, with outward normals.
#[derive(Clone, Debug, Default, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct JointBoundarySet {
    pub points: Vec<Vec3>,
    pub normals: Vec<Vec3>,
    /// Part slot each point came from.
    pub part: Vec<usize>,
    /// Fewer than the requested number of points were available.
    pub truncated: bool,
}

impl JointBoundarySet {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Every `n`-th point starting at `k`.
    pub fn chunk(&self, k: usize, n: usize) -> JointBoundarySet {
        let idx: Vec<usize> = (k..self.len()).step_by(n.max(1)).collect();
        JointBoundarySet {
            points: idx.iter().map(|&i| self.points[i]).collect(),
            normals: idx.iter().map(|&i| self.normals[i]).collect(),
            part: idx.iter().map(|&i| self.part[i]).collect(),
            truncated: self.truncated,
        }
    }

    /// `p + λn` and `p − λn` probes.
    pub fn probes(&self, lambda: f64) -> (Vec<Vec3>, Vec<Vec3>) {
        let plus = self
            .points
            .iter()
            .zip(&self.normals)
            .map(|(p, n)| p + n * lambda)
            .collect();
        let minus = self
            .points
            .iter()
            .zip(&self.normals)
            .map(|(p, n)| p - n * lambda)
            .collect();
        (plus, minus)
    }
}

/// The `k` points over all parts with the smallest boundary distance.
/// `parts[i]` pairs a slot index, its cloud and per-point distances.
pub fn select_joint_boundary(parts: &[(usize, &PointCloud, &[f64])], k: usize) -> JointBoundarySet {
    let mut dist = Vec::new();
    let mut origin = Vec::new();
    for (pi, (_, cloud, d)) in parts.iter().enumerate() {
        for (i, &di) in d.iter().enumerate().take(cloud.len()) {
            dist.push(di);
            origin.push((pi, i));
        }
    }
    let chosen = near_joint_indices(&dist, k);
    let mut out = JointBoundarySet {
        truncated: dist.len() < k,
        ..Default::default()
    };
    for c in chosen {
        let (pi, i) = origin[c];
        let (slot, cloud, _) = parts[pi];
        out.points.push(cloud.points[i]);
        out.normals
            .push(cloud.normals[i].try_normalize(0.0).unwrap_or(Vec3::z()));
        out.part.push(slot);
    }
    out
}

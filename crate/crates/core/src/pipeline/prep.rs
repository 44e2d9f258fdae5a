use std::path::Path;

use log::info;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::align::{split_counts, AlignPart, AlignSample, CategoryConfig};
use crate::encoders::near_joint_indices;
use crate::error::{Error, Result, StageContext};
use crate::geom::{Polyline, Similarity, Vec3};
use crate::jointsynth::{
    build_joint_volume, eroded_interior, sample_training_points, select_joint_boundary, JointBoundarySet, JointExample,
    JointPartInput, SampleFractions, TrainingSampleSet, DILATION_STEPS,
};
use crate::meshkit::obj::write_text;
use crate::meshkit::{
    boundary_distances, erode_cloud, normalizing_transform, sample_surface, ErosionConfig, GridSpec, InsideTester,
    OccupancyGrid, PointCloud, SampleMode, TriMesh,
};
use crate::pipeline::config::PipelineConfig;
use crate::pipeline::synth::{DatasetManifest, LabeledShape};
use crate::refine::RefinePart;

pub const PREP_FILE: &str = "prep.json";
pub const SHAPE_GRID_FILE: &str = "shape.occ";
pub const JOINT_GRID_FILE: &str = "joint.occ";
/// Empty cells kept around a shape in occupancy grids.
pub const GRID_MARGIN: usize = 2;

/// Seed for one stream of one part of one shape.
pub fn part_seed(seed: u64, shape: usize, slot: usize, stream: u64) -> u64 {
    seed.wrapping_mul(0x100_0000_01b3)
        ^ (shape as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)
        ^ (slot as u64 + 1).wrapping_mul(0xC2B2_AE3D_27D4_EB4F)
        ^ stream.wrapping_mul(0x1656_67B1_9E37_79F9)
}

/// An eroded part sampled in its source frame.
#[derive(Clone, Debug)]
pub struct PartPrep {
    pub slot: usize,
    pub eroded: PointCloud,
    /// Distance of every eroded sample to the segmentation boundary.
    pub dist: Vec<f64>,
    /// Source frame to the part's normalized frame.
    pub normalize: Similarity,
}

impl PartPrep {
    pub fn new(
        slot: usize,
        mesh: &TriMesh,
        seams: &[Polyline],
        tau: f64,
        diameter: f64,
        surface_points: usize,
        seed: u64,
    ) -> Result<Self> {
        let cloud = sample_surface(mesh, surface_points, SampleMode::Uniform, seed)?;
        let eroded = erode_cloud(&cloud, seams, ErosionConfig { tau }, diameter)?;
        let dist = boundary_distances(&eroded.points, seams);
        let normalize = normalizing_transform(&eroded.points)?;
        Ok(Self {
            slot,
            eroded,
            dist,
            normalize,
        })
    }

    /// Ground-truth placement of the normalized part.
    pub fn truth(&self) -> Similarity {
        self.normalize.inverse()
    }

    /// `n` normalized points.
    pub fn normalized_points(&self, n: usize, seed: u64) -> Result<Vec<Vec3>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Ok(self.eroded.resample(n, &mut rng)?.transformed(&self.normalize).points)
    }

    /// The part in its normalized frame for test-time refinement.
    pub fn refine_part(&self) -> RefinePart {
        let c = self.eroded.transformed(&self.normalize);
        RefinePart {
            points: c.points,
            normals: c.normals,
            dist: self.dist.iter().map(|d| d * self.normalize.s).collect(),
        }
    }

    /// Joint encoder inputs once the normalized part is placed by
    /// `placement`.
    pub fn joint_input(&self, placement: &Similarity, full: usize, near: usize, seed: u64) -> Result<JointPartInput> {
        let xf = self.normalize.then(placement);
        let placed = self.eroded.transformed(&xf);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cloud = placed.resample(full, &mut rng)?.points;
        let idx = near_joint_indices(&self.dist, near);
        if idx.is_empty() {
            return Err(Error::Empty("near-joint points"));
        }
        let near_pts = (0..near).map(|i| placed.points[idx[i % idx.len()]]).collect();
        Ok(JointPartInput { cloud, near: near_pts })
    }

    /// The eroded cloud and distances after placement (distances scale).
    pub fn placed(&self, placement: &Similarity) -> (PointCloud, Vec<f64>) {
        let xf = self.normalize.then(placement);
        (
            self.eroded.transformed(&xf),
            self.dist.iter().map(|d| d * xf.s).collect(),
        )
    }
}

/// Training data derived from one labeled shape.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PreparedShape {
    pub id: String,
    pub align: Vec<Option<PreparedAlignPart>>,
    pub joint_inputs: Vec<Option<PreparedJointInput>>,
    pub samples: TrainingSampleSet,
    pub boundary: JointBoundarySet,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PreparedAlignPart {
    pub cloud: Vec<Vec3>,
    pub emd_points: Vec<Vec3>,
    pub truth: Similarity,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PreparedJointInput {
    pub cloud: Vec<Vec3>,
    pub near: Vec<Vec3>,
}

/// A prepared shape together with its occupancy grids.
#[derive(Clone, Debug)]
pub struct PreparedData {
    pub shape: PreparedShape,
    pub shape_grid: OccupancyGrid,
    pub joint_grid: OccupancyGrid,
}

impl PreparedData {
    pub fn align_sample(&self) -> AlignSample {
        AlignSample {
            parts: self
                .shape
                .align
                .iter()
                .map(|p| {
                    p.as_ref().map(|p| AlignPart {
                        cloud: p.cloud.clone(),
                        emd_points: p.emd_points.clone(),
                        truth: p.truth,
                    })
                })
                .collect(),
        }
    }

    pub fn joint_example(&self) -> JointExample {
        JointExample {
            inputs: self
                .shape
                .joint_inputs
                .iter()
                .map(|p| {
                    p.as_ref().map(|p| JointPartInput {
                        cloud: p.cloud.clone(),
                        near: p.near.clone(),
                    })
                })
                .collect(),
            samples: self.shape.samples.clone(),
            boundary: self.shape.boundary.clone(),
            joint: self.joint_grid.clone(),
            shape: self.shape_grid.clone(),
        }
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        let json = serde_json::to_string(&self.shape).map_err(|e| Error::invalid(e.to_string()))?;
        write_text(&dir.join(PREP_FILE), &json)?;
        self.shape_grid.save(&dir.join(SHAPE_GRID_FILE))?;
        self.joint_grid.save(&dir.join(JOINT_GRID_FILE))
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join(PREP_FILE);
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let shape = serde_json::from_str(&text).map_err(|e| Error::Parse {
            path: path.display().to_string(),
            line: e.line(),
            msg: e.to_string(),
        })?;
        Ok(Self {
            shape,
            shape_grid: OccupancyGrid::load(&dir.join(SHAPE_GRID_FILE))?,
            joint_grid: OccupancyGrid::load(&dir.join(JOINT_GRID_FILE))?,
        })
    }
}

/// Occupancy grid placement for a shape: cubic cells around its bounding
/// box with a small empty margin.
pub fn shape_grid_spec(shape: &LabeledShape, res: usize) -> GridSpec {
    GridSpec::cube(res, &shape.bbox(), GRID_MARGIN)
}

/// Erodes, samples and voxelizes one shape (`index` selects its seeds).
pub fn prepare_shape(
    shape: &LabeledShape,
    index: usize,
    category: &CategoryConfig,
    cfg: &PipelineConfig,
) -> Result<PreparedData> {
    let [align_cfg, full_cfg, near_cfg] = cfg.encoders()?;
    let align_points = align_cfg.points;
    let diameter = shape.bbox().diagonal();
    let mut parts: Vec<Option<PartPrep>> = vec![None; category.slots()];
    for p in &shape.parts {
        let slot = category
            .slot_of(&p.label)
            .ok_or_else(|| Error::invalid(format!("shape {} has unknown part label `{}`", shape.id, p.label)))?;
        let prep = PartPrep::new(
            slot,
            &p.mesh,
            &shape.seams,
            category.tau,
            diameter,
            cfg.surface_points,
            part_seed(cfg.seed, index, slot, 0),
        )
        .stage("erode")?;
        parts[slot] = Some(prep);
    }
    let present = parts.iter().filter(|p| p.is_some()).count();
    let mut emd_counts = split_counts(cfg.emd_points, present).into_iter();
    let mut align = Vec::new();
    let mut joint_inputs = Vec::new();
    for part in &parts {
        let Some(p) = part else {
            align.push(None);
            joint_inputs.push(None);
            continue;
        };
        let s = p.slot;
        align.push(Some(PreparedAlignPart {
            cloud: p.normalized_points(align_points, part_seed(cfg.seed, index, s, 1))?,
            emd_points: p.normalized_points(emd_counts.next().unwrap_or(0), part_seed(cfg.seed, index, s, 2))?,
            truth: p.truth(),
        }));
        let j = p.joint_input(
            &p.truth(),
            full_cfg.points,
            near_cfg.points,
            part_seed(cfg.seed, index, s, 3),
        )?;
        joint_inputs.push(Some(PreparedJointInput {
            cloud: j.cloud,
            near: j.near,
        }));
    }
    let placed: Vec<(usize, PointCloud, Vec<f64>)> = parts
        .iter()
        .flatten()
        .map(|p| {
            let (c, d) = p.placed(&p.truth());
            (p.slot, c, d)
        })
        .collect();
    let refs: Vec<(usize, &PointCloud, &[f64])> = placed.iter().map(|(s, c, d)| (*s, c, d.as_slice())).collect();
    let boundary = select_joint_boundary(&refs, cfg.boundary_points);

    let spec = shape_grid_spec(shape, category.train_res);
    let meshes: Vec<&TriMesh> = shape.parts.iter().map(|p| &p.mesh).collect();
    let tester = InsideTester::new(&meshes);
    let shape_grid = tester.voxelize(&spec);
    let interior = eroded_interior(&shape_grid, &shape.seams, category.tau * diameter);
    let joint_grid = build_joint_volume(&shape_grid, &interior, DILATION_STEPS).stage("joint volume")?;
    let samples = sample_training_points(
        &tester,
        &shape_grid,
        &joint_grid,
        cfg.occupancy_samples,
        SampleFractions::default(),
        part_seed(cfg.seed, index, usize::MAX - 1, 4),
    )
    .stage("occupancy samples")?;
    info!(
        "prepared {}: {} parts, joint volume {} cells, {} samples",
        shape.id,
        present,
        joint_grid.count(),
        samples.len()
    );
    Ok(PreparedData {
        shape: PreparedShape {
            id: shape.id.clone(),
            align,
            joint_inputs,
            samples,
            boundary,
        },
        shape_grid,
        joint_grid,
    })
}

/// Prepares every shape of a generated dataset into `out/<id>/`.
pub fn preprocess_dataset(data: &Path, out: &Path, cfg: &PipelineConfig) -> Result<Vec<PreparedData>> {
    let manifest = DatasetManifest::load(data)?;
    let category = cfg.category_config()?;
    if manifest.category != category.name {
        return Err(Error::Config(format!(
            "dataset category `{}` does not match configured `{}`",
            manifest.category, category.name
        )));
    }
    let mut all = Vec::new();
    for (i, dir) in manifest.shape_dirs(data).iter().enumerate() {
        let shape = LabeledShape::load(dir)?;
        let prep = prepare_shape(&shape, i, &category, cfg)?;
        prep.save(&out.join(&shape.id))?;
        all.push(prep);
    }
    let index = serde_json::json!({
        "category": category.name,
        "shapes": manifest.shapes,
        "config_hash": cfg.hash(),
    });
    write_text(
        &out.join(PREP_FILE),
        &(serde_json::to_string_pretty(&index).expect("json") + "\n"),
    )?;
    Ok(all)
}

/// Loads everything written by [`preprocess_dataset`].
pub fn load_prepared(dir: &Path) -> Result<Vec<PreparedData>> {
    let path = dir.join(PREP_FILE);
    let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let index: serde_json::Value = serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: path.display().to_string(),
        line: e.line(),
        msg: e.to_string(),
    })?;
    let shapes = index["shapes"]
        .as_array()
        .ok_or_else(|| Error::invalid(format!("{} lists no shapes", path.display())))?;
    let out = shapes
        .iter()
        .filter_map(|s| s.as_str())
        .map(|s| PreparedData::load(&dir.join(s)))
        .collect::<Result<Vec<_>>>()?;
    if out.is_empty() {
        return Err(Error::Empty("prepared dataset"));
    }
    Ok(out)
}

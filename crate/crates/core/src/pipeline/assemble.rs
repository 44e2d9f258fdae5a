use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use log::{info, warn};
use serde::{Deserialize, Serialize};

use crate::align::{AlignNet, CategoryConfig};
use crate::error::{Error, Result, StageContext};
use crate::geom::{Aabb, Similarity, Vec3};
use crate::jointsynth::{JointModel, JointPartInput};
use crate::meshkit::obj::{obj_string, write_text};
use crate::meshkit::{boundary_loops, erode_part, ErosionConfig, GridSpec, TriMesh};
use crate::pipeline::config::PipelineConfig;
use crate::pipeline::metrics::NearestIndex;
use crate::pipeline::models::{
    attach_align, attach_joint, load_checkpoint, require_file, sha256_hex, KIND_ALIGN, KIND_JOINT,
};
use crate::pipeline::prep::{part_seed, PartPrep, GRID_MARGIN};
use crate::pipeline::synth::LabeledShape;
use crate::refine::{evaluate_h, refine, CodedDecoder, RefinePart};
use crate::surfacing::{marching_cubes, stitch, ScalarField, StitchResult, ISO};
use crate::Params;

pub const MANIFEST_VERSION: u32 = 1;

/// One input part: a shape directory and the label of a part in it.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartSpec {
    pub shape: PathBuf,
    pub label: String,
}

impl FromStr for PartSpec {
    type Err = Error;

    /// Parses `<shape_dir>:<label>`.
    fn from_str(s: &str) -> Result<Self> {
        let (dir, label) = s
            .rsplit_once(':')
            .filter(|(d, l)| !d.is_empty() && !l.is_empty())
            .ok_or_else(|| Error::invalid(format!("part spec `{s}` is not <shape_dir>:<label>")))?;
        Ok(Self {
            shape: PathBuf::from(dir),
            label: label.to_string(),
        })
    }
}

/// Trained models used by assembly.
pub struct Models {
    pub align_params: Params,
    pub align: AlignNet,
    pub joint_params: Params,
    pub joint: JointModel,
    pub align_sha256: String,
    pub joint_sha256: String,
}

impl Models {
    pub fn load(cfg: &PipelineConfig, align: &Path, joint: &Path) -> Result<Self> {
        require_file(align, "align checkpoint")?;
        require_file(joint, "joint checkpoint")?;
        let (a, align_sha256) = load_checkpoint(align, KIND_ALIGN, cfg)?;
        let (j, joint_sha256) = load_checkpoint(joint, KIND_JOINT, cfg)?;
        Ok(Self {
            align: attach_align(&a.params, cfg)?,
            align_params: a.params,
            joint: attach_joint(&j.params, cfg)?,
            joint_params: j.params,
            align_sha256,
            joint_sha256,
        })
    }

    /// Loads the checkpoints named in `cfg`.
    pub fn from_config(cfg: &PipelineConfig) -> Result<Self> {
        Self::load(cfg, Path::new(&cfg.align_checkpoint), Path::new(&cfg.joint_checkpoint))
    }
}

/// A part taken from a loaded shape.
pub struct InputPart<'a> {
    pub shape: &'a LabeledShape,
    pub label: String,
}

struct Prepared {
    slot: usize,
    prep: PartPrep,
    /// Eroded mesh in the source frame.
    eroded: TriMesh,
}

/// Everything produced by one assembly.
pub struct Assembly {
    /// Normalized-to-assembled placement of every input part.
    pub initial: Vec<Similarity>,
    pub refined: Vec<Similarity>,
    pub h: Vec<f64>,
    /// Placed parts plus the raw joint before test-time optimization.
    pub before: TriMesh,
    /// Placed parts plus the raw joint after test-time optimization.
    pub after_refine: TriMesh,
    pub stitched: StitchResult,
    pub slots: Vec<usize>,
    pub timings: BTreeMap<String, f64>,
}

fn union(meshes: &[TriMesh]) -> TriMesh {
    let mut out = TriMesh::default();
    for m in meshes {
        out.append(m);
    }
    out
}

fn placed_meshes(parts: &[Prepared], xf: &[Similarity]) -> Vec<TriMesh> {
    parts
        .iter()
        .zip(xf)
        .map(|(p, x)| p.eroded.transformed(&p.prep.normalize.then(x)))
        .collect()
}

/// Decoder field on a grid around the placed parts, kept only within
/// `radius` of the parts' open boundary loops and zero elsewhere.
fn masked_field(
    meshes: &[TriMesh],
    decoder: &CodedDecoder,
    params: &Params,
    res: usize,
    radius: f64,
) -> Result<ScalarField> {
    let bbox = meshes.iter().fold(Aabb::empty(), |b, m| b.union(&m.used_bbox()));
    let spec = GridSpec::cube(res, &bbox, GRID_MARGIN);
    let mut rim = Vec::new();
    for m in meshes {
        for l in boundary_loops(m)? {
            rim.extend(l.vertex_ids.iter().map(|&v| m.vertices[v]));
        }
    }
    let mut values = vec![0.0; spec.len()];
    if rim.is_empty() {
        return Ok(ScalarField { spec, values });
    }
    let index = NearestIndex::new(&rim)?;
    let r2 = radius * radius;
    let cells: Vec<usize> = (0..spec.len())
        .filter(|&i| index.nearest_squared(&spec.center_of(i)) <= r2)
        .collect();
    let points: Vec<Vec3> = cells.iter().map(|&i| spec.center_of(i)).collect();
    let f = decoder.decoder.eval(params, &decoder.code, &points)?;
    for (&c, v) in cells.iter().zip(f) {
        values[c] = v;
    }
    Ok(ScalarField { spec, values })
}

fn timed<T>(timings: &mut BTreeMap<String, f64>, name: &str, f: impl FnOnce() -> Result<T>) -> Result<T> {
    let start = Instant::now();
    let out = f();
    timings.insert(name.to_string(), start.elapsed().as_secs_f64());
    out
}

/// Runs the full assembly on parts of already loaded shapes. Each part
/// is eroded with its own shape's segmentation boundary.
pub fn assemble_parts(
    cfg: &PipelineConfig,
    models: &Models,
    inputs: &[InputPart],
    run_refine: bool,
) -> Result<Assembly> {
    let category: CategoryConfig = cfg.category_config()?;
    let [align_cfg, full_cfg, near_cfg] = cfg.encoders()?;
    let mut timings = BTreeMap::new();
    if inputs.is_empty() {
        return Err(Error::Empty("assembly parts"));
    }
    let parts = timed(&mut timings, "erode", || {
        let mut seen = vec![false; category.slots()];
        let mut parts = Vec::new();
        for ip in inputs {
            let slot = category
                .slot_of(&ip.label)
                .ok_or_else(|| Error::invalid(format!("unknown part label `{}`", ip.label)))?;
            if std::mem::replace(&mut seen[slot], true) {
                return Err(Error::invalid(format!("part label `{}` given twice", ip.label)));
            }
            let part = ip
                .shape
                .part(&ip.label)
                .ok_or_else(|| Error::invalid(format!("shape {} has no part `{}`", ip.shape.id, ip.label)))?;
            let diameter = ip.shape.bbox().diagonal();
            let prep = PartPrep::new(
                slot,
                &part.mesh,
                &ip.shape.seams,
                cfg.tau,
                diameter,
                cfg.surface_points,
                part_seed(cfg.seed, 0, slot, 0),
            )?;
            let eroded = erode_part(&part.mesh, &ip.shape.seams, ErosionConfig { tau: cfg.tau }, diameter)?;
            parts.push(Prepared { slot, prep, eroded });
        }
        Ok(parts)
    })
    .stage("erode")?;
    let slots: Vec<usize> = parts.iter().map(|p| p.slot).collect();

    let initial = timed(&mut timings, "align", || {
        let mut clouds: Vec<Option<Vec<Vec3>>> = vec![None; category.slots()];
        for p in &parts {
            clouds[p.slot] = Some(
                p.prep
                    .normalized_points(align_cfg.points, part_seed(cfg.seed, 0, p.slot, 1))?,
            );
        }
        let refs: Vec<Option<&[Vec3]>> = clouds.iter().map(|c| c.as_deref()).collect();
        let xf = models.align.predict(&models.align_params, &refs)?;
        Ok(parts.iter().map(|p| xf[p.slot]).collect::<Vec<_>>())
    })
    .stage("align")?;

    let code = timed(&mut timings, "encode", || {
        let mut enc: Vec<Option<JointPartInput>> = vec![None; category.slots()];
        for (p, x) in parts.iter().zip(&initial) {
            enc[p.slot] =
                Some(
                    p.prep
                        .joint_input(x, full_cfg.points, near_cfg.points, part_seed(cfg.seed, 0, p.slot, 3))?,
                );
        }
        models.joint.code_values(&models.joint_params, &enc)
    })
    .stage("encode joint")?;

    let decoder = CodedDecoder {
        decoder: &models.joint.decoder,
        code,
    };
    let refine_parts: Vec<RefinePart> = parts.iter().map(|p| p.prep.refine_part()).collect();
    let rcfg = cfg.refine();
    let mask = |meshes: &[TriMesh]| {
        let d = meshes
            .iter()
            .fold(Aabb::empty(), |b, m| b.union(&m.used_bbox()))
            .diagonal();
        cfg.mask_radius * cfg.tau * d
    };

    let before = timed(&mut timings, "field_before", || {
        let meshes = placed_meshes(&parts, &initial);
        let field = masked_field(&meshes, &decoder, &models.joint_params, cfg.test_res, mask(&meshes))?;
        let mut m = union(&meshes);
        m.append(&marching_cubes(&field, ISO));
        Ok(m)
    })
    .stage("evaluate field")?;

    let mut params = models.joint_params.clone();
    let (refined, h) = timed(&mut timings, "refine", || {
        if run_refine && rcfg.iterations > 0 {
            let r = refine(&mut params, &["dec/"], &decoder, &refine_parts, &initial, &rcfg)?;
            info!(
                "refine: h {:.5} -> {:.5}",
                r.h.first().copied().unwrap_or(f64::NAN),
                r.h.last().copied().unwrap_or(f64::NAN)
            );
            Ok((r.transforms, r.h))
        } else {
            let h = evaluate_h(&params, &decoder, &refine_parts, &initial, &rcfg)?;
            Ok((initial.clone(), vec![h]))
        }
    })
    .stage("refine")?;

    let meshes = placed_meshes(&parts, &refined);
    let field = timed(&mut timings, "field_after", || {
        masked_field(&meshes, &decoder, &params, cfg.test_res, mask(&meshes))
    })
    .stage("evaluate field")?;
    let after_refine = {
        let mut m = union(&meshes);
        m.append(&marching_cubes(&field, ISO));
        m
    };
    let stitched = timed(&mut timings, "stitch", || stitch(&meshes, &field)).stage("stitch")?;
    if stitched.flags.fallback() {
        warn!("stitch fell back to a plain union: {:?}", stitched.flags);
    }
    Ok(Assembly {
        initial,
        refined,
        h,
        before,
        after_refine,
        stitched,
        slots,
        timings,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckpointRef {
    pub path: PathBuf,
    pub sha256: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StitchSummary {
    pub joint_empty: bool,
    pub all_loops_failed: bool,
    pub failed_loops: usize,
    pub cg_iterations: usize,
    pub loop_gap: f64,
}

/// Record of one `assemble` run, sufficient to replay it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub version: u32,
    pub config: PipelineConfig,
    pub config_hash: String,
    pub seed: u64,
    pub parts: Vec<PartSpec>,
    pub refine: bool,
    pub align_checkpoint: CheckpointRef,
    pub joint_checkpoint: CheckpointRef,
    pub transforms_initial: Vec<Similarity>,
    pub transforms_refined: Vec<Similarity>,
    pub h: Vec<f64>,
    pub stitch: StitchSummary,
    pub timings: BTreeMap<String, f64>,
    pub output: PathBuf,
    pub output_sha256: String,
}

impl RunManifest {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Parse {
            path: path.display().to_string(),
            line: e.line(),
            msg: e.to_string(),
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_text(
            path,
            &(serde_json::to_string_pretty(self).expect("manifest serializes") + "\n"),
        )
    }
}

/// Request for the `assemble` command.
#[derive(Clone, Debug)]
pub struct AssembleRequest {
    pub config: PipelineConfig,
    pub parts: Vec<PartSpec>,
    pub refine: bool,
    pub output: PathBuf,
    /// Manifest path; defaults to the output with a `.json` extension.
    pub manifest: Option<PathBuf>,
}

impl AssembleRequest {
    /// Rebuilds the request recorded in a manifest. Checkpoints must
    /// still hash to the recorded values.
    pub fn replay(manifest: &RunManifest, output: PathBuf) -> Result<Self> {
        if manifest.config.hash() != manifest.config_hash {
            return Err(Error::Config("manifest config does not match its hash".into()));
        }
        for r in [&manifest.align_checkpoint, &manifest.joint_checkpoint] {
            require_file(&r.path, "checkpoint")?;
            let sha = crate::pipeline::models::file_sha256(&r.path)?;
            if sha != r.sha256 {
                return Err(Error::Checkpoint(format!(
                    "{} changed since the recorded run",
                    r.path.display()
                )));
            }
        }
        let mut config = manifest.config.clone();
        config.align_checkpoint = manifest.align_checkpoint.path.display().to_string();
        config.joint_checkpoint = manifest.joint_checkpoint.path.display().to_string();
        Ok(Self {
            config,
            parts: manifest.parts.clone(),
            refine: manifest.refine,
            output,
            manifest: None,
        })
    }

    pub fn manifest_path(&self) -> PathBuf {
        self.manifest
            .clone()
            .unwrap_or_else(|| self.output.with_extension("json"))
    }
}

/// Loads shapes and checkpoints, assembles, and writes the OBJ and its
/// manifest.
pub fn run_assemble(req: &AssembleRequest) -> Result<RunManifest> {
    let cfg = &req.config;
    let align_path = PathBuf::from(&cfg.align_checkpoint);
    let joint_path = PathBuf::from(&cfg.joint_checkpoint);
    require_file(&align_path, "align checkpoint")?;
    require_file(&joint_path, "joint checkpoint")?;
    if req.parts.is_empty() {
        return Err(Error::Empty("assembly parts"));
    }
    let start = Instant::now();
    let models = Models::load(cfg, &align_path, &joint_path).stage("load checkpoints")?;
    let mut shapes: Vec<(PathBuf, LabeledShape)> = Vec::new();
    for p in &req.parts {
        if !shapes.iter().any(|(d, _)| d == &p.shape) {
            shapes.push((p.shape.clone(), LabeledShape::load(&p.shape).stage("load parts")?));
        }
    }
    let inputs: Vec<InputPart> = req
        .parts
        .iter()
        .map(|p| InputPart {
            shape: &shapes.iter().find(|(d, _)| d == &p.shape).expect("loaded").1,
            label: p.label.clone(),
        })
        .collect();
    let asm = assemble_parts(cfg, &models, &inputs, req.refine)?;
    let obj = obj_string(&[("", &asm.stitched.mesh)]);
    write_text(&req.output, &obj).stage("write output")?;
    let mut timings = asm.timings.clone();
    timings.insert("total".into(), start.elapsed().as_secs_f64());
    let manifest = RunManifest {
        version: MANIFEST_VERSION,
        config: cfg.clone(),
        config_hash: cfg.hash(),
        seed: cfg.seed,
        parts: req.parts.clone(),
        refine: req.refine,
        align_checkpoint: CheckpointRef {
            path: align_path,
            sha256: models.align_sha256.clone(),
        },
        joint_checkpoint: CheckpointRef {
            path: joint_path,
            sha256: models.joint_sha256.clone(),
        },
        transforms_initial: asm.initial.clone(),
        transforms_refined: asm.refined.clone(),
        h: asm.h.clone(),
        stitch: StitchSummary {
            joint_empty: asm.stitched.flags.joint_empty,
            all_loops_failed: asm.stitched.flags.all_loops_failed,
            failed_loops: asm.stitched.flags.failed_loops,
            cg_iterations: asm.stitched.solve.iterations,
            loop_gap: asm.stitched.loop_gap(),
        },
        timings,
        output: req.output.clone(),
        output_sha256: sha256_hex(obj.as_bytes()),
    };
    manifest.save(&req.manifest_path())?;
    info!("wrote {} and {}", req.output.display(), req.manifest_path().display());
    Ok(manifest)
}

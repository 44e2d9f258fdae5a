use std::fmt::Write as _;
use std::path::Path;

use log::info;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, StageContext};
use crate::meshkit::obj::write_text;
use crate::pipeline::assemble::{assemble_parts, InputPart, Models};
use crate::pipeline::config::PipelineConfig;
use crate::pipeline::metrics::chamfer_meshes;
use crate::pipeline::perturb::{perturb_shape, PerturbConfig, Perturbation};
use crate::pipeline::synth::{DatasetManifest, LabeledShape};

/// Row labels of the stage table, in pipeline order.
pub const STAGES: [&str; 3] = ["before refinement", "after refinement", "after blending"];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShapeEval {
    pub id: String,
    /// Chamfer ×10³ per stage, in [`STAGES`] order.
    pub chamfer: [f64; 3],
    pub h_initial: f64,
    pub h_final: f64,
    pub stitch_fallback: bool,
    pub perturbation: serde_json::Value,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageRow {
    pub stage: String,
    pub mean_chamfer: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub category: String,
    pub perturbation: Perturbation,
    pub config_hash: String,
    pub squared_chamfer: bool,
    pub samples: usize,
    pub rows: Vec<StageRow>,
    pub shapes: Vec<ShapeEval>,
}

impl EvalReport {
    pub fn mean(&self, stage: usize) -> f64 {
        self.rows[stage].mean_chamfer
    }

    pub fn table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{} shapes, perturbation {:?}, chamfer x1e3 ({})",
            self.shapes.len(),
            self.perturbation,
            if self.squared_chamfer { "squared" } else { "absolute" }
        );
        let width = STAGES.iter().map(|s| s.len()).max().unwrap_or(0);
        for r in &self.rows {
            let _ = writeln!(out, "{:<width$}  {:>10.4}", r.stage, r.mean_chamfer);
        }
        out
    }

    pub fn save(&self, json: &Path) -> Result<()> {
        write_text(
            json,
            &(serde_json::to_string_pretty(self).expect("report serializes") + "\n"),
        )?;
        write_text(&json.with_extension("txt"), &self.table())
    }
}

/// Seed of the perturbation applied to shape `i`.
pub fn perturb_seed(seed: u64, i: usize) -> u64 {
    seed.wrapping_add(0x5EED) ^ (i as u64 + 1).wrapping_mul(0xD6E8_FEB8_6659_FD93)
}

/// Self-assembles every shape of a dataset (all parts from that shape)
/// and compares each stage with the ground-truth shape.
pub fn evaluate_suite(
    cfg: &PipelineConfig,
    models: &Models,
    data: &Path,
    perturbation: Perturbation,
    limit: Option<usize>,
) -> Result<EvalReport> {
    let manifest = DatasetManifest::load(data)?;
    let mut dirs = manifest.shape_dirs(data);
    if let Some(n) = limit {
        dirs.truncate(n);
    }
    if dirs.is_empty() {
        return Err(Error::Empty("evaluation set"));
    }
    let pcfg = PerturbConfig::from_pipeline(cfg);
    let mut shapes = Vec::new();
    for (i, dir) in dirs.iter().enumerate() {
        let source = LabeledShape::load(dir).stage("load shape")?;
        let (shape, record) = perturb_shape(&source, perturbation, &pcfg, perturb_seed(cfg.seed, i));
        let inputs: Vec<InputPart> = shape
            .parts
            .iter()
            .map(|p| InputPart {
                shape: &shape,
                label: p.label.clone(),
            })
            .collect();
        let asm = assemble_parts(cfg, models, &inputs, true)?;
        let truth = shape.mesh();
        let mut chamfer = [0.0; 3];
        for (c, m) in chamfer
            .iter_mut()
            .zip([&asm.before, &asm.after_refine, &asm.stitched.mesh])
        {
            *c = chamfer_meshes(m, &truth, cfg.chamfer_samples, cfg.chamfer_squared).stage("chamfer")?;
        }
        info!(
            "{}: chamfer {:.4} / {:.4} / {:.4}",
            shape.id, chamfer[0], chamfer[1], chamfer[2]
        );
        shapes.push(ShapeEval {
            id: shape.id.clone(),
            chamfer,
            h_initial: asm.h.first().copied().unwrap_or(f64::NAN),
            h_final: asm.h.last().copied().unwrap_or(f64::NAN),
            stitch_fallback: asm.stitched.flags.fallback(),
            perturbation: record,
        });
    }
    let rows = STAGES
        .iter()
        .enumerate()
        .map(|(k, s)| StageRow {
            stage: s.to_string(),
            mean_chamfer: shapes.iter().map(|e| e.chamfer[k]).sum::<f64>() / shapes.len() as f64,
        })
        .collect();
    Ok(EvalReport {
        category: manifest.category,
        perturbation,
        config_hash: cfg.hash(),
        squared_chamfer: cfg.chamfer_squared,
        samples: cfg.chamfer_samples,
        rows,
        shapes,
    })
}

use std::path::{Path, PathBuf};
use std::time::Instant;

use log::info;
use serde_json::json;

use crate::align::{evaluate_alignment, train_alignment, AlignSample};
use crate::error::{Result, StageContext};
use crate::jointsynth::{joint_iou, pretrain_encoders, train_joint, JointExample, JointModel};
use crate::meshkit::obj::write_text;
use crate::pipeline::config::PipelineConfig;
use crate::pipeline::models::{
    add_decoder, load_checkpoint, new_align, new_joint_encoder, require_file, save_checkpoint, KIND_ALIGN, KIND_JOINT,
    KIND_PRETRAIN,
};
use crate::pipeline::prep::{load_prepared, PreparedData};
use crate::Params;

/// Path of the JSON report written next to a checkpoint.
pub fn report_path(checkpoint: &Path) -> PathBuf {
    checkpoint.with_extension("report.json")
}

fn write_report(checkpoint: &Path, value: serde_json::Value) -> Result<()> {
    write_text(
        &report_path(checkpoint),
        &(serde_json::to_string_pretty(&value).expect("json") + "\n"),
    )
}

fn load(prep: &Path) -> Result<Vec<PreparedData>> {
    load_prepared(prep).stage("load prepared data")
}

/// Trains the alignment network on prepared shapes and saves it to `out`.
pub fn run_train_align(cfg: &PipelineConfig, prep: &Path, out: &Path) -> Result<serde_json::Value> {
    let data: Vec<AlignSample> = load(prep)?.iter().map(PreparedData::align_sample).collect();
    let start = Instant::now();
    let (mut store, net) = new_align(cfg)?;
    let report = train_alignment(&mut store, &net, &data, cfg.align_train()).stage("train alignment")?;
    let emd = evaluate_alignment(&store, &net, &data)?;
    let sha = save_checkpoint(&store, KIND_ALIGN, cfg, out)?;
    info!("alignment: final emd {emd:.5}, saved {}", out.display());
    let value = json!({
        "kind": KIND_ALIGN,
        "config_hash": cfg.hash(),
        "shapes": data.len(),
        "steps": report.steps,
        "epoch_loss": report.epoch_loss,
        "final_emd": emd,
        "seconds": start.elapsed().as_secs_f64(),
        "checkpoint_sha256": sha,
    });
    write_report(out, value.clone())?;
    Ok(value)
}

/// Pretrains the joint encoders as autoencoders and saves them to `out`.
pub fn run_pretrain(cfg: &PipelineConfig, prep: &Path, out: &Path) -> Result<serde_json::Value> {
    let data: Vec<JointExample> = load(prep)?.iter().map(PreparedData::joint_example).collect();
    let start = Instant::now();
    let (mut store, encoder) = new_joint_encoder(cfg)?;
    let mut scratch = store.clone();
    // Pretraining only reads the encoders; the decoder is a placeholder.
    let model = add_decoder(&mut scratch, cfg)?;
    let model = JointModel {
        encoder,
        decoder: model.decoder,
    };
    let report = pretrain_encoders(&mut store, &model, &data, &cfg.pretrain()).stage("pretrain encoders")?;
    let sha = save_checkpoint(&store, KIND_PRETRAIN, cfg, out)?;
    let value = json!({
        "kind": KIND_PRETRAIN,
        "config_hash": cfg.hash(),
        "shapes": data.len(),
        "steps": report.steps,
        "epoch_loss": report.epoch_loss,
        "seconds": start.elapsed().as_secs_f64(),
        "checkpoint_sha256": sha,
    });
    write_report(out, value.clone())?;
    Ok(value)
}

/// Trains the decoder (and then encoders) starting from pretrained
/// encoders, saves everything to `out` and reports joint-region IoU.
pub fn run_train_joint(cfg: &PipelineConfig, prep: &Path, pretrained: &Path, out: &Path) -> Result<serde_json::Value> {
    let (ck, pre_sha) = load_checkpoint(pretrained, KIND_PRETRAIN, cfg)?;
    let data: Vec<JointExample> = load(prep)?.iter().map(PreparedData::joint_example).collect();
    let start = Instant::now();
    let mut store: Params = ck.params;
    let model = add_decoder(&mut store, cfg)?;
    let report = train_joint(&mut store, &model, &data, &cfg.joint_train()).stage("train joint")?;
    let iou = data
        .iter()
        .map(|ex| joint_iou(&store, &model, ex))
        .collect::<Result<Vec<_>>>()?;
    let mean_iou = iou.iter().sum::<f64>() / iou.len() as f64;
    let sha = save_checkpoint(&store, KIND_JOINT, cfg, out)?;
    info!("joint: mean IoU {mean_iou:.4}, saved {}", out.display());
    let value = json!({
        "kind": KIND_JOINT,
        "config_hash": cfg.hash(),
        "shapes": data.len(),
        "stage2": { "steps": report.stage2.steps, "epoch_loss": report.stage2.epoch_loss },
        "stage3": { "steps": report.stage3.steps, "epoch_loss": report.stage3.epoch_loss },
        "joint_iou": iou,
        "mean_joint_iou": mean_iou,
        "seconds": start.elapsed().as_secs_f64(),
        "pretrain_sha256": pre_sha,
        "checkpoint_sha256": sha,
    });
    write_report(out, value.clone())?;
    Ok(value)
}

/// Checks that every checkpoint an assembly needs exists.
pub fn require_checkpoints(align: &Path, joint: &Path) -> Result<()> {
    require_file(align, "align checkpoint")?;
    require_file(joint, "joint checkpoint")
}

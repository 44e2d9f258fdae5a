use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::align::{AlignTrainConfig, CategoryConfig};
use crate::encoders::PointNetConfig;
use crate::error::{Error, Result};
use crate::jointsynth::{JointTrainConfig, LossConfig, PretrainConfig, SampleSchedule, StepSchedule, DECODER_HIDDEN};
use crate::refine::RefineConfig;

pub const ENV_PREFIX: &str = "COALESCE_";

/// Every tunable of the pipeline as flat keys. Files use `key = value`
/// lines; `COALESCE_<KEY>` environment variables override file values.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub category: String,
    pub align_checkpoint: String,
    pub joint_checkpoint: String,
    pub pretrain_checkpoint: String,
    pub tau: f64,
    pub train_res: usize,
    pub test_res: usize,
    /// `desk` or `full` encoder sizes.
    pub encoder: String,
    pub decoder_hidden: Vec<usize>,
    /// Query points are multiplied by this before entering the decoder.
    pub decoder_point_scale: f64,
    /// Surface samples per part before erosion.
    pub surface_points: usize,
    /// Placed-union size compared under EMD.
    pub emd_points: usize,
    pub occupancy_samples: usize,
    pub boundary_points: usize,
    pub align_epochs: usize,
    pub align_batch: usize,
    pub align_lr: f64,
    pub pretrain_epochs: usize,
    pub pretrain_lr: f64,
    pub pretrain_points: usize,
    pub stage2_epochs: usize,
    pub stage3_epochs: usize,
    pub stage2_lr: f64,
    pub stage3_lr: f64,
    /// Cosine decay target of each joint stage, as a fraction of its rate.
    pub joint_lr_final_ratio: f64,
    pub sample_start: usize,
    pub sample_every: usize,
    pub point_batch: usize,
    pub alpha: f64,
    pub lambda: f64,
    pub refine_iters: usize,
    pub refine_lr_transform: f64,
    pub refine_lr_decoder: f64,
    /// Field evaluation is limited to balls of `mask_radius · tau` around
    /// part boundary loop vertices.
    pub mask_radius: f64,
    pub chamfer_samples: usize,
    pub chamfer_squared: bool,
    pub sine_amplitude: f64,
    pub sine_frequency: f64,
    pub scale_min: f64,
    pub scale_max: f64,
    pub translation: f64,
    pub seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        let joint = JointTrainConfig::default();
        let refine = RefineConfig::default();
        let loss = LossConfig::default();
        Self {
            category: "chairlike".into(),
            align_checkpoint: "align.clsc".into(),
            joint_checkpoint: "joint.clsc".into(),
            pretrain_checkpoint: "pretrain.clsc".into(),
            tau: 0.05,
            train_res: 64,
            test_res: 64,
            encoder: "desk".into(),
            decoder_hidden: DECODER_HIDDEN.to_vec(),
            decoder_point_scale: 1.0,
            surface_points: 4096,
            emd_points: 256,
            occupancy_samples: 16384,
            boundary_points: 1024,
            align_epochs: 200,
            align_batch: 8,
            align_lr: 1e-3,
            pretrain_epochs: 100,
            pretrain_lr: StepSchedule::pretrain().initial,
            pretrain_points: 512,
            stage2_epochs: joint.stage2_epochs,
            stage3_epochs: joint.stage3_epochs,
            stage2_lr: joint.stage2_lr,
            stage3_lr: joint.stage3_lr,
            joint_lr_final_ratio: joint.lr_final_ratio,
            sample_start: SampleSchedule::full().start,
            sample_every: SampleSchedule::full().every,
            point_batch: 4096,
            alpha: loss.alpha,
            lambda: loss.lambda,
            refine_iters: refine.iterations,
            refine_lr_transform: refine.lr_transform,
            refine_lr_decoder: refine.lr_decoder,
            mask_radius: 2.0,
            chamfer_samples: 16384,
            chamfer_squared: true,
            sine_amplitude: 0.02,
            sine_frequency: 4.0 * std::f64::consts::PI,
            scale_min: 0.9,
            scale_max: 1.1,
            translation: 0.04,
            seed: 0,
        }
    }
}

fn config_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

/// Parses one scalar the way a `key = value` line would.
fn parse_value(raw: &str) -> serde_json::Value {
    let doc = format!("v = {raw}");
    match toml::from_str::<toml::Table>(&doc) {
        Ok(t) => serde_json::to_value(&t["v"]).unwrap_or(serde_json::Value::Null),
        Err(_) => serde_json::Value::String(raw.to_string()),
    }
}

impl PipelineConfig {
    /// Parses `key = value` text on top of the defaults.
    pub fn from_text(text: &str, env: impl Fn(&str) -> Option<String>) -> Result<Self> {
        let table: toml::Table = toml::from_str(text).map_err(|e| config_err(e.to_string()))?;
        let mut value = serde_json::to_value(Self::default()).expect("config serializes");
        let obj = value.as_object_mut().expect("config is a map");
        for (k, v) in table {
            if !obj.contains_key(&k) {
                return Err(config_err(format!("unknown key `{k}`")));
            }
            obj.insert(k, serde_json::to_value(v).map_err(|e| config_err(e.to_string()))?);
        }
        let keys: Vec<String> = obj.keys().cloned().collect();
        for k in keys {
            if let Some(raw) = env(&format!("{ENV_PREFIX}{}", k.to_uppercase())) {
                obj.insert(k, parse_value(raw.trim()));
            }
        }
        let cfg: Self = serde_json::from_value(value).map_err(|e| config_err(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a config file (or only defaults when `path` is `None`) and
    /// applies environment overrides.
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let text = match path {
            Some(p) => std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?,
            None => String::new(),
        };
        Self::from_text(&text, |k| std::env::var(k).ok())
    }

    pub fn to_text(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        hex::encode(Sha256::digest(json.as_bytes()))
    }

    pub fn validate(&self) -> Result<()> {
        self.category_config()?;
        self.encoders()?;
        if self.decoder_hidden.len() < 2 {
            return Err(config_err("decoder_hidden needs at least two layers"));
        }
        if self.scale_min > self.scale_max || self.scale_min <= 0.0 || self.translation < 0.0 {
            return Err(config_err("invalid similarity perturbation ranges"));
        }
        if self.chamfer_samples == 0 || self.surface_points == 0 || self.occupancy_samples == 0 {
            return Err(config_err("sample counts must be positive"));
        }
        Ok(())
    }

    pub fn category_config(&self) -> Result<CategoryConfig> {
        let mut c = CategoryConfig::by_name(&self.category)?;
        c.tau = self.tau;
        c.train_res = self.train_res;
        c.test_res = self.test_res;
        c.validate()?;
        Ok(c)
    }

    /// Alignment, full-part and near-joint encoder configurations.
    pub fn encoders(&self) -> Result<[PointNetConfig; 3]> {
        match self.encoder.as_str() {
            "desk" => Ok([
                PointNetConfig::desk_a(),
                PointNetConfig::desk_b(),
                PointNetConfig::desk_c(),
            ]),
            "full" => Ok([
                PointNetConfig::full_a(),
                PointNetConfig::full_b(),
                PointNetConfig::full_c(),
            ]),
            other => Err(config_err(format!("unknown encoder size `{other}`"))),
        }
    }

    pub fn align_train(&self) -> AlignTrainConfig {
        AlignTrainConfig {
            epochs: self.align_epochs,
            batch: self.align_batch,
            lr: self.align_lr,
            seed: self.seed,
        }
    }

    pub fn pretrain(&self) -> PretrainConfig {
        PretrainConfig {
            epochs: self.pretrain_epochs,
            schedule: StepSchedule {
                initial: self.pretrain_lr,
                ..StepSchedule::pretrain()
            },
            out_points: self.pretrain_points,
            seed: self.seed,
            ..PretrainConfig::default()
        }
    }

    pub fn joint_train(&self) -> JointTrainConfig {
        JointTrainConfig {
            stage2_epochs: self.stage2_epochs,
            stage3_epochs: self.stage3_epochs,
            stage2_lr: self.stage2_lr,
            stage3_lr: self.stage3_lr,
            samples: SampleSchedule {
                start: self.sample_start,
                every: self.sample_every,
                cap: self.occupancy_samples,
            },
            point_batch: self.point_batch,
            lr_final_ratio: self.joint_lr_final_ratio,
            loss: self.loss(),
            seed: self.seed,
        }
    }

    pub fn loss(&self) -> LossConfig {
        LossConfig {
            alpha: self.alpha,
            lambda: self.lambda,
        }
    }

    pub fn refine(&self) -> RefineConfig {
        RefineConfig {
            iterations: self.refine_iters,
            lr_transform: self.refine_lr_transform,
            lr_decoder: self.refine_lr_decoder,
            lambda: self.lambda,
            k: self.boundary_points,
        }
    }
}

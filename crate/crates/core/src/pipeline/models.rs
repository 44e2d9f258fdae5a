use std::collections::BTreeMap;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use crate::align::AlignNet;
use crate::encoders::JointEncoder;
use crate::error::{Error, Result};
use crate::jointsynth::{ImplicitDecoder, JointModel};
use crate::pipeline::config::PipelineConfig;
use crate::{ModelCheckpoint, Params};

pub const KIND_ALIGN: &str = "align";
pub const KIND_PRETRAIN: &str = "pretrain";
pub const KIND_JOINT: &str = "joint";

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn file_sha256(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(sha256_hex(&bytes))
}

/// Fails unless `path` names an existing file.
pub fn require_file(path: &Path, what: &str) -> Result<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(Error::Checkpoint(format!("{what} `{}` does not exist", path.display())))
    }
}

fn meta(kind: &str, cfg: &PipelineConfig) -> BTreeMap<String, String> {
    BTreeMap::from([
        ("kind".to_string(), kind.to_string()),
        ("category".to_string(), cfg.category.clone()),
        ("encoder".to_string(), cfg.encoder.clone()),
        ("decoder_depth".to_string(), cfg.decoder_hidden.len().to_string()),
        ("decoder_point_scale".to_string(), cfg.decoder_point_scale.to_string()),
        ("config_hash".to_string(), cfg.hash()),
    ])
}

/// Saves `params` with metadata describing how they were produced.
pub fn save_checkpoint(params: &Params, kind: &str, cfg: &PipelineConfig, path: &Path) -> Result<String> {
    let mut ck = ModelCheckpoint::new(params.clone());
    ck.meta = meta(kind, cfg);
    let bytes = ck.to_bytes();
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(path, &bytes).map_err(|e| Error::io(path, e))?;
    Ok(sha256_hex(&bytes))
}

/// Loads a checkpoint and checks that it matches the configured category
/// and encoder size.
pub fn load_checkpoint(path: &Path, kind: &str, cfg: &PipelineConfig) -> Result<(ModelCheckpoint, String)> {
    require_file(path, &format!("{kind} checkpoint"))?;
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let ck = ModelCheckpoint::from_bytes(&bytes)?;
    let want = meta(kind, cfg);
    let keys: &[&str] = if kind == KIND_JOINT {
        &["kind", "category", "encoder", "decoder_point_scale"]
    } else {
        &["kind", "category", "encoder"]
    };
    for &key in keys {
        let got = ck.meta.get(key).map(String::as_str).unwrap_or("");
        if got != want[key] {
            return Err(Error::Checkpoint(format!(
                "{}: {key} is `{got}`, expected `{}`",
                path.display(),
                want[key]
            )));
        }
    }
    Ok((ck, sha256_hex(&bytes)))
}

fn slot_names(cfg: &PipelineConfig) -> Result<Vec<String>> {
    Ok(cfg.category_config()?.part_labels)
}

/// Fresh alignment network.
pub fn new_align(cfg: &PipelineConfig) -> Result<(Params, AlignNet)> {
    let [a, _, _] = cfg.encoders()?;
    let mut store = Params::new();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0xA11C);
    let net = AlignNet::new(&mut store, a, cfg.category_config()?.slots(), &mut rng)?;
    Ok((store, net))
}

pub fn attach_align(store: &Params, cfg: &PipelineConfig) -> Result<AlignNet> {
    let [a, _, _] = cfg.encoders()?;
    AlignNet::attach(store, a, cfg.category_config()?.slots())
}

/// Fresh joint encoders only (for pretraining).
pub fn new_joint_encoder(cfg: &PipelineConfig) -> Result<(Params, JointEncoder)> {
    let [_, b, c] = cfg.encoders()?;
    let mut store = Params::new();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0xB0C0);
    let enc = JointEncoder::new(&mut store, &slot_names(cfg)?, b, c, &mut rng)?;
    Ok((store, enc))
}

/// Adds a fresh decoder to `store`, which must already hold the joint
/// encoders.
pub fn add_decoder(store: &mut Params, cfg: &PipelineConfig) -> Result<JointModel> {
    let [_, b, c] = cfg.encoders()?;
    let encoder = JointEncoder::attach(store, &slot_names(cfg)?, b, c)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0xDEC0);
    let decoder = ImplicitDecoder::new(
        store,
        encoder.width() * encoder.slots.len(),
        &cfg.decoder_hidden,
        &mut rng,
    )?
    .with_point_scale(cfg.decoder_point_scale);
    Ok(JointModel { encoder, decoder })
}

pub fn attach_joint(store: &Params, cfg: &PipelineConfig) -> Result<JointModel> {
    let [_, b, c] = cfg.encoders()?;
    let encoder = JointEncoder::attach(store, &slot_names(cfg)?, b, c)?;
    let decoder = ImplicitDecoder::attach(store, cfg.decoder_hidden.len())?.with_point_scale(cfg.decoder_point_scale);
    if decoder.code_width != encoder.width() * encoder.slots.len() {
        return Err(Error::Checkpoint(
            "decoder code width does not match the joint encoders".into(),
        ));
    }
    Ok(JointModel { encoder, decoder })
}

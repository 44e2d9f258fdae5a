//! Per-part similarity regression and the earth mover's distance loss.

mod emd;
mod hungarian;
mod net;
mod train;

pub use emd::{emd_assignment, emd_loss, emd_on_tape};
pub use hungarian::hungarian;
pub use net::{transforms_from_raw, AlignNet};
pub use train::{
    evaluate_alignment, placed_points, split_counts, train_alignment, AlignPart, AlignReport, AlignSample,
    AlignTrainConfig,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::Similarity;
use crate::meshkit::PointCloud;

/// Uniform scale and translation applied as `s * p + t`.
pub type SimilarityTransform = Similarity;

/// Semantic part slots and per-category geometry settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CategoryConfig {
    pub name: String,
    pub part_labels: Vec<String>,
    pub tau: f64,
    /// Occupancy resolution used for training samples.
    pub train_res: usize,
    /// Field resolution used at assembly time.
    pub test_res: usize,
}

impl CategoryConfig {
    pub fn new(name: &str, labels: &[&str]) -> Result<Self> {
        let cfg = Self {
            name: name.to_string(),
            part_labels: labels.iter().map(|s| s.to_string()).collect(),
            tau: 0.05,
            train_res: 64,
            test_res: 64,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn chairlike() -> Self {
        Self::new("chairlike", &["back", "seat", "leg", "arm"]).expect("valid labels")
    }

    pub fn muglike() -> Self {
        Self::new("muglike", &["body", "handle"]).expect("valid labels")
    }

    pub fn by_name(name: &str) -> Result<Self> {
        match name {
            "chairlike" => Ok(Self::chairlike()),
            "muglike" => Ok(Self::muglike()),
            _ => Err(Error::Config(format!("unknown category `{name}`"))),
        }
    }

    pub fn slots(&self) -> usize {
        self.part_labels.len()
    }

    pub fn slot_of(&self, label: &str) -> Option<usize> {
        self.part_labels.iter().position(|l| l == label)
    }

    pub fn validate(&self) -> Result<()> {
        if self.part_labels.len() < 2 {
            return Err(Error::Config("a category needs at least two part labels".into()));
        }
        for (i, l) in self.part_labels.iter().enumerate() {
            if self.part_labels[..i].contains(l) {
                return Err(Error::Config(format!("duplicate part label `{l}`")));
            }
        }
        if !(self.tau >= 0.0) || self.train_res < 2 || self.test_res < 2 {
            return Err(Error::Config("invalid erosion or grid settings".into()));
        }
        Ok(())
    }
}

/// `s * p + t` on points; normals are unchanged.
pub fn apply_transform(cloud: &PointCloud, xf: &SimilarityTransform) -> PointCloud {
    let mut out = cloud.clone();
    for p in &mut out.points {
        *p = xf.apply(p);
    }
    out
}

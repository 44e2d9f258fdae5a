use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::geom::{v3, Polyline, Similarity, Vec3};
use crate::meshkit::TriMesh;
use crate::pipeline::config::PipelineConfig;
use crate::pipeline::synth::{LabeledShape, ShapePart};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PerturbConfig {
    pub amplitude: f64,
    pub frequency: f64,
    pub scale_min: f64,
    pub scale_max: f64,
    /// Half-width of the per-axis translation range.
    pub translation: f64,
}

impl Default for PerturbConfig {
    fn default() -> Self {
        Self {
            amplitude: 0.02,
            frequency: 4.0 * PI,
            scale_min: 0.9,
            scale_max: 1.1,
            translation: 0.04,
        }
    }
}

impl PerturbConfig {
    pub fn from_pipeline(cfg: &PipelineConfig) -> Self {
        Self {
            amplitude: cfg.sine_amplitude,
            frequency: cfg.sine_frequency,
            scale_min: cfg.scale_min,
            scale_max: cfg.scale_max,
            translation: cfg.translation,
        }
    }
}

/// Kind of perturbation applied to a test shape.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Perturbation {
    None,
    Sine,
    Similarity,
}

impl std::str::FromStr for Perturbation {
    type Err = crate::error::Error;

    fn from_str(s: &str) -> crate::error::Result<Self> {
        match s {
            "none" => Ok(Self::None),
            "sine" => Ok(Self::Sine),
            "similarity" => Ok(Self::Similarity),
            other => Err(crate::error::Error::invalid(format!("unknown perturbation `{other}`"))),
        }
    }
}

/// Per-shape phase, uniform in [-π, π].
pub fn sine_phase(seed: u64) -> f64 {
    ChaCha8Rng::seed_from_u64(seed).random_range(-PI..=PI)
}

/// `y + a·sin(ω z + f)`.
pub fn sine_warp_point(p: &Vec3, amplitude: f64, frequency: f64, phase: f64) -> Vec3 {
    v3(p.x, p.y + amplitude * (frequency * p.z + phase).sin(), p.z)
}

/// Warps every vertex and recomputes normals.
pub fn sine_warp_mesh(mesh: &TriMesh, amplitude: f64, frequency: f64, phase: f64) -> TriMesh {
    let mut out = mesh.clone();
    for p in &mut out.vertices {
        *p = sine_warp_point(p, amplitude, frequency, phase);
    }
    out.compute_normals();
    out
}

fn map_shape(shape: &LabeledShape, f: impl Fn(&Vec3) -> Vec3, renormal: bool) -> LabeledShape {
    let parts = shape
        .parts
        .iter()
        .map(|p| {
            let mut mesh = p.mesh.clone();
            for v in &mut mesh.vertices {
                *v = f(v);
            }
            if renormal {
                mesh.compute_normals();
            }
            ShapePart {
                label: p.label.clone(),
                mesh,
            }
        })
        .collect();
    let seams = shape
        .seams
        .iter()
        .map(|l| Polyline::new(l.points.iter().map(&f).collect(), l.closed))
        .collect();
    LabeledShape {
        id: shape.id.clone(),
        parts,
        seams,
    }
}

/// Warps all parts and seams of a shape with one phase drawn from `seed`.
pub fn perturb_sine(shape: &LabeledShape, cfg: &PerturbConfig, seed: u64) -> (LabeledShape, f64) {
    let phase = sine_phase(seed);
    let out = map_shape(shape, |p| sine_warp_point(p, cfg.amplitude, cfg.frequency, phase), true);
    (out, phase)
}

/// One global scale and translation drawn from the configured ranges.
pub fn sample_similarity(cfg: &PerturbConfig, seed: u64) -> Similarity {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let s = if cfg.scale_max > cfg.scale_min {
        rng.random_range(cfg.scale_min..=cfg.scale_max)
    } else {
        cfg.scale_min
    };
    let h = cfg.translation;
    let mut c = || if h > 0.0 { rng.random_range(-h..=h) } else { 0.0 };
    let t = v3(c(), c(), c());
    Similarity::new(s, t)
}

/// Applies one sampled similarity to every part and seam of a shape.
pub fn perturb_similarity(shape: &LabeledShape, cfg: &PerturbConfig, seed: u64) -> (LabeledShape, Similarity) {
    let xf = sample_similarity(cfg, seed);
    (map_shape(shape, |p| xf.apply(p), false), xf)
}

/// Applies `kind` to a shape; returns a JSON record of the drawn values.
pub fn perturb_shape(
    shape: &LabeledShape,
    kind: Perturbation,
    cfg: &PerturbConfig,
    seed: u64,
) -> (LabeledShape, serde_json::Value) {
    match kind {
        Perturbation::None => (shape.clone(), serde_json::json!({ "kind": "none" })),
        Perturbation::Sine => {
            let (s, phase) = perturb_sine(shape, cfg, seed);
            (
                s,
                serde_json::json!({ "kind": "sine", "phase": phase, "amplitude": cfg.amplitude, "frequency": cfg.frequency }),
            )
        }
        Perturbation::Similarity => {
            let (s, xf) = perturb_similarity(shape, cfg, seed);
            (s, serde_json::json!({ "kind": "similarity", "transform": xf }))
        }
    }
}

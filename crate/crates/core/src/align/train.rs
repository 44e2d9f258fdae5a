use log::info;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::align::emd::{emd_loss, emd_on_tape};
use crate::align::net::AlignNet;
use crate::autodiff::{adam_step, AdamConfig, AdamState, Binder, GradSum, ParamStore, Tape, Tensor, Trainable, Var};
use crate::encoders::Plan;
use crate::error::{Error, Result};
use crate::geom::{Similarity, Vec3};
use crate::scalar::Real;

/// One part of a training shape.
#[derive(Clone, Debug)]
pub struct AlignPart {
    /// Normalized encoder input.
    pub cloud: Vec<Vec3>,
    /// Normalized subsample whose placed union is compared under EMD.
    pub emd_points: Vec<Vec3>,
    /// Places the normalized part in the assembled shape.
    pub truth: Similarity,
}

#[derive(Clone, Debug)]
pub struct AlignSample {
    pub parts: Vec<Option<AlignPart>>,
}

impl AlignSample {
    /// Ground-truth union of the placed EMD subsamples.
    pub fn target(&self) -> Vec<Vec3> {
        self.parts
            .iter()
            .flatten()
            .flat_map(|p| p.emd_points.iter().map(|q| p.truth.apply(q)))
            .collect()
    }

    pub fn clouds(&self) -> Vec<Option<&[Vec3]>> {
        self.parts
            .iter()
            .map(|p| p.as_ref().map(|p| p.cloud.as_slice()))
            .collect()
    }
}

/// Splits `total` into `k` near-equal counts, larger ones first.
pub fn split_counts(total: usize, k: usize) -> Vec<usize> {
    (0..k).map(|i| total / k + usize::from(i < total % k)).collect()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AlignTrainConfig {
    pub epochs: usize,
    pub batch: usize,
    pub lr: f64,
    pub seed: u64,
}

impl Default for AlignTrainConfig {
    fn default() -> Self {
        Self {
            epochs: 200,
            batch: 8,
            lr: 1e-3,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct AlignReport {
    /// Mean pre-update loss of every epoch.
    pub epoch_loss: Vec<f64>,
    pub steps: usize,
}

/// Predicted placement of every present part's EMD points, on the tape.
pub fn placed_points<T: Real>(tape: &Tape<T>, raw: Var, sample: &AlignSample) -> Result<Var> {
    let mut rows = Vec::new();
    for (i, part) in sample.parts.iter().enumerate() {
        let Some(part) = part else { continue };
        let pts = tape.constant(Tensor::from_points(&part.emd_points));
        let s = tape.exp(tape.slice(raw, 1, 4 * i, 1)?);
        let t = tape.slice(raw, 1, 4 * i + 1, 3)?;
        rows.push(tape.add(tape.mul(pts, s)?, t)?);
    }
    if rows.is_empty() {
        return Err(Error::Empty("alignment sample parts"));
    }
    tape.concat(&rows, 0)
}

struct Prepared {
    plans: Vec<Option<Plan>>,
    target: Vec<Vec3>,
}

fn prepare(net: &AlignNet, data: &[AlignSample]) -> Result<Vec<Prepared>> {
    data.iter()
        .map(|s| {
            Ok(Prepared {
                plans: net.plan(&s.clouds())?,
                target: s.target(),
            })
        })
        .collect()
}

/// Trains encoder and regressor jointly on the EMD between predicted and
/// ground-truth part placements.
pub fn train_alignment<T: Real>(
    store: &mut ParamStore<T>,
    net: &AlignNet,
    data: &[AlignSample],
    cfg: AlignTrainConfig,
) -> Result<AlignReport> {
    if data.is_empty() {
        return Err(Error::Empty("alignment dataset"));
    }
    let prepared = prepare(net, data)?;
    let mut adam = AdamState::new(AdamConfig::with_lr(cfg.lr));
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut report = AlignReport::default();
    let batch = cfg.batch.max(1);
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for chunk in order.chunks(batch) {
            let mut sum = GradSum::new();
            for &i in chunk {
                let tape = Tape::new();
                let bind = Binder::new(&tape, store, Trainable::All);
                let raw = net.forward(&bind, &prepared[i].plans)?;
                let pred = placed_points(&tape, raw, &data[i])?;
                let loss = emd_on_tape(&tape, pred, &prepared[i].target)?;
                total += tape.value(loss).item().as_f64();
                let mut grads = tape.backward(loss)?;
                sum.add(bind.collect(&mut grads));
            }
            adam_step(store, &sum.take_mean(), &mut adam)?;
            report.steps += 1;
        }
        let mean = total / data.len() as f64;
        info!("align epoch {epoch}: emd {mean:.5}");
        report.epoch_loss.push(mean);
    }
    Ok(report)
}

/// Mean EMD of the predicted placements over a dataset.
pub fn evaluate_alignment<T: Real>(store: &ParamStore<T>, net: &AlignNet, data: &[AlignSample]) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::Empty("alignment dataset"));
    }
    let mut total = 0.0;
    for s in data {
        let xf = net.predict(store, &s.clouds())?;
        let pred: Vec<Vec3> = s
            .parts
            .iter()
            .zip(&xf)
            .filter_map(|(p, x)| p.as_ref().map(|p| (p, x)))
            .flat_map(|(p, x)| p.emd_points.iter().map(move |q| x.apply(q)))
            .collect();
        total += emd_loss(&pred, &s.target())?;
    }
    Ok(total / data.len() as f64)
}

use log::info;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::autodiff::{
    adam_step, Activation, AdamConfig, AdamState, Binder, Mlp, ParamStore, Tape, Tensor, Trainable, Var,
};
use crate::encoders::{JointEncoder, JointPlan, LEAKY_SLOPE};
use crate::error::{Error, Result};
use crate::geom::Vec3;
use crate::jointsynth::decoder::ImplicitDecoder;
use crate::jointsynth::loss::{loss_match_on_tape, loss_mse_on_tape, LossConfig};
use crate::jointsynth::volume::{JointBoundarySet, TrainingSampleSet};
use crate::meshkit::OccupancyGrid;
use crate::scalar::Real;

/// Encoder inputs of one part, in the assembled frame.
#[derive(Clone, Debug)]
pub struct JointPartInput {
    pub cloud: Vec<Vec3>,
    pub near: Vec<Vec3>,
}

/// One training shape for the joint network.
#[derive(Clone, Debug)]
pub struct JointExample {
    pub inputs: Vec<Option<JointPartInput>>,
    pub samples: TrainingSampleSet,
    pub boundary: JointBoundarySet,
    /// Dilated joint volume.
    pub joint: OccupancyGrid,
    /// Occupancy of the whole shape on the same grid.
    pub shape: OccupancyGrid,
}

/// Joint encoder branches and the implicit decoder.
#[derive(Clone, Debug)]
pub struct JointModel {
    pub encoder: JointEncoder,
    pub decoder: ImplicitDecoder,
}

impl JointModel {
    pub fn code_width(&self) -> usize {
        self.encoder.width() * self.encoder.slots.len()
    }

    pub fn plan(&self, inputs: &[Option<JointPartInput>]) -> Result<Vec<Option<JointPlan>>> {
        inputs
            .iter()
            .enumerate()
            .map(|(i, p)| p.as_ref().map(|p| self.encoder.plan(i, &p.cloud, &p.near)).transpose())
            .collect()
    }

    /// Concatenated codes of all slots, `1 x code_width`.
    pub fn codes<T: Real>(&self, bind: &Binder<T>, plans: &[Option<JointPlan>]) -> Result<Var> {
        self.encoder.forward_all(bind, plans)
    }

    /// Concatenated codes as plain values.
    pub fn code_values<T: Real>(&self, store: &ParamStore<T>, inputs: &[Option<JointPartInput>]) -> Result<Vec<f64>> {
        let plans = self.plan(inputs)?;
        let tape = Tape::new();
        let bind = Binder::new(&tape, store, Trainable::Nothing);
        let c = self.codes(&bind, &plans)?;
        Ok(tape.value(c).to_f64_vec())
    }
}

/// Step-halving learning rate with a floor.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepSchedule {
    pub initial: f64,
    pub every: usize,
    pub floor: f64,
}

impl StepSchedule {
    pub fn pretrain() -> Self {
        Self {
            initial: 1e-3,
            every: 20,
            floor: 1.25e-4,
        }
    }

    pub fn lr_at(&self, epoch: usize) -> f64 {
        let halvings = (epoch / self.every.max(1)).min(60) as i32;
        (self.initial * 0.5f64.powi(halvings)).max(self.floor)
    }
}

/// Sample count doubling every `every` epochs up to `cap`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SampleSchedule {
    pub start: usize,
    pub every: usize,
    pub cap: usize,
}

impl SampleSchedule {
    pub fn full() -> Self {
        Self {
            start: 2048,
            every: 20,
            cap: 32768,
        }
    }

    pub fn count_at(&self, epoch: usize) -> usize {
        let d = (epoch / self.every.max(1)).min(40) as u32;
        self.start.saturating_mul(1usize << d).min(self.cap)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PretrainConfig {
    pub epochs: usize,
    pub schedule: StepSchedule,
    /// Points produced by the reconstruction decoder.
    pub out_points: usize,
    pub hidden: Vec<usize>,
    pub seed: u64,
}

impl Default for PretrainConfig {
    fn default() -> Self {
        Self {
            epochs: 100,
            schedule: StepSchedule::pretrain(),
            out_points: 512,
            hidden: vec![512, 1024],
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainReport {
    pub epoch_loss: Vec<f64>,
    pub steps: usize,
}

/// Nearest target index for every query, brute force.
fn nearest(queries: &[Vec3], targets: &[Vec3]) -> Vec<usize> {
    queries
        .iter()
        .map(|q| {
            let mut best = (f64::INFINITY, 0);
            for (j, t) in targets.iter().enumerate() {
                let d = (q - t).norm_squared();
                if d < best.0 {
                    best = (d, j);
                }
            }
            best.1
        })
        .collect()
}

/// Symmetric squared chamfer between `pred` (`K x 3` on the tape) and
/// fixed targets, with nearest neighbours held fixed.
pub fn chamfer_on_tape<T: Real>(tape: &Tape<T>, pred: Var, target: &[Vec3]) -> Result<Var> {
    let vals = tape.value(pred);
    let pts: Vec<Vec3> = vals
        .data()
        .chunks(3)
        .map(|c| Vec3::new(c[0].as_f64(), c[1].as_f64(), c[2].as_f64()))
        .collect();
    if pts.is_empty() || target.is_empty() {
        return Err(Error::Empty("chamfer input"));
    }
    let fwd: Vec<Vec3> = nearest(&pts, target).iter().map(|&j| target[j]).collect();
    let back = nearest(target, &pts);
    let d1 = tape.sub(pred, tape.constant(Tensor::from_points(&fwd)))?;
    let a = tape.reduce_mean(tape.sum_axis(tape.square(d1), 1)?)?;
    let g = tape.gather_rows(pred, &back)?;
    let d2 = tape.sub(tape.constant(Tensor::from_points(target)), g)?;
    let b = tape.reduce_mean(tape.sum_axis(tape.square(d2), 1)?)?;
    tape.add(a, b)
}

/// Pretrains every slot's two encoder branches as a point-set autoencoder
/// through a shared fully connected reconstruction head (`pre/`).
pub fn pretrain_encoders<T: Real>(
    store: &mut ParamStore<T>,
    model: &JointModel,
    data: &[JointExample],
    cfg: &PretrainConfig,
) -> Result<TrainReport> {
    let mut items = Vec::new();
    for ex in data {
        let plans = model.plan(&ex.inputs)?;
        for (slot, (plan, input)) in plans.into_iter().zip(&ex.inputs).enumerate() {
            if let (Some(plan), Some(input)) = (plan, input) {
                items.push((slot, plan, input.cloud.clone()));
            }
        }
    }
    if items.is_empty() {
        return Err(Error::Empty("pretraining parts"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let head = match store.id("pre/l0/w") {
        Some(_) => Mlp::attach(
            store,
            "pre",
            cfg.hidden.len() + 1,
            Activation::LeakyRelu(LEAKY_SLOPE),
            Activation::Identity,
        )?,
        None => {
            let mut widths = vec![model.encoder.width()];
            widths.extend(&cfg.hidden);
            widths.push(cfg.out_points * 3);
            Mlp::new(
                store,
                "pre",
                &widths,
                Activation::LeakyRelu(LEAKY_SLOPE),
                Activation::Identity,
                &mut rng,
            )?
        }
    };
    let trainable_prefixes = ["enc_B/", "enc_C/", "pre/"];
    let mut adam = AdamState::new(AdamConfig::with_lr(cfg.schedule.lr_at(0)));
    let mut report = TrainReport::default();
    let mut order: Vec<usize> = (0..items.len()).collect();
    for epoch in 0..cfg.epochs {
        adam.set_lr(cfg.schedule.lr_at(epoch));
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for &i in &order {
            let (slot, plan, cloud) = &items[i];
            let trainable = Trainable::prefixes(store, &trainable_prefixes);
            let tape = Tape::new();
            let bind = Binder::new(&tape, store, trainable);
            let code = model.encoder.forward(&bind, *slot, Some(plan))?;
            let out = head.forward(&bind, code)?;
            let pred = tape.reshape(out, &[cfg.out_points, 3])?;
            let loss = chamfer_on_tape(&tape, pred, cloud)?;
            total += tape.value(loss).item().as_f64();
            let mut grads = tape.backward(loss)?;
            let g = bind.collect(&mut grads);
            adam_step(store, &g, &mut adam)?;
            report.steps += 1;
        }
        let mean = total / items.len() as f64;
        info!("pretrain epoch {epoch}: chamfer {mean:.6}");
        report.epoch_loss.push(mean);
    }
    Ok(report)
}

#[derive(Clone, Debug, PartialEq)]
pub struct JointTrainConfig {
    pub stage2_epochs: usize,
    pub stage3_epochs: usize,
    pub stage2_lr: f64,
    pub stage3_lr: f64,
    /// Sample count per shape; the epoch counter runs across both stages.
    pub samples: SampleSchedule,
    /// Query points per optimizer step.
    pub point_batch: usize,
    /// Final learning rate of each stage as a fraction of its initial
    /// rate, reached by cosine decay over the stage's epochs (1 keeps it
    /// constant).
    pub lr_final_ratio: f64,
    pub loss: LossConfig,
    pub seed: u64,
}

impl Default for JointTrainConfig {
    fn default() -> Self {
        Self {
            stage2_epochs: 80,
            stage3_epochs: 80,
            stage2_lr: 1e-4,
            stage3_lr: 1e-4,
            samples: SampleSchedule::full(),
            point_batch: usize::MAX,
            lr_final_ratio: 1.0,
            loss: LossConfig::default(),
            seed: 0,
        }
    }
}

impl JointTrainConfig {
    /// Learning rate at `epoch` of a stage with `epochs` epochs.
    pub fn lr_at(&self, initial: f64, epoch: usize, epochs: usize) -> f64 {
        if epochs <= 1 {
            return initial;
        }
        let t = epoch as f64 / (epochs - 1) as f64;
        let r = self.lr_final_ratio;
        initial * (r + (1.0 - r) * 0.5 * (1.0 + (std::f64::consts::PI * t).cos()))
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct JointReport {
    pub stage2: TrainReport,
    pub stage3: TrainReport,
}

/// Total loss `L_mse + α·L_match` for one batch of queries.
#[allow(clippy::too_many_arguments)]
pub fn joint_loss<T: Real>(
    bind: &Binder<T>,
    decoder: &ImplicitDecoder,
    code: Var,
    points: &[Vec3],
    labels: &[f64],
    boundary: Option<&JointBoundarySet>,
    loss: LossConfig,
) -> Result<Var> {
    let tape = bind.tape;
    let f = decoder.forward(bind, code, tape.constant(Tensor::from_points(points)))?;
    let mse = loss_mse_on_tape(tape, f, labels)?;
    match boundary {
        Some(nj) if loss.alpha != 0.0 && !nj.is_empty() => {
            let (plus, minus) = nj.probes(loss.lambda);
            let fp = decoder.forward(bind, code, tape.constant(Tensor::from_points(&plus)))?;
            let fm = decoder.forward(bind, code, tape.constant(Tensor::from_points(&minus)))?;
            let m = loss_match_on_tape(tape, fp, fm)?;
            tape.add(mse, tape.scale(m, T::of(loss.alpha)))
        }
        _ => Ok(mse),
    }
}

/// Coarse-to-fine decoder training (decoder only, `L_mse`), then joint
/// training of encoders and decoder on `L_mse + α·L_match`. One shape per
/// step.
pub fn train_joint<T: Real>(
    store: &mut ParamStore<T>,
    model: &JointModel,
    data: &[JointExample],
    cfg: &JointTrainConfig,
) -> Result<JointReport> {
    if data.is_empty() {
        return Err(Error::Empty("joint training dataset"));
    }
    let plans = data
        .iter()
        .map(|ex| model.plan(&ex.inputs))
        .collect::<Result<Vec<_>>>()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut report = JointReport::default();
    let mut order: Vec<usize> = (0..data.len()).collect();
    let batch = cfg.point_batch.max(1);

    // Stage 2: codes are constant while the encoders are frozen.
    let mut codes = Vec::with_capacity(data.len());
    for p in &plans {
        let tape = Tape::new();
        let bind = Binder::new(&tape, store, Trainable::Nothing);
        let c = model.codes(&bind, p)?;
        codes.push(tape.value(c).to_f64_vec());
    }
    let mut adam = AdamState::new(AdamConfig::with_lr(cfg.stage2_lr));
    for epoch in 0..cfg.stage2_epochs {
        adam.set_lr(cfg.lr_at(cfg.stage2_lr, epoch, cfg.stage2_epochs));
        let n = cfg.samples.count_at(epoch);
        order.shuffle(&mut rng);
        let (mut total, mut count) = (0.0, 0usize);
        for &i in &order {
            let (pts, labels) = data[i].samples.subset(n, rng.random());
            for (p, l) in pts.chunks(batch).zip(labels.chunks(batch)) {
                let trainable = Trainable::prefixes(store, &["dec/"]);
                let tape = Tape::new();
                let bind = Binder::new(&tape, store, trainable);
                let code = tape.constant(Tensor::from_f64(&[1, codes[i].len()], &codes[i])?);
                let loss = joint_loss(&bind, &model.decoder, code, p, l, None, cfg.loss)?;
                total += tape.value(loss).item().as_f64();
                count += 1;
                let mut grads = tape.backward(loss)?;
                let g = bind.collect(&mut grads);
                adam_step(store, &g, &mut adam)?;
                report.stage2.steps += 1;
            }
        }
        let mean = total / count.max(1) as f64;
        info!("joint stage 2 epoch {epoch}: samples {n}, loss {mean:.6}");
        report.stage2.epoch_loss.push(mean);
    }

    // Stage 3: the code is computed once per shape and step; its gradient
    // is summed over the point mini-batches and pushed through the encoders.
    let mut adam_dec = AdamState::new(AdamConfig::with_lr(cfg.stage3_lr));
    let mut adam_enc = AdamState::new(AdamConfig::with_lr(cfg.stage3_lr));
    for e in 0..cfg.stage3_epochs {
        let epoch = cfg.stage2_epochs + e;
        let lr = cfg.lr_at(cfg.stage3_lr, e, cfg.stage3_epochs);
        adam_dec.set_lr(lr);
        adam_enc.set_lr(lr);
        let n = cfg.samples.count_at(epoch);
        order.shuffle(&mut rng);
        let (mut total, mut count) = (0.0, 0usize);
        for &i in &order {
            let (pts, labels) = data[i].samples.subset(n, rng.random());
            let snapshot = store.clone();
            let enc_tape = Tape::new();
            let enc_bind = Binder::new(
                &enc_tape,
                &snapshot,
                Trainable::prefixes(&snapshot, &["enc_B/", "enc_C/"]),
            );
            let code_var = model.codes(&enc_bind, &plans[i])?;
            let code_val = (*enc_tape.value(code_var)).clone();
            let mut code_grad = Tensor::zeros(code_val.shape());
            let chunks = pts.len().div_ceil(batch).max(1);
            for (b, (p, l)) in pts.chunks(batch).zip(labels.chunks(batch)).enumerate() {
                let nj = data[i].boundary.chunk(b, chunks);
                let tape = Tape::new();
                let bind = Binder::new(&tape, store, Trainable::prefixes(store, &["dec/"]));
                let code = tape.param(code_val.clone());
                let loss = joint_loss(&bind, &model.decoder, code, p, l, Some(&nj), cfg.loss)?;
                total += tape.value(loss).item().as_f64();
                count += 1;
                let mut grads = tape.backward(loss)?;
                if let Some(g) = grads.take(code) {
                    for (a, b) in code_grad.data_mut().iter_mut().zip(g.data()) {
                        *a += *b;
                    }
                }
                let g = bind.collect(&mut grads);
                adam_step(store, &g, &mut adam_dec)?;
                report.stage3.steps += 1;
            }
            let w = enc_tape.constant(code_grad);
            let probe = enc_tape.sum_axis(enc_tape.mul(code_var, w)?, 1)?;
            let mut grads = enc_tape.backward(probe)?;
            let g = enc_bind.collect(&mut grads);
            adam_step(store, &g, &mut adam_enc)?;
        }
        let mean = total / count.max(1) as f64;
        info!("joint stage 3 epoch {e}: samples {n}, loss {mean:.6}");
        report.stage3.epoch_loss.push(mean);
    }
    Ok(report)
}

/// IoU of predicted (`f > 0.5`) and true occupancy over the joint volume.
pub fn joint_iou<T: Real>(store: &ParamStore<T>, model: &JointModel, ex: &JointExample) -> Result<f64> {
    let code = model.code_values(store, &ex.inputs)?;
    let cells: Vec<usize> = ex.joint.iter_set().collect();
    let centers: Vec<Vec3> = cells.iter().map(|&c| ex.joint.spec.center_of(c)).collect();
    let f = model.decoder.eval(store, &code, &centers)?;
    let (mut inter, mut union) = (0usize, 0usize);
    for (&c, &v) in cells.iter().zip(&f) {
        let (p, g) = (v > 0.5, ex.shape.get(c));
        inter += usize::from(p && g);
        union += usize::from(p || g);
    }
    Ok(if union == 0 { 1.0 } else { inter as f64 / union as f64 })
}

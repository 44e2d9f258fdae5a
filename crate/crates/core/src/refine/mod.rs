//! Test-time refinement of part transforms and decoder weights.

mod field;
pub mod fixtures;

pub use field::{CodedDecoder, Field, SigmoidField};

use log::{debug, warn};

use crate::autodiff::{adam_step, AdamConfig, AdamState, Binder, ParamStore, Tape, Tensor, Trainable, Var};
use crate::encoders::near_joint_indices;
use crate::error::{Error, Result};
use crate::geom::{Similarity, Vec3};
use crate::scalar::Real;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RefineConfig {
    pub iterations: usize,
    pub lr_transform: f64,
    pub lr_decoder: f64,
    pub lambda: f64,
    /// Size of the joint boundary set.
    pub k: usize,
}

impl Default for RefineConfig {
    fn default() -> Self {
        Self {
            iterations: 25,
            lr_transform: 0.002,
            lr_decoder: 1e-4,
            lambda: 0.005,
            k: 1024,
        }
    }
}

/// One eroded input part in its own normalized frame.
#[derive(Clone, Debug, PartialEq)]
pub struct RefinePart {
    pub points: Vec<Vec3>,
    pub normals: Vec<Vec3>,
    /// Distance of every point to the part's segmentation boundary.
    pub dist: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RefineResult {
    pub transforms: Vec<Similarity>,
    /// `h` before every iteration, then after the last one.
    pub h: Vec<f64>,
    /// Transforms before every iteration, then after the last one.
    pub history: Vec<Vec<Similarity>>,
}

/// `1/(2|N|) Σ |f(p+λn)| + |f(p−λn) − 1|` from probe evaluations.
pub fn objective_h(f_plus: &[f64], f_minus: &[f64]) -> Result<f64> {
    if f_plus.len() != f_minus.len() {
        return Err(Error::invalid("probe counts differ"));
    }
    if f_plus.is_empty() {
        return Err(Error::Empty("joint boundary set"));
    }
    let s: f64 = f_plus.iter().zip(f_minus).map(|(a, b)| a.abs() + (b - 1.0).abs()).sum();
    Ok(s / (2.0 * f_plus.len() as f64))
}

pub fn objective_h_on_tape<T: Real>(tape: &Tape<T>, f_plus: Var, f_minus: Var) -> Result<Var> {
    let a = tape.reduce_mean(tape.abs(f_plus))?;
    let b = tape.reduce_mean(tape.abs(tape.add_scalar(f_minus, -T::one())))?;
    Ok(tape.scale(tape.add(a, b)?, T::of(0.5)))
}

/// Indices of the joint boundary set per part, using boundary distances
/// scaled with each part.
pub fn select_refine_points(parts: &[RefinePart], transforms: &[Similarity], k: usize) -> Vec<Vec<usize>> {
    let mut dist = Vec::new();
    let mut origin = Vec::new();
    for (pi, (part, xf)) in parts.iter().zip(transforms).enumerate() {
        for (i, d) in part.dist.iter().enumerate() {
            dist.push(d * xf.s);
            origin.push((pi, i));
        }
    }
    let mut out = vec![Vec::new(); parts.len()];
    for c in near_joint_indices(&dist, k) {
        let (pi, i) = origin[c];
        out[pi].push(i);
    }
    out
}

/// `h` on the tape, with per-part `[s, tx, ty, tz]` rows given as vars.
fn h_on_tape<T: Real, F: Field<T>>(
    bind: &Binder<T>,
    field: &F,
    parts: &[RefinePart],
    xf: &[Var],
    chosen: &[Vec<usize>],
    lambda: f64,
) -> Result<Var> {
    let tape = bind.tape;
    let mut plus = Vec::new();
    let mut minus = Vec::new();
    for ((part, &x), idx) in parts.iter().zip(xf).zip(chosen) {
        if idx.is_empty() {
            continue;
        }
        let p0: Vec<Vec3> = idx.iter().map(|&i| part.points[i]).collect();
        let off: Vec<Vec3> = idx.iter().map(|&i| part.normals[i] * lambda).collect();
        let s = tape.slice(x, 1, 0, 1)?;
        let t = tape.slice(x, 1, 1, 3)?;
        let p = tape.add(tape.mul(tape.constant(Tensor::from_points(&p0)), s)?, t)?;
        let off = tape.constant(Tensor::from_points(&off));
        plus.push(tape.add(p, off)?);
        minus.push(tape.sub(p, off)?);
    }
    if plus.is_empty() {
        return Err(Error::Empty("joint boundary set"));
    }
    let fp = field.forward(bind, tape.concat(&plus, 0)?)?;
    let fm = field.forward(bind, tape.concat(&minus, 0)?)?;
    objective_h_on_tape(tape, fp, fm)
}

fn xf_store<T: Real>(transforms: &[Similarity]) -> Result<ParamStore<T>> {
    let mut store = ParamStore::new();
    for (i, x) in transforms.iter().enumerate() {
        store.add(
            format!("xf/{i}"),
            Tensor::from_f64(&[1, 4], &[x.s, x.t.x, x.t.y, x.t.z])?,
        )?;
    }
    Ok(store)
}

fn read_transforms<T: Real>(store: &ParamStore<T>) -> Vec<Similarity> {
    store
        .iter()
        .map(|(_, t)| {
            let v = t.to_f64_vec();
            Similarity::new(v[0], Vec3::new(v[1], v[2], v[3]))
        })
        .collect()
}

/// Evaluates `h` for the given transforms.
pub fn evaluate_h<T: Real, F: Field<T>>(
    weights: &ParamStore<T>,
    field: &F,
    parts: &[RefinePart],
    transforms: &[Similarity],
    cfg: &RefineConfig,
) -> Result<f64> {
    let xs = xf_store::<T>(transforms)?;
    let chosen = select_refine_points(parts, transforms, cfg.k);
    let tape = Tape::new();
    let xb = Binder::new(&tape, &xs, Trainable::Nothing);
    let wb = Binder::new(&tape, weights, Trainable::Nothing);
    let xv: Vec<Var> = xs.ids().map(|id| xb.param(id)).collect();
    let h = h_on_tape(&wb, field, parts, &xv, &chosen, cfg.lambda)?;
    Ok(tape.value(h).item().as_f64())
}

/// Alternates one Adam step on the transforms (weights frozen) with one on
/// the field weights named by `weight_prefixes` (transforms frozen).
pub fn refine<T: Real, F: Field<T>>(
    weights: &mut ParamStore<T>,
    weight_prefixes: &[&str],
    field: &F,
    parts: &[RefinePart],
    init: &[Similarity],
    cfg: &RefineConfig,
) -> Result<RefineResult> {
    if parts.len() != init.len() {
        return Err(Error::invalid(format!(
            "{} parts with {} transforms",
            parts.len(),
            init.len()
        )));
    }
    let mut xs = xf_store::<T>(init)?;
    let mut adam_x = AdamState::new(AdamConfig::with_lr(cfg.lr_transform));
    let mut adam_w = AdamState::new(AdamConfig::with_lr(cfg.lr_decoder));
    let mut trace = Vec::with_capacity(cfg.iterations + 1);
    let mut history = vec![init.to_vec()];
    for it in 0..cfg.iterations {
        let chosen = select_refine_points(parts, &read_transforms(&xs), cfg.k);
        let gx = {
            let tape = Tape::new();
            let xb = Binder::new(&tape, &xs, Trainable::All);
            let wb = Binder::new(&tape, weights, Trainable::Nothing);
            let xv: Vec<Var> = xs.ids().map(|id| xb.param(id)).collect();
            let h = h_on_tape(&wb, field, parts, &xv, &chosen, cfg.lambda)?;
            let hv = tape.value(h).item().as_f64();
            if !hv.is_finite() {
                warn!("refine state at iteration {it}: {:?}", read_transforms(&xs));
                return Err(Error::NonFinite(format!("objective h at iteration {it}")));
            }
            debug!("refine iteration {it}: h {hv:.6}");
            trace.push(hv);
            let mut grads = tape.backward(h)?;
            xb.collect(&mut grads)
        };
        adam_step(&mut xs, &gx, &mut adam_x)?;
        history.push(read_transforms(&xs));
        if weight_prefixes.is_empty() {
            continue;
        }
        let chosen = select_refine_points(parts, &read_transforms(&xs), cfg.k);
        let gw = {
            let tape = Tape::new();
            let xb = Binder::new(&tape, &xs, Trainable::Nothing);
            let wb = Binder::new(&tape, weights, Trainable::prefixes(weights, weight_prefixes));
            let xv: Vec<Var> = xs.ids().map(|id| xb.param(id)).collect();
            let h = h_on_tape(&wb, field, parts, &xv, &chosen, cfg.lambda)?;
            let mut grads = tape.backward(h)?;
            wb.collect(&mut grads)
        };
        adam_step(weights, &gw, &mut adam_w)?;
    }
    let transforms = read_transforms(&xs);
    if transforms.iter().any(|x| !x.is_valid()) {
        return Err(Error::NonFinite("refined transforms".into()));
    }
    trace.push(evaluate_h(weights, field, parts, &transforms, cfg)?);
    Ok(RefineResult {
        transforms,
        h: trace,
        history,
    })
}

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::autodiff::{Tape, Tensor, Var};
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Outcome of comparing tape gradients with central differences.
#[derive(Clone, Debug, PartialEq)]
pub struct GradCheck {
    /// Per input: `|analytic - numeric| / max(|analytic|, |numeric|)` in
    /// the Euclidean norm over the input's elements.
    pub relative_error: Vec<f64>,
}

impl GradCheck {
    pub fn max_error(&self) -> f64 {
        self.relative_error.iter().copied().fold(0.0, f64::max)
    }
}

fn eval<T: Real>(inputs: &[Tensor<T>], f: &impl Fn(&Tape<T>, &[Var]) -> Result<Var>) -> Result<f64> {
    let tape = Tape::new();
    let vars: Vec<Var> = inputs.iter().map(|t| tape.constant(t.clone())).collect();
    let out = f(&tape, &vars)?;
    Ok(tape.value(out).item().as_f64())
}

/// Compares the gradient of the scalar `f(inputs)` from the tape with
/// central differences of step `eps` in every input element.
pub fn check_gradients<T: Real>(
    inputs: &[Tensor<T>],
    eps: f64,
    f: impl Fn(&Tape<T>, &[Var]) -> Result<Var>,
) -> Result<GradCheck> {
    let analytic = tape_gradients(inputs, &f)?;
    numeric_errors(inputs, eps, &analytic, |probe| eval(probe, &f))
}

/// As [`check_gradients`], with the differences taken in `f64` through
/// `reference`, the same function built on a 64-bit tape.
pub fn check_gradients_f64<T: Real>(
    inputs: &[Tensor<T>],
    eps: f64,
    f: impl Fn(&Tape<T>, &[Var]) -> Result<Var>,
    reference: impl Fn(&Tape<f64>, &[Var]) -> Result<Var>,
) -> Result<GradCheck> {
    let wide: Vec<Tensor<f64>> = inputs.iter().map(|t| t.cast()).collect();
    let analytic = tape_gradients(inputs, &f)?;
    numeric_errors(&wide, eps, &analytic, |probe| eval(probe, &reference))
}

fn tape_gradients<T: Real>(
    inputs: &[Tensor<T>],
    f: &impl Fn(&Tape<T>, &[Var]) -> Result<Var>,
) -> Result<Vec<Vec<f64>>> {
    let tape = Tape::new();
    let vars: Vec<Var> = inputs.iter().map(|t| tape.param(t.clone())).collect();
    let out = f(&tape, &vars)?;
    if tape.value(out).len() != 1 {
        return Err(Error::invalid("gradient check needs a scalar output"));
    }
    let grads = tape.backward(out)?;
    Ok(vars
        .iter()
        .zip(inputs)
        .map(|(v, t)| match grads.get(*v) {
            Some(g) => g.to_f64_vec(),
            None => vec![0.0; t.len()],
        })
        .collect())
}

fn numeric_errors<U: Real>(
    inputs: &[Tensor<U>],
    eps: f64,
    analytic: &[Vec<f64>],
    eval: impl Fn(&[Tensor<U>]) -> Result<f64>,
) -> Result<GradCheck> {
    let mut relative_error = Vec::with_capacity(inputs.len());
    let mut probe = inputs.to_vec();
    for (k, analytic) in analytic.iter().enumerate() {
        let mut numeric = Vec::with_capacity(inputs[k].len());
        for i in 0..inputs[k].len() {
            let x = inputs[k].data()[i];
            let (xp, xm) = (x + U::of(eps), x - U::of(eps));
            probe[k].data_mut()[i] = xp;
            let fp = eval(&probe)?;
            probe[k].data_mut()[i] = xm;
            let fm = eval(&probe)?;
            probe[k].data_mut()[i] = x;
            numeric.push((fp - fm) / (xp.as_f64() - xm.as_f64()));
        }
        let diff = analytic
            .iter()
            .zip(&numeric)
            .map(|(a, n)| (a - n).powi(2))
            .sum::<f64>()
            .sqrt();
        let na = analytic.iter().map(|a| a * a).sum::<f64>().sqrt();
        let nn = numeric.iter().map(|a| a * a).sum::<f64>().sqrt();
        let scale = na.max(nn);
        relative_error.push(if scale > 0.0 { diff / scale } else { 0.0 });
    }
    Ok(GradCheck { relative_error })
}

/// Random input tensors and a scalar function of them.
type Case<T> = (
    &'static str,
    Vec<Tensor<T>>,
    Box<dyn Fn(&Tape<T>, &[Var]) -> Result<Var>>,
);

fn uniform<T: Real>(rng: &mut ChaCha8Rng, shape: &[usize], lo: f64, hi: f64) -> Tensor<T> {
    let n = shape.iter().product();
    let data = (0..n).map(|_| T::of(rng.random_range(lo..hi))).collect();
    Tensor::new(shape.to_vec(), data).expect("shape matches data")
}

/// Values with magnitude in [0.2, 1] and random sign, clear of kinks at 0.
fn away_from_zero<T: Real>(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor<T> {
    let n = shape.iter().product();
    let data = (0..n)
        .map(|_| {
            let m = rng.random_range(0.2..1.0);
            T::of(if rng.random_bool(0.5) { m } else { -m })
        })
        .collect();
    Tensor::new(shape.to_vec(), data).expect("shape matches data")
}

/// Entries spaced at least 0.1 apart, in random order.
fn well_separated<T: Real>(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor<T> {
    let n: usize = shape.iter().product();
    let mut vals: Vec<f64> = (0..n)
        .map(|i| i as f64 * 0.15 - 1.0 + rng.random_range(0.0..0.05))
        .collect();
    vals.shuffle(rng);
    Tensor::new(shape.to_vec(), vals.into_iter().map(T::of).collect()).expect("shape matches data")
}

/// `sum(out ⊙ w)` with a fixed random weight of the output's shape.
fn readout<T: Real>(tape: &Tape<T>, out: Var, w: &Tensor<T>) -> Result<Var> {
    let n = T::of(w.len() as f64);
    let m = tape.mul(out, tape.constant(w.clone()))?;
    Ok(tape.scale(tape.reduce_mean(m)?, n))
}

fn unary<T: Real>(
    name: &'static str,
    x: Tensor<T>,
    w: Tensor<T>,
    f: impl Fn(&Tape<T>, Var) -> Result<Var> + 'static,
) -> Case<T> {
    (name, vec![x], Box::new(move |t, v| readout(t, f(t, v[0])?, &w)))
}

fn binary<T: Real>(
    name: &'static str,
    a: Tensor<T>,
    b: Tensor<T>,
    w: Tensor<T>,
    f: impl Fn(&Tape<T>, Var, Var) -> Result<Var> + 'static,
) -> Case<T> {
    (
        name,
        vec![a, b],
        Box::new(move |t, v| readout(t, f(t, v[0], v[1])?, &w)),
    )
}

/// Random 5-layer perceptron on a batch of points; every weight and bias
/// is an input of the check.
fn mlp5<T: Real>(rng: &mut ChaCha8Rng) -> Case<T> {
    let widths = [3, 8, 8, 8, 8, 1];
    let mut inputs = vec![uniform(rng, &[4, 3], -1.0, 1.0)];
    for l in 0..5 {
        let bound = (6.0 / (widths[l] + widths[l + 1]) as f64).sqrt();
        inputs.push(uniform(rng, &[widths[l], widths[l + 1]], -bound, bound));
        inputs.push(uniform(rng, &[1, widths[l + 1]], -0.1, 0.1));
    }
    let w = uniform(rng, &[4, 1], -1.0, 1.0);
    let f = move |t: &Tape<T>, v: &[Var]| {
        let mut h = v[0];
        for l in 0..5 {
            h = t.add(t.matmul(h, v[1 + 2 * l])?, v[2 + 2 * l])?;
            if l < 4 {
                h = t.sigmoid(h);
            }
        }
        readout(t, h, &w)
    };
    ("mlp5", inputs, Box::new(f))
}

fn cases<T: Real>(seed: u64) -> Vec<Case<T>> {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    let r = &mut r;
    let u = |r: &mut ChaCha8Rng, s: &[usize]| uniform::<T>(r, s, -1.0, 1.0);
    let mut out: Vec<Case<T>> = Vec::new();
    let (a, b, w) = (u(r, &[3, 4]), u(r, &[1, 4]), u(r, &[3, 4]));
    out.push(binary("add", a, b, w, |t, a, b| t.add(a, b)));
    let (a, b, w) = (u(r, &[3, 4]), u(r, &[3, 1]), u(r, &[3, 4]));
    out.push(binary("sub", a, b, w, |t, a, b| t.sub(a, b)));
    let (a, b, w) = (u(r, &[3, 4]), u(r, &[3, 4]), u(r, &[3, 4]));
    out.push(binary("mul", a, b, w, |t, a, b| t.mul(a, b)));
    let (a, w) = (u(r, &[3, 4]), u(r, &[3, 4]));
    out.push(unary("scale", a, w, |t, a| Ok(t.scale(a, T::of(1.7)))));
    let (a, w) = (u(r, &[3, 4]), u(r, &[3, 4]));
    out.push(unary("add_scalar", a, w, |t, a| {
        Ok(t.add_scalar(t.square(a), T::of(0.3)))
    }));
    let (a, w) = (u(r, &[3, 4]), u(r, &[3, 4]));
    out.push(unary("neg", a, w, |t, a| Ok(t.neg(a))));
    let (a, b, w) = (u(r, &[3, 5]), u(r, &[5, 2]), u(r, &[3, 2]));
    out.push(binary("matmul", a, b, w, |t, a, b| t.matmul(a, b)));
    let (a, b, w) = (u(r, &[3, 2]), u(r, &[3, 4]), u(r, &[3, 6]));
    out.push(binary("concat", a, b, w, |t, a, b| t.concat(&[a, b], 1)));
    let (a, w) = (well_separated(r, &[4, 5]), u(r, &[4]));
    out.push(unary("max_over_axis", a, w, |t, a| t.max_over_axis(a, 1)));
    let (a, w) = (away_from_zero(r, &[3, 4]), u(r, &[3, 4]));
    out.push(unary("relu", a, w, |t, a| Ok(t.relu(a))));
    let (a, w) = (away_from_zero(r, &[3, 4]), u(r, &[3, 4]));
    out.push(unary("leaky_relu", a, w, |t, a| Ok(t.leaky_relu(a, T::of(0.2)))));
    let (a, w) = (u(r, &[3, 4]), u(r, &[3, 4]));
    out.push(unary("sigmoid", a, w, |t, a| Ok(t.sigmoid(a))));
    let (a, w) = (u(r, &[3, 4]), u(r, &[3, 4]));
    out.push(unary("exp", a, w, |t, a| Ok(t.exp(a))));
    let (a, w) = (away_from_zero(r, &[3, 4]), u(r, &[3, 4]));
    out.push(unary("abs", a, w, |t, a| Ok(t.abs(a))));
    let (a, w) = (uniform(r, &[3, 4], 0.5, 2.0), u(r, &[3, 4]));
    out.push(unary("sqrt", a, w, |t, a| Ok(t.sqrt(a))));
    let (a, w) = (u(r, &[3, 4]), u(r, &[3, 4]));
    out.push(unary("square", a, w, |t, a| Ok(t.square(a))));
    let (a, w) = (u(r, &[3, 4]), u(r, &[1]));
    out.push(unary("reduce_mean", a, w, |t, a| t.reduce_mean(t.square(a))));
    let (a, w) = (u(r, &[3, 4]), u(r, &[4]));
    out.push(unary("sum_axis", a, w, |t, a| t.sum_axis(a, 0)));
    let (a, w) = (u(r, &[3, 4]), u(r, &[4, 4]));
    out.push(unary("gather_rows", a, w, |t, a| t.gather_rows(a, &[2, 0, 2, 1])));
    let (a, w) = (u(r, &[3, 4]), u(r, &[2, 6]));
    out.push(unary("reshape", a, w, |t, a| t.reshape(a, &[2, 6])));
    let (a, w) = (u(r, &[3, 4]), u(r, &[3, 2]));
    out.push(unary("slice", a, w, |t, a| t.slice(a, 1, 1, 2)));
    out.push(mlp5(r));
    out
}

/// Gradient check of every tape operation and of a random 5-layer
/// perceptron, with inputs drawn from `seed`.
/// Differences are taken in `f64` for every `T`.
pub fn op_suite<T: Real>(seed: u64, eps: f64) -> Result<Vec<(&'static str, f64)>> {
    cases::<T>(seed)
        .into_iter()
        .zip(cases::<f64>(seed))
        .map(|((name, inputs, f), (_, _, reference))| {
            Ok((name, check_gradients_f64(&inputs, eps, f, reference)?.max_error()))
        })
        .collect()
}

/// Names covered by [`op_suite`].
pub fn op_suite_names() -> Vec<&'static str> {
    cases::<f64>(0).into_iter().map(|c| c.0).collect()
}

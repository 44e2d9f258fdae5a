use crate::autodiff::nn::{ParamId, ParamStore};
use crate::autodiff::tensor::Tensor;
use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamConfig {
    pub fn with_lr(lr: f64) -> Self {
        Self { lr, ..Self::default() }
    }
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Moment accumulators, created lazily the first time a parameter receives
/// a gradient.
#[derive(Clone, Debug)]
pub struct AdamState<T> {
    pub cfg: AdamConfig,
    first: Vec<Option<Tensor<T>>>,
    second: Vec<Option<Tensor<T>>>,
    step: u64,
}

impl<T: Real> AdamState<T> {
    pub fn new(cfg: AdamConfig) -> Self {
        Self {
            cfg,
            first: Vec::new(),
            second: Vec::new(),
            step: 0,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn set_lr(&mut self, lr: f64) {
        self.cfg.lr = lr;
    }
}

/// One bias-corrected Adam update of `params` along `grads`.
pub fn adam_step<T: Real>(
    params: &mut ParamStore<T>,
    grads: &[(ParamId, Tensor<T>)],
    state: &mut AdamState<T>,
) -> Result<()> {
    for (id, g) in grads {
        if g.shape() != params.get(*id).shape() {
            return Err(Error::Shape {
                op: "adam_step",
                lhs: params.get(*id).shape().to_vec(),
                rhs: g.shape().to_vec(),
            });
        }
        if !g.is_finite() {
            return Err(Error::NonFinite(format!("gradient of `{}`", params.name(*id))));
        }
    }
    if state.first.len() < params.len() {
        state.first.resize(params.len(), None);
        state.second.resize(params.len(), None);
    }
    state.step += 1;
    let AdamConfig { lr, beta1, beta2, eps } = state.cfg;
    let t = state.step as i32;
    let c1 = 1.0 - beta1.powi(t);
    let c2 = 1.0 - beta2.powi(t);
    let (b1, b2) = (T::of(beta1), T::of(beta2));
    let (one_b1, one_b2) = (T::of(1.0 - beta1), T::of(1.0 - beta2));
    for (id, g) in grads {
        let i = id.index();
        let shape = g.shape();
        let m = state.first[i].get_or_insert_with(|| Tensor::zeros(shape));
        let v = state.second[i].get_or_insert_with(|| Tensor::zeros(shape));
        let p = params.get_mut(*id).data_mut();
        for (((p, m), v), &g) in p.iter_mut().zip(m.data_mut()).zip(v.data_mut()).zip(g.data()) {
            *m = b1 * *m + one_b1 * g;
            *v = b2 * *v + one_b2 * g * g;
            let m_hat = m.as_f64() / c1;
            let v_hat = v.as_f64() / c2;
            *p -= T::of(lr * m_hat / (v_hat.sqrt() + eps));
        }
    }
    Ok(())
}

/// Running sum of per-example gradients for mini-batch updates.
#[derive(Clone, Debug, Default)]
pub struct GradSum<T> {
    sums: std::collections::BTreeMap<usize, (ParamId, Tensor<T>)>,
    count: usize,
}

impl<T: Real> GradSum<T> {
    pub fn new() -> Self {
        Self {
            sums: Default::default(),
            count: 0,
        }
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn add(&mut self, grads: Vec<(ParamId, Tensor<T>)>) {
        self.count += 1;
        for (id, g) in grads {
            match self.sums.get_mut(&id.index()) {
                Some((_, acc)) => {
                    for (a, &b) in acc.data_mut().iter_mut().zip(g.data()) {
                        *a += b;
                    }
                }
                None => {
                    self.sums.insert(id.index(), (id, g));
                }
            }
        }
    }

    /// Averaged gradients; resets the sum.
    pub fn take_mean(&mut self) -> Vec<(ParamId, Tensor<T>)> {
        let k = T::of(1.0 / self.count.max(1) as f64);
        self.count = 0;
        std::mem::take(&mut self.sums)
            .into_values()
            .map(|(id, g)| (id, g.map(|x| x * k)))
            .collect()
    }
}

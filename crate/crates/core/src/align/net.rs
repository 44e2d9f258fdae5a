use rand::Rng;

use crate::autodiff::{Activation, Binder, Init, Linear, ParamStore, Tape, Tensor, Trainable, Var};
use crate::encoders::{AlignEncoder, Plan, PointNetConfig};
use crate::error::{Error, Result};
use crate::geom::{Similarity, Vec3};
use crate::scalar::Real;

const HIDDEN: usize = 512;

/// Shared part encoder followed by a fully connected regressor from the
/// concatenated part codes to per-part `(log s, t)`.
#[derive(Clone, Debug)]
pub struct AlignNet {
    pub encoder: AlignEncoder,
    pub l1: Linear,
    pub l2: Linear,
    pub l3: Linear,
    pub slots: usize,
}

impl AlignNet {
    pub fn new<T: Real, R: Rng>(
        store: &mut ParamStore<T>,
        cfg: PointNetConfig,
        slots: usize,
        rng: &mut R,
    ) -> Result<Self> {
        if slots == 0 {
            return Err(Error::invalid("alignment needs at least one part slot"));
        }
        let encoder = AlignEncoder::new(store, cfg, rng)?;
        let w = encoder.width();
        let l1 = Linear::new(store, "align/l1", w * slots, HIDDEN, Init::XavierUniform, rng)?;
        let l2 = Linear::new(store, "align/l2", HIDDEN, HIDDEN, Init::XavierUniform, rng)?;
        let l3 = Linear::new(store, "align/l3", HIDDEN, 4 * slots, Init::Zeros, rng)?;
        Ok(Self {
            encoder,
            l1,
            l2,
            l3,
            slots,
        })
    }

    pub fn attach<T: Real>(store: &ParamStore<T>, cfg: PointNetConfig, slots: usize) -> Result<Self> {
        let encoder = AlignEncoder::attach(store, cfg)?;
        let l1 = Linear::attach(store, "align/l1")?;
        let l2 = Linear::attach(store, "align/l2")?;
        let l3 = Linear::attach(store, "align/l3")?;
        if l1.fan_in != encoder.width() * slots || l3.fan_out != 4 * slots {
            return Err(Error::Checkpoint(format!(
                "alignment regressor does not match {slots} slots"
            )));
        }
        Ok(Self {
            encoder,
            l1,
            l2,
            l3,
            slots,
        })
    }

    pub fn plan(&self, clouds: &[Option<&[Vec3]>]) -> Result<Vec<Option<Plan>>> {
        clouds
            .iter()
            .map(|c| c.map(|c| self.encoder.plan(c)).transpose())
            .collect()
    }

    /// Raw `1 x 4N` output with absent slots zeroed.
    pub fn forward<T: Real>(&self, bind: &Binder<T>, plans: &[Option<Plan>]) -> Result<Var> {
        if plans.len() != self.slots {
            return Err(Error::invalid(format!(
                "{} parts for {} slots",
                plans.len(),
                self.slots
            )));
        }
        let tape = bind.tape;
        let codes = plans
            .iter()
            .map(|p| self.encoder.forward(bind, p.as_ref()))
            .collect::<Result<Vec<_>>>()?;
        let x = tape.concat(&codes, 1)?;
        let act = Activation::LeakyRelu(crate::encoders::LEAKY_SLOPE);
        let h1 = act.apply(tape, self.l1.forward(bind, x)?);
        let h2 = act.apply(tape, self.l2.forward(bind, h1)?);
        let raw = self.l3.forward(bind, tape.add(h2, h1)?)?;
        let mask: Vec<T> = plans
            .iter()
            .flat_map(|p| [if p.is_some() { T::one() } else { T::zero() }; 4])
            .collect();
        tape.mul(raw, tape.constant(Tensor::new(vec![1, 4 * self.slots], mask)?))
    }

    /// Predicted transforms, identity for absent slots.
    pub fn predict<T: Real>(&self, store: &ParamStore<T>, clouds: &[Option<&[Vec3]>]) -> Result<Vec<Similarity>> {
        let plans = self.plan(clouds)?;
        let tape = Tape::new();
        let bind = Binder::new(&tape, store, Trainable::Nothing);
        let raw = self.forward(&bind, &plans)?;
        let out = transforms_from_raw(&tape.value(raw).to_f64_vec());
        Ok(out
            .into_iter()
            .zip(&plans)
            .map(|(x, p)| if p.is_some() { x } else { Similarity::IDENTITY })
            .collect())
    }
}

/// Decodes `(log s, tx, ty, tz)` quadruples.
pub fn transforms_from_raw(raw: &[f64]) -> Vec<Similarity> {
    raw.chunks(4)
        .map(|c| Similarity::new(c[0].exp(), Vec3::new(c[1], c[2], c[3])))
        .collect()
}

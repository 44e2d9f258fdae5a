use rand::Rng;

use crate::autodiff::{Activation, Binder, Init, Linear, ParamStore, Tape, Tensor, Trainable, Var};
use crate::encoders::LEAKY_SLOPE;
use crate::error::{Error, Result};
use crate::geom::Vec3;
use crate::scalar::Real;

/// Implicit occupancy decoder over `[codes, p]` with the query point also
/// concatenated into the second hidden layer.
#[derive(Clone, Debug)]
pub struct ImplicitDecoder {
    pub code_width: usize,
    /// First hidden layer, split into its code and point columns.
    pub l1_code: Linear,
    pub l1_point: Linear,
    pub hidden: Vec<Linear>,
    pub out: Linear,
    /// Factor applied to query points before they enter the network.
    pub point_scale: f64,
}

pub const DECODER_HIDDEN: [usize; 4] = [1024, 512, 256, 128];

impl ImplicitDecoder {
    pub const PREFIX: &'static str = "dec";

    pub fn new<T: Real, R: Rng>(
        store: &mut ParamStore<T>,
        code_width: usize,
        widths: &[usize],
        rng: &mut R,
    ) -> Result<Self> {
        if widths.len() < 2 {
            return Err(Error::invalid("decoder needs at least two hidden layers"));
        }
        let p = Self::PREFIX;
        let l1_code = Linear::new(
            store,
            &format!("{p}/l0_code"),
            code_width,
            widths[0],
            Init::XavierUniform,
            rng,
        )?;
        let l1_point = Linear::new(store, &format!("{p}/l0_point"), 3, widths[0], Init::XavierUniform, rng)?;
        let mut hidden = Vec::new();
        for i in 1..widths.len() {
            let fan_in = widths[i - 1] + if i == 1 { 3 } else { 0 };
            hidden.push(Linear::new(
                store,
                &format!("{p}/l{i}"),
                fan_in,
                widths[i],
                Init::XavierUniform,
                rng,
            )?);
        }
        let out = Linear::new(
            store,
            &format!("{p}/out"),
            widths[widths.len() - 1],
            1,
            Init::XavierUniform,
            rng,
        )?;
        Ok(Self {
            code_width,
            l1_code,
            l1_point,
            hidden,
            out,
            point_scale: 1.0,
        })
    }

    pub fn attach<T: Real>(store: &ParamStore<T>, depth: usize) -> Result<Self> {
        let p = Self::PREFIX;
        let l1_code = Linear::attach(store, &format!("{p}/l0_code"))?;
        let l1_point = Linear::attach(store, &format!("{p}/l0_point"))?;
        let hidden = (1..depth)
            .map(|i| Linear::attach(store, &format!("{p}/l{i}")))
            .collect::<Result<Vec<_>>>()?;
        let out = Linear::attach(store, &format!("{p}/out"))?;
        Ok(Self {
            code_width: l1_code.fan_in,
            l1_code,
            l1_point,
            hidden,
            out,
            point_scale: 1.0,
        })
    }

    pub fn with_point_scale(mut self, s: f64) -> Self {
        self.point_scale = s;
        self
    }

    /// Input width: concatenated codes plus the query point.
    pub fn input_width(&self) -> usize {
        self.code_width + 3
    }

    pub fn widths(&self) -> Vec<usize> {
        std::iter::once(self.l1_code.fan_out)
            .chain(self.hidden.iter().map(|l| l.fan_out))
            .collect()
    }

    /// Occupancy `P x 1` for `points` (`P x 3`) under `code` (`1 x code_width`).
    pub fn forward<T: Real>(&self, bind: &Binder<T>, code: Var, points: Var) -> Result<Var> {
        let tape = bind.tape;
        if tape.shape(code) != [1, self.code_width] {
            return Err(Error::Shape {
                op: "decoder code",
                lhs: tape.shape(code),
                rhs: vec![1, self.code_width],
            });
        }
        let act = Activation::LeakyRelu(LEAKY_SLOPE);
        let points = if self.point_scale == 1.0 {
            points
        } else {
            tape.scale(points, T::of(self.point_scale))
        };
        let c = self.l1_code.forward(bind, code)?;
        let p = self.l1_point.forward(bind, points)?;
        let mut h = act.apply(tape, tape.add(p, c)?);
        for (i, l) in self.hidden.iter().enumerate() {
            let x = if i == 0 { tape.concat(&[h, points], 1)? } else { h };
            h = act.apply(tape, l.forward(bind, x)?);
        }
        Ok(tape.sigmoid(self.out.forward(bind, h)?))
    }

    /// Batched evaluation without gradients.
    pub fn eval<T: Real>(&self, store: &ParamStore<T>, code: &[f64], points: &[Vec3]) -> Result<Vec<f64>> {
        const CHUNK: usize = 4096;
        let mut out = Vec::with_capacity(points.len());
        let code_t = Tensor::from_f64(&[1, code.len()], code)?;
        for chunk in points.chunks(CHUNK) {
            let tape = Tape::new();
            let bind = Binder::new(&tape, store, Trainable::Nothing);
            let c = tape.constant(code_t.clone());
            let p = tape.constant(Tensor::from_points(chunk));
            let f = self.forward(&bind, c, p)?;
            out.extend(tape.value(f).to_f64_vec());
        }
        Ok(out)
    }

    /// Zeroes the output layer so every query returns 0.5.
    pub fn zero_output<T: Real>(&self, store: &mut ParamStore<T>) {
        store.get_mut(self.out.w).data_mut().fill(T::zero());
        store.get_mut(self.out.b).data_mut().fill(T::zero());
    }
}

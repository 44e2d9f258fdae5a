use crate::autodiff::{Binder, ParamId, ParamStore, Tensor, Var};
use crate::error::Result;
use crate::geom::Vec3;
use crate::jointsynth::ImplicitDecoder;
use crate::scalar::Real;

/// Differentiable occupancy field: `P x 3` points to `P x 1` values.
pub trait Field<T: Real> {
    fn forward(&self, bind: &Binder<T>, points: Var) -> Result<Var>;
}

/// The implicit decoder with fixed part codes.
#[derive(Clone, Debug)]
pub struct CodedDecoder<'a> {
    pub decoder: &'a ImplicitDecoder,
    pub code: Vec<f64>,
}

impl<T: Real> Field<T> for CodedDecoder<'_> {
    fn forward(&self, bind: &Binder<T>, points: Var) -> Result<Var> {
        let code = bind.tape.constant(Tensor::from_f64(&[1, self.code.len()], &self.code)?);
        self.decoder.forward(bind, code, points)
    }
}

/// Smoothed indicator of a half-space or ball, `σ(κ·signed depth)`.
#[derive(Clone, Debug)]
pub enum SigmoidField {
    /// Inside where `p·normal < offset`.
    HalfSpace {
        normal: ParamId,
        offset: ParamId,
        sharpness: f64,
    },
    /// Inside the ball.
    Ball {
        center: ParamId,
        radius: ParamId,
        sharpness: f64,
    },
}

impl SigmoidField {
    pub fn half_space<T: Real>(store: &mut ParamStore<T>, normal: Vec3, offset: f64, sharpness: f64) -> Result<Self> {
        let n = normal.normalize();
        Ok(SigmoidField::HalfSpace {
            normal: store.add("field/normal", Tensor::from_f64(&[3, 1], &[n.x, n.y, n.z])?)?,
            offset: store.add("field/offset", Tensor::from_f64(&[1, 1], &[offset])?)?,
            sharpness,
        })
    }

    pub fn ball<T: Real>(store: &mut ParamStore<T>, center: Vec3, radius: f64, sharpness: f64) -> Result<Self> {
        Ok(SigmoidField::Ball {
            center: store.add(
                "field/center",
                Tensor::from_f64(&[1, 3], &[center.x, center.y, center.z])?,
            )?,
            radius: store.add("field/radius", Tensor::from_f64(&[1, 1], &[radius])?)?,
            sharpness,
        })
    }
}

impl<T: Real> Field<T> for SigmoidField {
    fn forward(&self, bind: &Binder<T>, points: Var) -> Result<Var> {
        let tape = bind.tape;
        let (depth, k) = match self {
            SigmoidField::HalfSpace {
                normal,
                offset,
                sharpness,
            } => {
                let d = tape.matmul(points, bind.param(*normal))?;
                (tape.sub(bind.param(*offset), d)?, *sharpness)
            }
            SigmoidField::Ball {
                center,
                radius,
                sharpness,
            } => {
                let diff = tape.sub(points, bind.param(*center))?;
                let r = tape.sqrt(tape.sum_axis(tape.square(diff), 1)?);
                (tape.sub(bind.param(*radius), r)?, *sharpness)
            }
        };
        Ok(tape.sigmoid(tape.scale(depth, T::of(k))))
    }
}

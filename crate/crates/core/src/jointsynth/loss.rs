use crate::autodiff::{Tape, Tensor, Var};
use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossConfig {
    pub alpha: f64,
    pub lambda: f64,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self {
            alpha: 0.2,
            lambda: 0.005,
        }
    }
}

/// `mean (f − F)²`.
pub fn loss_mse(f: &[f64], labels: &[f64]) -> Result<f64> {
    if f.len() != labels.len() {
        return Err(Error::invalid("occupancy and label counts differ"));
    }
    if f.is_empty() {
        return Err(Error::Empty("occupancy samples"));
    }
    Ok(f.iter().zip(labels).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / f.len() as f64)
}

/// `1/(2|N|) Σ f(p+λn)² + (f(p−λn) − 1)²` from the two probe evaluations.
pub fn loss_match(f_plus: &[f64], f_minus: &[f64]) -> Result<f64> {
    if f_plus.len() != f_minus.len() {
        return Err(Error::invalid("probe counts differ"));
    }
    if f_plus.is_empty() {
        return Err(Error::Empty("joint boundary set"));
    }
    let s: f64 = f_plus
        .iter()
        .zip(f_minus)
        .map(|(a, b)| a * a + (b - 1.0) * (b - 1.0))
        .sum();
    Ok(s / (2.0 * f_plus.len() as f64))
}

pub fn loss_mse_on_tape<T: Real>(tape: &Tape<T>, f: Var, labels: &[f64]) -> Result<Var> {
    let n = labels.len();
    if tape.shape(f) != [n, 1] || n == 0 {
        return Err(Error::Shape {
            op: "loss_mse",
            lhs: tape.shape(f),
            rhs: vec![n, 1],
        });
    }
    let target = tape.constant(Tensor::from_f64(&[n, 1], labels)?);
    tape.reduce_mean(tape.square(tape.sub(f, target)?))
}

pub fn loss_match_on_tape<T: Real>(tape: &Tape<T>, f_plus: Var, f_minus: Var) -> Result<Var> {
    if tape.shape(f_plus) != tape.shape(f_minus) {
        return Err(Error::Shape {
            op: "loss_match",
            lhs: tape.shape(f_plus),
            rhs: tape.shape(f_minus),
        });
    }
    let a = tape.reduce_mean(tape.square(f_plus))?;
    let b = tape.reduce_mean(tape.square(tape.add_scalar(f_minus, -T::one())))?;
    Ok(tape.scale(tape.add(a, b)?, T::of(0.5)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constants() {
        assert_eq!(loss_mse(&[0.5, 0.5], &[0.0, 1.0]).unwrap(), 0.25);
        assert_eq!(loss_match(&[0.5; 7], &[0.5; 7]).unwrap(), 0.25);
        assert_eq!(loss_match(&[0.0; 3], &[1.0; 3]).unwrap(), 0.0);
        assert!(loss_mse(&[], &[]).is_err());
        assert!(loss_match(&[0.1], &[]).is_err());
    }

    #[test]
    fn tape_matches_plain() {
        let tape = Tape::<f64>::new();
        let fp = [0.1, 0.7, 0.3];
        let fm = [0.9, 0.2, 0.6];
        let a = tape.constant(Tensor::from_f64(&[3, 1], &fp).unwrap());
        let b = tape.constant(Tensor::from_f64(&[3, 1], &fm).unwrap());
        let m = loss_match_on_tape(&tape, a, b).unwrap();
        assert!((tape.value(m).item() - loss_match(&fp, &fm).unwrap()).abs() < 1e-15);
        let e = loss_mse_on_tape(&tape, a, &fm).unwrap();
        assert!((tape.value(e).item() - loss_mse(&fp, &fm).unwrap()).abs() < 1e-15);
    }
}

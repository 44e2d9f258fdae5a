use crate::align::hungarian::hungarian;
use crate::autodiff::{Tape, Tensor, Var};
use crate::error::{Error, Result};
use crate::geom::Vec3;
use crate::scalar::Real;

/// Optimal one-to-one matching of `a` onto `b` under Euclidean cost:
/// `assign[i]` is the point of `b` matched to `a[i]`.
pub fn emd_assignment(a: &[Vec3], b: &[Vec3]) -> Result<Vec<usize>> {
    if a.len() != b.len() {
        return Err(Error::invalid(format!(
            "earth mover's distance needs equal sizes, got {} and {}",
            a.len(),
            b.len()
        )));
    }
    let n = a.len();
    let mut cost = Vec::with_capacity(n * n);
    for p in a {
        for q in b {
            cost.push((p - q).norm());
        }
    }
    Ok(hungarian(&cost, n)?.0)
}

/// Mean Euclidean cost of the optimal assignment.
pub fn emd_loss(a: &[Vec3], b: &[Vec3]) -> Result<f64> {
    if a.is_empty() {
        return Err(Error::Empty("earth mover's distance input"));
    }
    let assign = emd_assignment(a, b)?;
    let total: f64 = assign.iter().enumerate().map(|(i, &j)| (a[i] - b[j]).norm()).sum();
    Ok(total / a.len() as f64)
}

/// Differentiable mean matched distance between `pred` (`n x 3` on the
/// tape) and fixed targets, with the assignment held fixed.
pub fn emd_on_tape<T: Real>(tape: &Tape<T>, pred: Var, target: &[Vec3]) -> Result<Var> {
    let vals = tape.value(pred);
    if vals.shape() != [target.len(), 3] {
        return Err(Error::Shape {
            op: "emd",
            lhs: vals.shape().to_vec(),
            rhs: vec![target.len(), 3],
        });
    }
    let pts: Vec<Vec3> = vals
        .data()
        .chunks(3)
        .map(|c| Vec3::new(c[0].as_f64(), c[1].as_f64(), c[2].as_f64()))
        .collect();
    let assign = emd_assignment(&pts, target)?;
    let matched: Vec<Vec3> = assign.iter().map(|&j| target[j]).collect();
    let diff = tape.sub(pred, tape.constant(Tensor::from_points(&matched)))?;
    let sq = tape.sum_axis(tape.square(diff), 1)?;
    // Small floor keeps the gradient finite at coincident pairs.
    let d = tape.sqrt(tape.add_scalar(sq, T::of(1e-12)));
    tape.reduce_mean(d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::v3;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cloud(n: usize, seed: u64) -> Vec<Vec3> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| v3(rng.random(), rng.random(), rng.random())).collect()
    }

    #[test]
    fn identical_and_permuted_sets_are_zero() {
        let a = cloud(20, 1);
        assert_eq!(emd_loss(&a, &a).unwrap(), 0.0);
        let mut b = a.clone();
        b.reverse();
        assert_eq!(emd_loss(&a, &b).unwrap(), 0.0);
    }

    #[test]
    fn translation_costs_its_length() {
        let a = cloud(16, 2);
        let d = v3(0.01, -0.02, 0.005);
        let b: Vec<Vec3> = a.iter().map(|p| p + d).collect();
        assert!((emd_loss(&a, &b).unwrap() - d.norm()).abs() < 1e-12);
    }

    #[test]
    fn symmetric() {
        let (a, b) = (cloud(24, 3), cloud(24, 4));
        assert!((emd_loss(&a, &b).unwrap() - emd_loss(&b, &a).unwrap()).abs() < 1e-12);
        assert!(emd_loss(&a, &b[..10]).is_err());
    }

    #[test]
    fn tape_value_matches_plain() {
        let (a, b) = (cloud(12, 5), cloud(12, 6));
        let tape = Tape::<f64>::new();
        let p = tape.param(Tensor::from_points(&a));
        let l = emd_on_tape(&tape, p, &b).unwrap();
        assert!((tape.value(l).item() - emd_loss(&a, &b).unwrap()).abs() < 1e-6);
        let g = tape.backward(l).unwrap();
        assert!(g.get(p).unwrap().is_finite());
    }
}

use coalesce::autodiff::{check_gradients, op_suite, op_suite_names, Tape, Tensor};
use proptest::prelude::*;

#[test]
fn every_op_passes_in_64_bit() {
    for seed in 0..20 {
        for (name, err) in op_suite::<f64>(seed, 1e-5).unwrap() {
            assert!(err < 1e-6, "{name} seed {seed}: {err:e}");
        }
    }
}

#[test]
fn every_op_passes_in_32_bit() {
    for seed in 0..20 {
        for (name, err) in op_suite::<f32>(seed, 1e-5).unwrap() {
            assert!(err < 1e-3, "{name} seed {seed}: {err:e}");
        }
    }
}

#[test]
fn suite_covers_the_op_set() {
    let names = op_suite_names();
    for op in [
        "add",
        "sub",
        "mul",
        "scale",
        "add_scalar",
        "neg",
        "matmul",
        "concat",
        "max_over_axis",
        "relu",
        "leaky_relu",
        "sigmoid",
        "exp",
        "abs",
        "sqrt",
        "square",
        "reduce_mean",
        "sum_axis",
        "gather_rows",
        "reshape",
        "slice",
        "mlp5",
    ] {
        assert!(names.contains(&op), "{op}");
    }
}

#[test]
fn a_wrong_gradient_is_detected() {
    let x = Tensor::<f64>::from_f64(&[1, 3], &[0.3, -0.2, 0.7]).unwrap();
    // |x| has a kink at 0; shifting the probe across it breaks agreement.
    let check = check_gradients(&[x], 0.5, |t, v| t.reduce_mean(t.abs(v[0]))).unwrap();
    assert!(check.max_error() > 1e-3);
}

proptest! {
    #[test]
    fn square_gradient_is_twice_the_input(v in proptest::collection::vec(-10.0f64..10.0, 1..16)) {
        let n = v.len();
        let tape = Tape::<f64>::new();
        let x = tape.param(Tensor::from_f64(&[1, n], &v).unwrap());
        let y = tape.sum_axis(tape.square(x), 1).unwrap();
        let g = tape.backward(y).unwrap();
        for (gi, vi) in g.get(x).unwrap().data().iter().zip(&v) {
            prop_assert_eq!(*gi, 2.0 * vi);
        }
    }

    #[test]
    fn reduce_mean_gradient_is_uniform(v in proptest::collection::vec(-10.0f64..10.0, 1..32)) {
        let n = v.len();
        let tape = Tape::<f64>::new();
        let x = tape.param(Tensor::from_f64(&[n, 1], &v).unwrap());
        let y = tape.reduce_mean(x).unwrap();
        let g = tape.backward(y).unwrap();
        prop_assert!(g.get(x).unwrap().data().iter().all(|&gi| gi == 1.0 / n as f64));
    }
}

//! Minimal dense reverse-mode automatic differentiation.

pub mod gradcheck;
mod graph;
mod matrix;

pub use graph::{Graph, Var};
pub use matrix::Matrix;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TensorError {
    #[error("{op}: shape mismatch between {left:?} and {right:?}")]
    ShapeMismatch {
        op: &'static str,
        left: (usize, usize),
        right: (usize, usize),
    },
    #[error("{op}: input {value} outside the function's domain")]
    Domain { op: &'static str, value: f64 },
    #[error("backward requires a 1x1 loss, got {shape:?}")]
    NonScalarLoss { shape: (usize, usize) },
    #[error("backward called on an empty tape")]
    EmptyTape,
}

#[cfg(test)]
mod tests {
    use super::gradcheck::{check_gradients, GradCheckConfig};
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(rng: &mut ChaCha8Rng, r: usize, c: usize) -> Matrix {
        Matrix::from_fn(r, c, |_, _| rng.random_range(-1.0..1.0))
    }

    #[test]
    fn sigmoid_at_zero_is_half() {
        let mut g = Graph::new();
        let x = g.param(Matrix::scalar(0.0));
        let y = g.sigmoid(x);
        assert_eq!(g.value(y).item(), 0.5);
    }

    #[test]
    fn sigmoid_derivative_matches_central_difference() {
        let mut g = Graph::new();
        let x = g.param(Matrix::scalar(0.0));
        let y = g.sigmoid(x);
        g.backward(y).unwrap();
        let analytic = g.grad(x).unwrap().item();
        assert_eq!(analytic, 0.25);

        let s = |x: f64| 1.0 / (1.0 + (-x).exp());
        let h = 1e-5;
        let numeric = (s(h) - s(-h)) / (2.0 * h);
        assert!((analytic - numeric).abs() < 1e-8, "{analytic} vs {numeric}");
    }

    #[test]
    fn matmul_by_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let b = random(&mut rng, 3, 3);
        let mut g = Graph::new();
        let i = g.constant(Matrix::identity(3));
        let bv = g.constant(b.clone());
        let out = g.matmul(i, bv).unwrap();
        assert_eq!(g.value(out), &b);
    }

    #[test]
    fn linear_map_gradient_is_outer_product() {
        // loss = sum(W x): dW[i][j] = x[j] for every row i.
        let w = Matrix::from_fn(3, 4, |i, j| (i as f64) - (j as f64) * 0.5);
        let x = Matrix::from_vec(4, 1, vec![0.5, -1.0, 2.0, 3.0]);
        let mut g = Graph::new();
        let wv = g.param(w);
        let xv = g.constant(x.clone());
        let y = g.matmul(wv, xv).unwrap();
        let loss = g.sum(y);
        g.backward(loss).unwrap();
        let grad = g.grad(wv).unwrap();
        for i in 0..3 {
            assert_eq!(grad.row(i), x.as_slice());
        }
    }

    #[test]
    fn l1_gradient_of_positive_matrix_is_ones() {
        let mut g = Graph::new();
        let m = g.param(Matrix::from_fn(3, 3, |i, j| 0.1 + (i + j) as f64));
        let loss = g.abs_sum(m);
        g.backward(loss).unwrap();
        assert_eq!(g.grad(m).unwrap(), &Matrix::ones(3, 3));
    }

    #[test]
    fn abs_subgradient_is_zero_at_zero() {
        let mut g = Graph::new();
        let m = g.param(Matrix::row_vector(&[-2.0, 0.0, 3.0]));
        let loss = g.abs_sum(m);
        g.backward(loss).unwrap();
        assert_eq!(g.grad(m).unwrap().as_slice(), &[-1.0, 0.0, 1.0]);
    }

    #[test]
    fn relu_subgradient_is_zero_at_zero() {
        let mut g = Graph::new();
        let m = g.param(Matrix::row_vector(&[-2.0, 0.0, 3.0]));
        let r = g.relu(m);
        let loss = g.sum(r);
        g.backward(loss).unwrap();
        assert_eq!(g.grad(m).unwrap().as_slice(), &[0.0, 0.0, 1.0]);
    }

    #[test]
    fn shape_errors_name_the_operation() {
        let mut g = Graph::new();
        let a = g.constant(Matrix::zeros(2, 3));
        let b = g.constant(Matrix::zeros(2, 3));
        let err = g.matmul(a, b).unwrap_err();
        assert_eq!(
            err,
            TensorError::ShapeMismatch {
                op: "matmul",
                left: (2, 3),
                right: (2, 3)
            }
        );
        assert!(err.to_string().contains("matmul"));
        let c = g.constant(Matrix::zeros(3, 2));
        assert!(matches!(
            g.add(a, c),
            Err(TensorError::ShapeMismatch { op: "add", .. })
        ));
    }

    #[test]
    fn log_rejects_non_positive_input() {
        let mut g = Graph::new();
        let a = g.constant(Matrix::row_vector(&[1.0, 0.0]));
        assert!(matches!(
            g.log(a),
            Err(TensorError::Domain { op: "log", .. })
        ));
    }

    #[test]
    fn non_scalar_loss_and_empty_tape_are_errors() {
        let mut g = Graph::new();
        assert_eq!(
            g.backward(Var::from_raw_for_tests(0)),
            Err(TensorError::EmptyTape)
        );
        let a = g.param(Matrix::zeros(2, 2));
        assert_eq!(
            g.backward(a),
            Err(TensorError::NonScalarLoss { shape: (2, 2) })
        );
    }

    #[test]
    fn unreachable_leaves_get_zero_gradients() {
        let mut g = Graph::new();
        let a = g.param(Matrix::ones(2, 2));
        let b = g.param(Matrix::ones(1, 3));
        let loss = g.sum(a);
        g.backward(loss).unwrap();
        assert_eq!(g.grad(b).unwrap(), &Matrix::zeros(1, 3));
    }

    #[test]
    fn shared_leaf_accumulates_branch_gradients() {
        // f(x) = sum(tanh(x) * x) + sum(sigmoid(x)); compare against a graph
        // that computes each branch from its own copy of x and adds grads.
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let x = random(&mut rng, 3, 2);

        let mut g = Graph::new();
        let xv = g.param(x.clone());
        let t = g.tanh(xv);
        let p = g.mul(t, xv).unwrap();
        let s1 = g.sum(p);
        let sg = g.sigmoid(xv);
        let s2 = g.sum(sg);
        let loss = g.add(s1, s2).unwrap();
        g.backward(loss).unwrap();
        let shared = g.grad(xv).unwrap().clone();

        let mut h = Graph::new();
        let x1 = h.param(x.clone());
        let x2 = h.param(x.clone());
        let x3 = h.param(x.clone());
        let t = h.tanh(x1);
        let p = h.mul(t, x2).unwrap();
        let s1 = h.sum(p);
        let sg = h.sigmoid(x3);
        let s2 = h.sum(sg);
        let loss = h.add(s1, s2).unwrap();
        h.backward(loss).unwrap();
        let split = h
            .grad(x1)
            .unwrap()
            .add(h.grad(x2).unwrap())
            .add(h.grad(x3).unwrap());
        assert!(shared.max_abs_diff(&split) < 1e-15);

        // Doubling: a leaf used twice in `x + x` gets exactly 2.
        let mut d = Graph::new();
        let xv = d.param(x);
        let twice = d.add(xv, xv).unwrap();
        let loss = d.sum(twice);
        d.backward(loss).unwrap();
        assert!(d.grad(xv).unwrap().as_slice().iter().all(|&v| v == 2.0));
    }

    /// Exercises every primitive in one random composite and compares against
    /// central differences over 50 seeds.
    #[test]
    fn composite_graph_matches_finite_differences() {
        for seed in 0..50 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let inputs = vec![
                random(&mut rng, 5, 4),
                random(&mut rng, 4, 3),
                random(&mut rng, 1, 3),
                random(&mut rng, 5, 2),
            ];
            let f = |g: &mut Graph, v: &[Var]| -> Result<Var, TensorError> {
                let h = g.matmul(v[0], v[1])?;
                let h = g.add_row(h, v[2])?;
                let t = g.tanh(h);
                let c = g.concat_cols(t, v[3])?;
                let s = g.sigmoid(c);
                let ct = g.transpose(s);
                let prod = g.matmul(ct, s)?; // 5x5
                let sm = g.softmax_rows(prod)?;
                let lg = g.log(sm)?;
                let ls = g.log_softmax_rows(prod)?;
                let diff = g.sub(lg, ls)?;
                let rm = g.row_mean(c);
                let cm = g.col_mean(c);
                let br = g.broadcast_rows(cm, 5)?;
                let mixed = g.mul(br, c)?;
                let flat = g.reshape(mixed, 1, 25)?;
                let shifted = g.add_scalar(v[3], 3.0);
                let l1 = g.abs_sum(shifted);
                let a = g.sum(diff);
                let b = g.sum(rm);
                let c2 = g.sum(flat);
                let s = g.add(a, b)?;
                let s = g.add(s, c2)?;
                let s = g.add(s, l1)?;
                let sq = g.mul(prod, prod)?;
                let sq = g.mean(sq);
                let sq = g.scale(sq, 0.01);
                g.add(s, sq)
            };
            let report = check_gradients(&inputs, f, &GradCheckConfig::default()).unwrap();
            assert!(report.max_rel_error < 1e-4, "seed {seed}: {report:?}");
        }
    }

    #[test]
    fn identical_inputs_give_bit_identical_results() {
        let run = || {
            let mut rng = ChaCha8Rng::seed_from_u64(5);
            let mut g = Graph::new();
            let a = g.param(random(&mut rng, 4, 4));
            let b = g.tanh(a);
            let c = g.matmul(b, a).unwrap();
            let l = g.sum(c);
            g.backward(l).unwrap();
            (g.value(l).clone(), g.grad(a).unwrap().clone())
        };
        assert_eq!(run(), run());
    }
}

//! Central-difference gradient checking.

use crate::tensor::{Matrix, SeededRng};

/// Central-difference estimate of `∇f` at `x`.
pub fn numeric_gradient(mut f: impl FnMut(&[f64]) -> f64, x: &[f64], eps: f64) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            let orig = probe[i];
            probe[i] = orig + eps;
            let plus = f(&probe);
            probe[i] = orig - eps;
            let minus = f(&probe);
            probe[i] = orig;
            (plus - minus) / (2.0 * eps)
        })
        .collect()
}

/// `max_i |a_i − n_i| / max(|a_i|, |n_i|, 1e-8)`.
pub fn max_relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    assert_eq!(analytic.len(), numeric.len(), "gradient length mismatch");
    analytic
        .iter()
        .zip(numeric)
        .map(|(a, n)| (a - n).abs() / a.abs().max(n.abs()).max(1e-8))
        .fold(0.0, f64::max)
}

/// Compares an analytic gradient against central differences of `f` and
/// returns the worst relative error.
pub fn grad_check(f: impl FnMut(&[f64]) -> f64, x: &[f64], analytic: &[f64], eps: f64) -> f64 {
    max_relative_error(analytic, &numeric_gradient(f, x, eps))
}

/// Random projection weights: checking `Σ y ⊙ R` exercises every output
/// entry with a distinct upstream gradient.
pub fn projection(rows: usize, cols: usize, rng: &mut SeededRng) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| {
        rng.uniform(0.5, 1.5) * if rng.bernoulli(0.5) { 1.0 } else { -1.0 }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_linear_derivative() {
        let err = grad_check(|w| 3.0 * w[0], &[0.37], &[3.0], 1e-5);
        assert!(err < 1e-10, "{err}");
    }

    #[test]
    fn detects_one_percent_corruption() {
        let x = [0.3, -1.2, 0.8];
        let f = |v: &[f64]| v.iter().map(|t| t.sin() * t).sum::<f64>();
        let exact: Vec<f64> = x.iter().map(|t: &f64| t.cos() * t + t.sin()).collect();
        assert!(grad_check(f, &x, &exact, 1e-5) < 1e-8);
        let corrupted: Vec<f64> = exact.iter().map(|g| g * 1.01).collect();
        assert!(grad_check(f, &x, &corrupted, 1e-5) > 1e-3);
    }

    #[test]
    fn tiny_gradients_use_floor() {
        assert_eq!(max_relative_error(&[0.0], &[0.0]), 0.0);
        assert!((max_relative_error(&[1e-10], &[0.0]) - 1e-2).abs() < 1e-12);
    }
}

//! Inverted dropout. The mask holds 1 for kept entries and 0 for dropped ones;
//! survivors are scaled by `1/(1 − rate)` so inference is the identity.

use super::Phase;
use crate::error::{Error, Result};
use crate::tensor::{Matrix, SeededRng};

pub const DEFAULT_RATE: f64 = 0.5;

fn check_rate(rate: f64) -> Result<()> {
    if (0.0..1.0).contains(&rate) {
        Ok(())
    } else {
        Err(Error::Config(format!("dropout rate {rate} outside [0, 1)")))
    }
}

pub fn dropout_forward(x: &Matrix, rate: f64, phase: Phase, rng: &mut SeededRng) -> Result<(Matrix, Matrix)> {
    check_rate(rate)?;
    match phase {
        Phase::Infer => Ok((x.clone(), Matrix::filled(x.rows(), x.cols(), 1.0))),
        Phase::Train => {
            let mask = if rate == 0.0 {
                Matrix::filled(x.rows(), x.cols(), 1.0)
            } else {
                Matrix::from_fn(x.rows(), x.cols(), |_, _| if rng.bernoulli(rate) { 0.0 } else { 1.0 })
            };
            let y = dropout_with_mask(x, &mask, rate)?;
            Ok((y, mask))
        }
    }
}

/// Deterministic dropout with a caller-supplied keep mask.
pub fn dropout_with_mask(x: &Matrix, mask: &Matrix, rate: f64) -> Result<Matrix> {
    check_rate(rate)?;
    if rate == 0.0 {
        // x·1·1 == x; keep the pass-through bitwise.
        return x.mul(mask);
    }
    let keep = 1.0 / (1.0 - rate);
    Ok(x.mul(mask)?.scale(keep))
}

pub fn dropout_backward(grad_out: &Matrix, mask: &Matrix, rate: f64) -> Result<Matrix> {
    dropout_with_mask(grad_out, mask, rate)
}

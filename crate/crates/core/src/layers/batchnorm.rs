//! Batch normalization over the batch axis.
//!
//! Train mode normalizes with the biased batch variance and reports the
//! updated running statistics; the caller decides whether to commit them, so
//! forward never mutates the parameter container.

use super::Phase;
use crate::error::{Error, Result};
use crate::tensor::Matrix;

pub const DEFAULT_MOMENTUM: f64 = 0.9;
pub const DEFAULT_EPSILON: f64 = 1e-5;

#[derive(Debug, Clone, PartialEq)]
pub struct BatchNormParams {
    pub gamma: Matrix,
    pub beta: Matrix,
    pub running_mean: Matrix,
    pub running_var: Matrix,
    /// Weight kept on the old running value per update.
    pub momentum: f64,
    pub epsilon: f64,
}

impl BatchNormParams {
    /// `gamma = 1`, `beta = 0`, running mean 0 and running variance 1.
    pub fn new(features: usize) -> Self {
        BatchNormParams {
            gamma: Matrix::filled(features, 1, 1.0),
            beta: Matrix::zeros(features, 1),
            running_mean: Matrix::zeros(features, 1),
            running_var: Matrix::filled(features, 1, 1.0),
            momentum: DEFAULT_MOMENTUM,
            epsilon: DEFAULT_EPSILON,
        }
    }

    pub fn features(&self) -> usize {
        self.gamma.rows()
    }

    pub fn apply_running(&mut self, stats: RunningStats) {
        self.running_mean = stats.mean;
        self.running_var = stats.var;
    }
}

/// Running statistics after one train-mode batch.
#[derive(Debug, Clone)]
pub struct RunningStats {
    pub mean: Matrix,
    pub var: Matrix,
}

#[derive(Debug, Clone)]
pub struct BatchNormCache {
    phase: Phase,
    x_hat: Matrix,
    inv_std: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct BatchNormGrads {
    pub gamma: Matrix,
    pub beta: Matrix,
    pub input: Matrix,
}

pub fn batchnorm_forward(
    x: &Matrix,
    p: &BatchNormParams,
    phase: Phase,
) -> Result<(Matrix, BatchNormCache, Option<RunningStats>)> {
    let (n, d) = x.shape();
    if d != p.features() {
        return Err(Error::shape("batchnorm_forward", x.shape(), p.gamma.shape()));
    }
    let (mean, var) = match phase {
        Phase::Train => {
            if n < 2 {
                return Err(Error::InvalidBatch(format!(
                    "batch norm in train mode needs at least 2 rows, got {n}"
                )));
            }
            let mean: Vec<f64> = x.column_sums().data().iter().map(|s| s / n as f64).collect();
            let mut var = vec![0.0; d];
            for i in 0..n {
                for (j, v) in var.iter_mut().enumerate() {
                    let c = x.get(i, j) - mean[j];
                    *v += c * c;
                }
            }
            var.iter_mut().for_each(|v| *v /= n as f64);
            (mean, var)
        }
        Phase::Infer => (p.running_mean.data().to_vec(), p.running_var.data().to_vec()),
    };
    let inv_std: Vec<f64> = var.iter().map(|v| 1.0 / (v + p.epsilon).sqrt()).collect();
    let x_hat = Matrix::from_fn(n, d, |i, j| (x.get(i, j) - mean[j]) * inv_std[j]);
    let y = Matrix::from_fn(n, d, |i, j| p.gamma.data()[j] * x_hat.get(i, j) + p.beta.data()[j]);
    let stats = (phase == Phase::Train).then(|| {
        let m = p.momentum;
        RunningStats {
            mean: Matrix::from_fn(d, 1, |j, _| m * p.running_mean.data()[j] + (1.0 - m) * mean[j]),
            var: Matrix::from_fn(d, 1, |j, _| m * p.running_var.data()[j] + (1.0 - m) * var[j]),
        }
    });
    Ok((y, BatchNormCache { phase, x_hat, inv_std }, stats))
}

pub fn batchnorm_backward(grad_out: &Matrix, cache: &BatchNormCache, p: &BatchNormParams) -> Result<BatchNormGrads> {
    if grad_out.shape() != cache.x_hat.shape() || grad_out.cols() != p.features() {
        return Err(Error::shape("batchnorm_backward", grad_out.shape(), cache.x_hat.shape()));
    }
    let (n, d) = grad_out.shape();
    let mut dgamma = vec![0.0; d];
    let mut dbeta = vec![0.0; d];
    for i in 0..n {
        for j in 0..d {
            let g = grad_out.get(i, j);
            dbeta[j] += g;
            dgamma[j] += g * cache.x_hat.get(i, j);
        }
    }
    let gamma = p.gamma.data();
    let input = match cache.phase {
        Phase::Train => {
            let nf = n as f64;
            Matrix::from_fn(n, d, |i, j| {
                gamma[j] * cache.inv_std[j] / nf * (nf * grad_out.get(i, j) - dbeta[j] - cache.x_hat.get(i, j) * dgamma[j])
            })
        }
        Phase::Infer => Matrix::from_fn(n, d, |i, j| grad_out.get(i, j) * gamma[j] * cache.inv_std[j]),
    };
    Ok(BatchNormGrads {
        gamma: Matrix::column(&dgamma),
        beta: Matrix::column(&dbeta),
        input,
    })
}

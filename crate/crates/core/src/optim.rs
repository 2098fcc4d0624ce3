use serde::{Deserialize, Serialize};

use crate::tensor::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// Adam with bias correction. Moment buffers are allocated lazily on the
/// first step and matched to tensors by position, so callers must pass
/// parameters in the same order every step.
#[derive(Debug, Clone)]
pub struct Adam {
    config: AdamConfig,
    step: u32,
    m: Vec<Matrix>,
    v: Vec<Matrix>,
}

impl Adam {
    pub fn new(config: AdamConfig) -> Self {
        Adam {
            config,
            step: 0,
            m: Vec::new(),
            v: Vec::new(),
        }
    }

    pub fn steps(&self) -> u32 {
        self.step
    }

    pub fn update(&mut self, params: Vec<&mut Matrix>, grads: Vec<&Matrix>) {
        assert_eq!(params.len(), grads.len(), "parameter/gradient count mismatch");
        if self.m.is_empty() {
            self.m = grads.iter().map(|g| Matrix::zeros(g.rows(), g.cols())).collect();
            self.v = self.m.clone();
        }
        assert_eq!(self.m.len(), params.len(), "parameter list changed between steps");
        self.step += 1;
        let AdamConfig {
            learning_rate,
            beta1,
            beta2,
            epsilon,
        } = self.config;
        let c1 = 1.0 - beta1.powi(self.step as i32);
        let c2 = 1.0 - beta2.powi(self.step as i32);
        for (((p, g), m), v) in params.into_iter().zip(grads).zip(&mut self.m).zip(&mut self.v) {
            assert_eq!(p.shape(), g.shape(), "gradient shape mismatch");
            let p = p.data_mut();
            let (m, v) = (m.data_mut(), v.data_mut());
            for (i, &gi) in g.data().iter().enumerate() {
                m[i] = beta1 * m[i] + (1.0 - beta1) * gi;
                v[i] = beta2 * v[i] + (1.0 - beta2) * gi * gi;
                let m_hat = m[i] / c1;
                let v_hat = v[i] / c2;
                p[i] -= learning_rate * m_hat / (v_hat.sqrt() + epsilon);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_moves_by_learning_rate() {
        let mut w = Matrix::column(&[1.0, -1.0]);
        let g = Matrix::column(&[0.3, -5.0]);
        let mut adam = Adam::new(AdamConfig::default());
        adam.update(vec![&mut w], vec![&g]);
        // Bias-corrected first step is lr·sign(g) up to epsilon.
        assert!((w.data()[0] - (1.0 - 1e-3)).abs() < 1e-9);
        assert!((w.data()[1] - (-1.0 + 1e-3)).abs() < 1e-9);
    }

    #[test]
    fn zero_gradient_leaves_params() {
        let mut w = Matrix::column(&[0.5]);
        let mut adam = Adam::new(AdamConfig::default());
        for _ in 0..3 {
            adam.update(vec![&mut w], vec![&Matrix::zeros(1, 1)]);
        }
        assert_eq!(w.data(), &[0.5]);
    }

    #[test]
    fn minimizes_quadratic() {
        let mut w = Matrix::column(&[3.0, -2.0]);
        let mut adam = Adam::new(AdamConfig {
            learning_rate: 0.1,
            ..AdamConfig::default()
        });
        for _ in 0..500 {
            let g = w.scale(2.0);
            adam.update(vec![&mut w], vec![&g]);
        }
        assert!(w.max_abs() < 1e-2, "{:?}", w.data());
    }
}

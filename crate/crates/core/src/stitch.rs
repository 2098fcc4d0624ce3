//! Cross-stitch units: a learned 2×2 mixing of two same-width activations.
//!
//! Row index is the output branch (A = classification, B = regression),
//! column index the input branch. One scalar per entry is shared across all
//! channels:
//!
//! ```text
//! y_a = α_AA·x_a + α_AB·x_b
//! y_b = α_BA·x_a + α_BB·x_b
//! ```

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum StitchInit {
    Identity,
    /// `[[same, cross], [cross, same]]`
    Biased {
        same: f64,
        cross: f64,
    },
}

impl Default for StitchInit {
    fn default() -> Self {
        StitchInit::Biased { same: 0.9, cross: 0.1 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CrossStitchUnit {
    pub alpha: Matrix,
}

impl CrossStitchUnit {
    pub fn new(init: StitchInit) -> Self {
        let alpha = match init {
            StitchInit::Identity => Matrix::identity(2),
            StitchInit::Biased { same, cross } => Matrix::from_rows(&[[same, cross], [cross, same]]),
        };
        CrossStitchUnit { alpha }
    }

    fn a(&self, out: usize, inp: usize) -> f64 {
        self.alpha.get(out, inp)
    }
}

#[derive(Debug, Clone)]
pub struct StitchCache {
    x_a: Matrix,
    x_b: Matrix,
}

#[derive(Debug, Clone)]
pub struct StitchGrads {
    pub x_a: Matrix,
    pub x_b: Matrix,
    pub alpha: Matrix,
}

fn mix(c1: f64, m1: &Matrix, c2: f64, m2: &Matrix) -> Matrix {
    let data = m1.data().iter().zip(m2.data()).map(|(&a, &b)| c1 * a + c2 * b).collect();
    Matrix::new(m1.rows(), m1.cols(), data).expect("operands share a shape")
}

pub fn stitch_forward(x_a: &Matrix, x_b: &Matrix, u: &CrossStitchUnit) -> Result<((Matrix, Matrix), StitchCache)> {
    if x_a.shape() != x_b.shape() {
        return Err(Error::shape("stitch_forward", x_a.shape(), x_b.shape()));
    }
    let y_a = mix(u.a(0, 0), x_a, u.a(0, 1), x_b);
    let y_b = mix(u.a(1, 0), x_a, u.a(1, 1), x_b);
    Ok((
        (y_a, y_b),
        StitchCache {
            x_a: x_a.clone(),
            x_b: x_b.clone(),
        },
    ))
}

pub fn stitch_backward(g_a: &Matrix, g_b: &Matrix, cache: &StitchCache, u: &CrossStitchUnit) -> Result<StitchGrads> {
    if g_a.shape() != cache.x_a.shape() || g_b.shape() != cache.x_b.shape() {
        return Err(Error::shape("stitch_backward", g_a.shape(), cache.x_a.shape()));
    }
    let sum_prod = |g: &Matrix, x: &Matrix| g.data().iter().zip(x.data()).map(|(a, b)| a * b).sum::<f64>();
    Ok(StitchGrads {
        x_a: mix(u.a(0, 0), g_a, u.a(1, 0), g_b),
        x_b: mix(u.a(0, 1), g_a, u.a(1, 1), g_b),
        alpha: Matrix::from_rows(&[
            [sum_prod(g_a, &cache.x_a), sum_prod(g_a, &cache.x_b)],
            [sum_prod(g_b, &cache.x_a), sum_prod(g_b, &cache.x_b)],
        ]),
    })
}

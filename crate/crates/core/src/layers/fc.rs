use crate::error::{Error, Result};
use crate::tensor::{xavier_init, Matrix, SeededRng};

/// Affine layer `y = x·Wᵀ + b`, with `W` stored `out×in`.
#[derive(Debug, Clone, PartialEq)]
pub struct FcParams {
    pub weight: Matrix,
    pub bias: Matrix,
}

impl FcParams {
    pub fn new(weight: Matrix, bias: Matrix) -> Result<Self> {
        if bias.shape() != (weight.rows(), 1) {
            return Err(Error::shape("FcParams::new", weight.shape(), bias.shape()));
        }
        Ok(FcParams { weight, bias })
    }

    /// Xavier-uniform weights, zero bias.
    pub fn xavier(inputs: usize, outputs: usize, rng: &mut SeededRng) -> Self {
        FcParams {
            weight: xavier_init(outputs, inputs, rng),
            bias: Matrix::zeros(outputs, 1),
        }
    }

    pub fn zeros_like(&self) -> Self {
        FcParams {
            weight: Matrix::zeros(self.weight.rows(), self.weight.cols()),
            bias: Matrix::zeros(self.bias.rows(), 1),
        }
    }

    pub fn inputs(&self) -> usize {
        self.weight.cols()
    }

    pub fn outputs(&self) -> usize {
        self.weight.rows()
    }
}

#[derive(Debug, Clone)]
pub struct FcCache {
    input: Matrix,
}

#[derive(Debug, Clone)]
pub struct FcGrads {
    pub weight: Matrix,
    pub bias: Matrix,
    pub input: Matrix,
}

pub fn fc_forward(x: &Matrix, p: &FcParams) -> Result<(Matrix, FcCache)> {
    if x.cols() != p.inputs() {
        return Err(Error::shape("fc_forward", x.shape(), p.weight.shape()));
    }
    let y = x.matmul_bt(&p.weight)?.add_row_broadcast(&p.bias)?;
    Ok((y, FcCache { input: x.clone() }))
}

pub fn fc_backward(grad_out: &Matrix, cache: &FcCache, p: &FcParams) -> Result<FcGrads> {
    if grad_out.rows() != cache.input.rows() || grad_out.cols() != p.outputs() || cache.input.cols() != p.inputs() {
        return Err(Error::shape("fc_backward", grad_out.shape(), cache.input.shape()));
    }
    Ok(FcGrads {
        weight: grad_out.matmul_at(&cache.input)?,
        bias: grad_out.column_sums(),
        input: grad_out.matmul(&p.weight)?,
    })
}

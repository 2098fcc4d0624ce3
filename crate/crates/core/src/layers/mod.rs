//! Hand-derived forward/backward passes for every layer the detector uses,
//! plus the central-difference harness that checks them.

pub mod batchnorm;
pub mod dropout;
pub mod fc;
pub mod gradcheck;
pub mod gru;
pub mod loss;

pub use batchnorm::{batchnorm_backward, batchnorm_forward, BatchNormCache, BatchNormGrads, BatchNormParams, RunningStats};
pub use dropout::{dropout_backward, dropout_forward, dropout_with_mask};
pub use fc::{fc_backward, fc_forward, FcCache, FcGrads, FcParams};
pub use gradcheck::{grad_check, max_relative_error, numeric_gradient};
pub use gru::{gru_cell_backward, gru_cell_forward, gru_sequence_backward, gru_sequence_forward, GruCache, GruParams};
pub use loss::{mse_loss, softmax, softmax_cross_entropy};

/// Whether a layer runs with batch statistics and sampled dropout, or in
/// deterministic inference mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Train,
    Infer,
}

//! The multitask network, its training loop and checkpoints.

pub mod config;
pub mod network;
pub mod train;

pub use config::{Architecture, ModelConfig};
pub use network::{backward, forward, joint_loss, DropoutStreams, ForwardOutput, Gradients, LossParts, ModelParams};
pub use train::{train, EpochStats, History, Prediction, Standardizer, TargetTransform, TrainedModel};

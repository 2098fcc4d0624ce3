use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optim::AdamConfig;
use crate::stitch::StitchInit;

/// Which network [`crate::model::train`] builds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Architecture {
    /// Embedding branch and feature branch coupled by cross-stitch units,
    /// with classification and regression heads.
    #[default]
    Multitask,
    /// The embedding branch and classification head alone.
    SingleTask,
    /// One classification branch on the embedding concatenated with the
    /// features.
    FeatureConcat,
}

impl Architecture {
    pub fn label(self) -> &'static str {
        match self {
            Architecture::Multitask => "Multitask",
            Architecture::SingleTask => "Single-task",
            Architecture::FeatureConcat => "Feature-Concat-MLP",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub architecture: Architecture,
    pub embed_dim: usize,
    /// Hidden widths, shared by both branches level by level.
    pub widths: Vec<usize>,
    pub stitch_init: StitchInit,
    /// When false the stitch coefficients stay at their initial values.
    pub train_stitches: bool,
    pub dropout: f64,
    pub batchnorm: bool,
    /// Weight of the regression loss in the joint objective.
    pub lambda: f64,
    pub adam: AdamConfig,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub encoder_frozen: bool,
    /// Regress raw counts instead of standardized `log1p` counts.
    pub raw_targets: bool,
    /// Z-score the twelve features with training-fold statistics.
    pub standardize_features: bool,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            architecture: Architecture::Multitask,
            embed_dim: 32,
            widths: vec![128, 64],
            stitch_init: StitchInit::default(),
            train_stitches: true,
            dropout: 0.5,
            batchnorm: true,
            lambda: 0.1,
            adam: AdamConfig::default(),
            epochs: 30,
            batch_size: 32,
            seed: 0,
            encoder_frozen: true,
            raw_targets: false,
            standardize_features: true,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.embed_dim == 0 {
            return bad("embed_dim must be positive".into());
        }
        if self.widths.is_empty() || self.widths.contains(&0) {
            return bad(format!("hidden widths must be non-empty and positive, got {:?}", self.widths));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return bad(format!("lambda must be a finite value ≥ 0, got {}", self.lambda));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad(format!("dropout rate {} outside [0, 1)", self.dropout));
        }
        if self.batch_size == 0 || (self.batchnorm && self.batch_size < 2) {
            return bad(format!("batch size {} too small (batch norm needs ≥ 2)", self.batch_size));
        }
        if !(self.adam.learning_rate > 0.0) {
            return bad("learning rate must be positive".into());
        }
        if !self.encoder_frozen {
            return bad("fine-tuning the encoder during classifier training is not supported".into());
        }
        Ok(())
    }

    /// Input width of the classification branch.
    pub fn input_a(&self) -> usize {
        match self.architecture {
            Architecture::FeatureConcat => self.embed_dim + crate::features::FEATURE_COUNT,
            _ => self.embed_dim,
        }
    }

    pub fn has_regression(&self) -> bool {
        self.architecture == Architecture::Multitask
    }

    /// Fields that fix tensor shapes; two configs agreeing here can share a
    /// checkpoint.
    pub fn check_compatible(&self, other: &ModelConfig) -> Result<()> {
        if self.architecture != other.architecture
            || self.embed_dim != other.embed_dim
            || self.widths != other.widths
            || self.batchnorm != other.batchnorm
        {
            return Err(Error::ConfigMismatch(format!(
                "checkpoint is {:?} with D={} widths {:?} batchnorm {}, requested {:?} with D={} widths {:?} batchnorm {}",
                self.architecture,
                self.embed_dim,
                self.widths,
                self.batchnorm,
                other.architecture,
                other.embed_dim,
                other.widths,
                other.batchnorm
            )));
        }
        Ok(())
    }
}

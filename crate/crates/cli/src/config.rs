//! Layered run configuration: built-in defaults, then a TOML file, then
//! command-line flags.

use std::path::Path;

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use tweetmtl::data::SynthConfig;
use tweetmtl::encoder::EncoderConfig;
use tweetmtl::model::ModelConfig;

use crate::UsageError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// One seed for generation, fold assignment, encoder and model.
    pub seed: u64,
    /// Cross-validation folds.
    pub k: usize,
    pub synth: SynthConfig,
    pub encoder: EncoderConfig,
    pub model: ModelConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            k: 5,
            synth: SynthConfig::default(),
            encoder: EncoderConfig::default(),
            model: ModelConfig::default(),
        }
    }
}

fn merge(base: &mut Value, over: Value) {
    match (base, over) {
        (Value::Object(b), Value::Object(o)) => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

impl RunConfig {
    /// Defaults overlaid with `file` when given.
    pub fn load(file: Option<&Path>) -> Result<Self> {
        let mut value = serde_json::to_value(RunConfig::default())?;
        if let Some(path) = file {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading config file {}", path.display()))?;
            let parsed: toml::Value = toml::from_str(&text).map_err(|e| UsageError(format!("{}: {e}", path.display())))?;
            merge(&mut value, serde_json::to_value(parsed)?);
        }
        let cfg: RunConfig = serde_json::from_value(value).map_err(|e| UsageError(format!("invalid configuration: {e}")))?;
        Ok(cfg)
    }

    /// Copies the shared seed into the encoder and model sections.
    pub fn finish(mut self) -> Self {
        self.encoder.seed = self.seed;
        self.model.seed = self.seed;
        self.model.embed_dim = self.encoder.embed_dim;
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn file_overrides_defaults_partially() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        std::fs::write(
            &path,
            "seed = 9\n[model]\nlambda = 0.5\nwidths = [16, 8]\n[synth]\ndifficulty = 0.3\n",
        )
        .unwrap();
        let cfg = RunConfig::load(Some(&path)).unwrap();
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.model.lambda, 0.5);
        assert_eq!(cfg.model.widths, vec![16, 8]);
        assert_eq!(cfg.model.dropout, ModelConfig::default().dropout);
        assert_eq!(cfg.synth.difficulty, 0.3);
        assert_eq!(cfg.synth.blackmarket, 1796);
    }

    #[test]
    fn unknown_keys_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        std::fs::write(&path, "[model]\nlamda = 0.5\n").unwrap();
        assert!(RunConfig::load(Some(&path)).is_err());
    }
}

//! Browser bindings: feature extraction, a cross-stitch mixing explorer and
//! a tiny train/predict loop on synthetic tweets.
//!
//! The logic lives in plain Rust functions returning `Result<_, String>`;
//! the `#[wasm_bindgen]` wrappers only convert errors.

use serde_json::json;
use tweetmtl::data::{synth_generate, SynthConfig};
use tweetmtl::encoder::{hashtag_corpus, pretrain_hashtag, EncoderConfig, PretrainedEncoder};
use tweetmtl::experiment::ModelInputs;
use tweetmtl::features::{self, feature_matrix, tokenize, PosLexicon, SentimentLexicon, FEATURE_NAMES};
use tweetmtl::model::{train, ModelConfig, TrainedModel};
use tweetmtl::optim::AdamConfig;
use tweetmtl::record::TweetRecord;
use tweetmtl::stitch::{stitch_forward, CrossStitchUnit};
use tweetmtl::Matrix;
use wasm_bindgen::prelude::*;

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

/// Features and tokens of one tweet as JSON.
pub fn features_json(text: &str) -> String {
    let record = TweetRecord::from_text("demo", text);
    let f = features::extract_features(&record, &SentimentLexicon::bundled(), &PosLexicon::bundled());
    let tokens: Vec<_> = tokenize(text)
        .into_iter()
        .map(|t| json!({ "text": t.text, "kind": format!("{:?}", t.kind) }))
        .collect();
    json!({ "names": FEATURE_NAMES, "values": f.as_slice(), "tokens": tokens }).to_string()
}

/// Applies the 2×2 mixing matrix `alpha` (row-major: AA, AB, BA, BB) to two
/// equal-length activation vectors.
pub fn stitch_mix_json(x_a: &[f64], x_b: &[f64], alpha: &[f64]) -> Result<String, String> {
    if alpha.len() != 4 {
        return Err(format!("alpha needs 4 entries, got {}", alpha.len()));
    }
    let unit = CrossStitchUnit {
        alpha: Matrix::new(2, 2, alpha.to_vec()).map_err(err)?,
    };
    let a = Matrix::new(1, x_a.len(), x_a.to_vec()).map_err(err)?;
    let b = Matrix::new(1, x_b.len(), x_b.to_vec()).map_err(err)?;
    let ((y_a, y_b), _) = stitch_forward(&a, &b, &unit).map_err(err)?;
    Ok(json!({ "a": y_a.data(), "b": y_b.data() }).to_string())
}

/// A small encoder and multitask model trained in-process.
#[wasm_bindgen]
pub struct Demo {
    encoder: PretrainedEncoder,
    model: TrainedModel,
    history: Vec<f64>,
    train_f1: f64,
}

impl Demo {
    pub fn build(per_class: usize, epochs: usize, seed: u64) -> Result<Demo, String> {
        let data = synth_generate(
            &SynthConfig {
                blackmarket: per_class,
                genuine: per_class,
                difficulty: 0.1,
                ..SynthConfig::default()
            },
            seed,
        )
        .map_err(err)?;
        let encoder_cfg = EncoderConfig {
            char_dim: 8,
            hidden: 12,
            embed_dim: 12,
            min_hashtag_count: 2,
            epochs: 2,
            seed,
            ..EncoderConfig::default()
        };
        let encoder = pretrain_hashtag(&hashtag_corpus(&data.records), &encoder_cfg)
            .map_err(err)?
            .encoder;
        let inputs = ModelInputs::from_records(&data.records, &encoder, &SentimentLexicon::bundled(), &PosLexicon::bundled())
            .map_err(err)?;
        let config = ModelConfig {
            embed_dim: encoder.embed_dim(),
            widths: vec![16, 8],
            epochs,
            batch_size: 16,
            adam: AdamConfig {
                learning_rate: 3e-3,
                ..AdamConfig::default()
            },
            seed,
            ..ModelConfig::default()
        };
        let (model, history) = train(&config, &inputs.training_set()).map_err(err)?;
        Ok(Demo {
            encoder,
            model,
            train_f1: history.epochs.last().map_or(0.0, |e| e.train_f1),
            history: history.epochs.iter().map(|e| e.total).collect(),
        })
    }

    pub fn predict_json(&self, text: &str) -> Result<String, String> {
        let record = TweetRecord::from_text("demo", text);
        let emb = self.encoder.encode_batch(&[text]);
        let feats = feature_matrix(
            std::slice::from_ref(&record),
            &SentimentLexicon::bundled(),
            &PosLexicon::bundled(),
        );
        let p = self.model.predict(&emb, &feats).map_err(err)?.remove(0);
        Ok(json!({
            "label": p.label.as_str(),
            "probability": p.probabilities[1],
            "retweets_5d": p.retweets_5d,
            "likes_5d": p.likes_5d,
        })
        .to_string())
    }

    pub fn stitches_json(&self) -> String {
        let all: Vec<&[f64]> = self.model.params.stitches.iter().map(|s| s.alpha.data()).collect();
        json!(all).to_string()
    }

    /// Overrides the mixing matrix of one stitch level.
    pub fn set_stitch(&mut self, level: usize, alpha: &[f64]) -> Result<(), String> {
        let count = self.model.params.stitches.len();
        let unit = self
            .model
            .params
            .stitches
            .get_mut(level)
            .ok_or_else(|| format!("no stitch level {level}; the model has {count}"))?;
        unit.alpha = Matrix::new(2, 2, alpha.to_vec()).map_err(err)?;
        Ok(())
    }

    pub fn summary_json(&self) -> String {
        json!({ "loss": self.history, "train_f1": self.train_f1 }).to_string()
    }
}

#[wasm_bindgen]
pub fn extract_features(text: &str) -> String {
    features_json(text)
}

#[wasm_bindgen]
pub fn stitch_mix(x_a: &[f64], x_b: &[f64], alpha: &[f64]) -> Result<String, JsError> {
    stitch_mix_json(x_a, x_b, alpha).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
impl Demo {
    #[wasm_bindgen(constructor)]
    pub fn new(per_class: usize, epochs: usize, seed: u64) -> Result<Demo, JsError> {
        Demo::build(per_class, epochs, seed).map_err(|e| JsError::new(&e))
    }

    pub fn predict(&self, text: &str) -> Result<String, JsError> {
        self.predict_json(text).map_err(|e| JsError::new(&e))
    }

    pub fn stitches(&self) -> String {
        self.stitches_json()
    }

    #[wasm_bindgen(js_name = setStitch)]
    pub fn set_stitch_js(&mut self, level: usize, alpha: &[f64]) -> Result<(), JsError> {
        self.set_stitch(level, alpha).map_err(|e| JsError::new(&e))
    }

    pub fn summary(&self) -> String {
        self.summary_json()
    }
}

//! Training loop, input/target transforms, prediction and checkpoints.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::ModelConfig;
use super::network::{backward, forward, is_trainable, joint_loss, DropoutStreams, LossParts, ModelParams, CLASSES};
use crate::checkpoint::{Checkpoint, ConfigBlock};
use crate::data::metrics::compute_metrics;
use crate::error::{Error, Result};
use crate::features::FEATURE_COUNT;
use crate::layers::loss::softmax;
use crate::layers::Phase;
use crate::optim::Adam;
use crate::record::Label;
use crate::tensor::{Matrix, SeededRng};

pub const MODEL_KIND: &str = "model";
const STD_FLOOR: f64 = 1e-6;

/// Column-wise z-scoring with statistics from the training fold.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer {
    /// `1×c`
    pub mean: Matrix,
    /// `1×c`, at least `1e-6` everywhere.
    pub std: Matrix,
}

impl Standardizer {
    pub fn identity(cols: usize) -> Self {
        Standardizer {
            mean: Matrix::zeros(1, cols),
            std: Matrix::filled(1, cols, 1.0),
        }
    }

    pub fn fit(x: &Matrix) -> Self {
        let (n, c) = x.shape();
        let nf = n.max(1) as f64;
        let mean: Vec<f64> = x.column_sums().data().iter().map(|s| s / nf).collect();
        let mut var = vec![0.0; c];
        for i in 0..n {
            for (j, v) in var.iter_mut().enumerate() {
                *v += (x.get(i, j) - mean[j]).powi(2);
            }
        }
        let std: Vec<f64> = var.iter().map(|v| (v / nf).sqrt().max(STD_FLOOR)).collect();
        Standardizer {
            mean: Matrix::from_rows(&[mean]),
            std: Matrix::from_rows(&[std]),
        }
    }

    pub fn apply(&self, x: &Matrix) -> Matrix {
        let (m, s) = (self.mean.data(), self.std.data());
        Matrix::from_fn(x.rows(), x.cols(), |i, j| (x.get(i, j) - m[j]) / s[j])
    }
}

/// Maps engagement counts to regression targets: standardized `log1p`
/// counts, or the raw counts when `raw` is set.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetTransform {
    pub raw: bool,
    pub scaler: Standardizer,
}

impl TargetTransform {
    pub fn fit(counts: &[[u64; 2]], raw: bool) -> Self {
        if raw {
            return TargetTransform {
                raw,
                scaler: Standardizer::identity(2),
            };
        }
        TargetTransform {
            raw,
            scaler: Standardizer::fit(&Self::log_counts(counts)),
        }
    }

    fn log_counts(counts: &[[u64; 2]]) -> Matrix {
        Matrix::from_fn(counts.len(), 2, |i, j| (counts[i][j] as f64).ln_1p())
    }

    pub fn forward(&self, counts: &[[u64; 2]]) -> Matrix {
        if self.raw {
            Matrix::from_fn(counts.len(), 2, |i, j| counts[i][j] as f64)
        } else {
            self.scaler.apply(&Self::log_counts(counts))
        }
    }

    /// Expected counts for one regression output row, clamped at 0.
    pub fn inverse(&self, v: &[f64]) -> [f64; 2] {
        let (m, s) = (self.scaler.mean.data(), self.scaler.std.data());
        let mut out = [0.0; 2];
        for j in 0..2 {
            out[j] = if self.raw { v[j] } else { (v[j] * s[j] + m[j]).exp_m1() }.max(0.0);
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    /// Losses of the infer-mode network on the whole training fold after
    /// the epoch's updates.
    pub total: f64,
    pub ce: f64,
    pub mse: f64,
    /// Macro F1 on the training fold.
    pub train_f1: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct History {
    pub epochs: Vec<EpochStats>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Prediction {
    pub label: Label,
    /// Indexed genuine, blackmarket.
    pub probabilities: [f64; 2],
    /// Present only for models with a regression head.
    pub retweets_5d: Option<f64>,
    pub likes_5d: Option<f64>,
}

/// Training inputs, row-aligned.
#[derive(Debug, Clone, Copy)]
pub struct TrainingSet<'a> {
    /// `n×D`
    pub embeddings: &'a Matrix,
    /// `n×12`, unscaled.
    pub features: &'a Matrix,
    pub labels: &'a [usize],
    /// `[retweets, likes]` per record.
    pub engagement: &'a [[u64; 2]],
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    pub config: ModelConfig,
    pub params: ModelParams,
    pub features: Standardizer,
    pub targets: TargetTransform,
}

impl TrainedModel {
    fn input_a(&self, embeddings: &Matrix, scaled: &Matrix) -> Result<Matrix> {
        match self.config.architecture {
            super::Architecture::FeatureConcat => embeddings.hconcat(scaled),
            _ => Ok(embeddings.clone()),
        }
    }

    fn check_inputs(&self, embeddings: &Matrix, features: &Matrix) -> Result<()> {
        if embeddings.cols() != self.config.embed_dim {
            return Err(Error::ConfigMismatch(format!(
                "embeddings have {} columns, checkpoint expects D={}",
                embeddings.cols(),
                self.config.embed_dim
            )));
        }
        if features.cols() != FEATURE_COUNT || features.rows() != embeddings.rows() {
            return Err(Error::shape(
                "predict features",
                features.shape(),
                (embeddings.rows(), FEATURE_COUNT),
            ));
        }
        Ok(())
    }

    /// Infer-mode logits and regression outputs.
    pub fn outputs(&self, embeddings: &Matrix, features: &Matrix) -> Result<(Matrix, Option<Matrix>)> {
        self.check_inputs(embeddings, features)?;
        let scaled = self.features.apply(features);
        let x_a = self.input_a(embeddings, &scaled)?;
        let mut streams = DropoutStreams::new(&SeededRng::new(0));
        let out = forward(
            &self.params,
            &x_a,
            Some(&scaled),
            Phase::Infer,
            self.config.dropout,
            &mut streams,
        )?;
        Ok((out.logits, out.reg))
    }

    pub fn predict(&self, embeddings: &Matrix, features: &Matrix) -> Result<Vec<Prediction>> {
        let (logits, reg) = self.outputs(embeddings, features)?;
        let probs = softmax(&logits);
        Ok((0..logits.rows())
            .map(|i| {
                let p = probs.row(i);
                let label = if logits.get(i, 1) > logits.get(i, 0) {
                    Label::Blackmarket
                } else {
                    Label::Genuine
                };
                let counts = reg.as_ref().map(|r| self.targets.inverse(r.row(i)));
                Prediction {
                    label,
                    probabilities: [p[0], p[1]],
                    retweets_5d: counts.map(|c| c[0]),
                    likes_5d: counts.map(|c| c[1]),
                }
            })
            .collect())
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        let mut config = ConfigBlock::new(MODEL_KIND);
        config.set_json("model", &self.config);
        let mut cp = Checkpoint::new(config);
        for (name, m) in self.params.tensors() {
            cp.push(name, m.clone());
        }
        cp.push("features.mean", self.features.mean.clone());
        cp.push("features.std", self.features.std.clone());
        cp.push("targets.mean", self.targets.scaler.mean.clone());
        cp.push("targets.std", self.targets.scaler.std.clone());
        cp
    }

    pub fn from_checkpoint(cp: &Checkpoint) -> Result<Self> {
        cp.config.expect_kind(MODEL_KIND)?;
        let config: ModelConfig = cp.config.get_json("model")?;
        let mut params = ModelParams::build(&config, &SeededRng::new(config.seed))?;
        for (name, m) in params.tensors_mut() {
            *m = cp.take_shaped(&name, m.shape())?;
        }
        let features = Standardizer {
            mean: cp.take_shaped("features.mean", (1, FEATURE_COUNT))?,
            std: cp.take_shaped("features.std", (1, FEATURE_COUNT))?,
        };
        let targets = TargetTransform {
            raw: config.raw_targets,
            scaler: Standardizer {
                mean: cp.take_shaped("targets.mean", (1, 2))?,
                std: cp.take_shaped("targets.std", (1, 2))?,
            },
        };
        Ok(TrainedModel {
            config,
            params,
            features,
            targets,
        })
    }

    /// Loads a checkpoint whose shape-defining settings must match `expected`.
    pub fn from_checkpoint_expecting(cp: &Checkpoint, expected: &ModelConfig) -> Result<Self> {
        let model = Self::from_checkpoint(cp)?;
        model.config.check_compatible(expected)?;
        Ok(model)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        self.to_checkpoint().save(path)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_checkpoint(&Checkpoint::load(path)?)
    }
}

/// Mini-batch boundaries over `n` rows. With batch norm a trailing batch of
/// one row is merged into its predecessor.
fn batches(n: usize, size: usize, batchnorm: bool) -> Vec<(usize, usize)> {
    let mut out: Vec<(usize, usize)> = (0..n).step_by(size).map(|s| (s, (s + size).min(n))).collect();
    if batchnorm && out.len() > 1 {
        let (s, e) = *out.last().expect("non-empty");
        if e - s < 2 {
            out.pop();
            out.last_mut().expect("predecessor exists").1 = e;
        }
    }
    out
}

fn argmax_rows(logits: &Matrix) -> Vec<usize> {
    (0..logits.rows())
        .map(|i| usize::from(logits.get(i, 1) > logits.get(i, 0)))
        .collect()
}

/// Trains a network from `config` on one fold. Deterministic given
/// `config.seed`.
pub fn train(config: &ModelConfig, data: &TrainingSet<'_>) -> Result<(TrainedModel, History)> {
    config.validate()?;
    let n = data.labels.len();
    if data.embeddings.rows() != n || data.features.rows() != n || data.engagement.len() != n {
        return Err(Error::shape(
            "train inputs",
            data.embeddings.shape(),
            (n, data.features.rows()),
        ));
    }
    if data.embeddings.cols() != config.embed_dim {
        return Err(Error::ConfigMismatch(format!(
            "embeddings have {} columns, config says D={}",
            data.embeddings.cols(),
            config.embed_dim
        )));
    }
    if data.features.cols() != FEATURE_COUNT {
        return Err(Error::shape("train features", data.features.shape(), (n, FEATURE_COUNT)));
    }
    if let Some(&l) = data.labels.iter().find(|&&l| l >= CLASSES) {
        return Err(Error::LabelOutOfRange {
            label: l,
            classes: CLASSES,
        });
    }
    if (0..CLASSES).any(|c| !data.labels.contains(&c)) {
        return Err(Error::Training("training fold must contain both classes".into()));
    }
    if config.batchnorm && n < 2 {
        return Err(Error::InvalidBatch("batch norm needs at least 2 training rows".into()));
    }

    let scaler = if config.standardize_features {
        Standardizer::fit(data.features)
    } else {
        Standardizer::identity(FEATURE_COUNT)
    };
    let targets = TargetTransform::fit(data.engagement, config.raw_targets);
    let root = SeededRng::new(config.seed);
    let mut model = TrainedModel {
        config: config.clone(),
        params: ModelParams::build(config, &root)?,
        features: scaler,
        targets,
    };
    let x_b = model.features.apply(data.features);
    let x_a = model.input_a(data.embeddings, &x_b)?;
    let y_reg = model.targets.forward(data.engagement);
    let multitask = model.params.is_multitask();

    let mut streams = DropoutStreams::new(&root);
    let mut shuffle = root.child("shuffle");
    let mut adam = Adam::new(config.adam);
    let mut order: Vec<usize> = (0..n).collect();
    let mut history = History::default();

    for epoch in 1..=config.epochs {
        shuffle.shuffle(&mut order);
        for (s, e) in batches(n, config.batch_size, config.batchnorm) {
            let idx = &order[s..e];
            let xa = x_a.select_rows(idx);
            let xb = multitask.then(|| x_b.select_rows(idx));
            let yr = multitask.then(|| y_reg.select_rows(idx));
            let labels: Vec<usize> = idx.iter().map(|&i| data.labels[i]).collect();

            let out = forward(&model.params, &xa, xb.as_ref(), Phase::Train, config.dropout, &mut streams)?;
            let (loss, d_logits, d_reg) = joint_loss(&out.logits, &labels, out.reg.as_ref(), yr.as_ref(), config.lambda)?;
            if !loss.total.is_finite() {
                return Err(Error::Training(format!("loss became {} in epoch {epoch}", loss.total)));
            }
            let grads = backward(&model.params, &out.cache, &d_logits, d_reg.as_ref())?;
            for (is_b, level, stats) in out.running {
                let levels = if is_b { &mut model.params.b } else { &mut model.params.a };
                levels[level]
                    .bn
                    .as_mut()
                    .expect("stats come from a batch-norm level")
                    .apply_running(stats);
            }
            let grad_list: Vec<&Matrix> = grads
                .params
                .tensors()
                .into_iter()
                .filter(|(name, _)| is_trainable(name, config.train_stitches))
                .map(|(_, m)| m)
                .collect();
            let param_list: Vec<&mut Matrix> = model
                .params
                .tensors_mut()
                .into_iter()
                .filter(|(name, _)| is_trainable(name, config.train_stitches))
                .map(|(_, m)| m)
                .collect();
            adam.update(param_list, grad_list);
        }

        let (logits, reg) = model.outputs(data.embeddings, data.features)?;
        let (parts, _, _): (LossParts, _, _) =
            joint_loss(&logits, data.labels, reg.as_ref(), multitask.then_some(&y_reg), config.lambda)?;
        let report = compute_metrics(&argmax_rows(&logits), data.labels)?;
        log::debug!(
            "epoch {epoch}: total {:.5} ce {:.5} mse {:.5} f1 {:.4}",
            parts.total,
            parts.ce,
            parts.mse,
            report.macro_avg.f1
        );
        history.epochs.push(EpochStats {
            epoch,
            total: parts.total,
            ce: parts.ce,
            mse: parts.mse,
            train_f1: report.macro_avg.f1,
        });
    }
    Ok((model, history))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Architecture;
    use crate::stitch::StitchInit;

    fn toy(n: usize, d: usize, seed: u64) -> (Matrix, Matrix, Vec<usize>, Vec<[u64; 2]>) {
        let mut rng = SeededRng::new(seed);
        let labels: Vec<usize> = (0..n).map(|i| i % 2).collect();
        let emb = Matrix::from_fn(n, d, |i, _| rng.uniform(-1.0, 1.0) + if labels[i] == 1 { 0.8 } else { -0.8 });
        let feats = Matrix::from_fn(n, FEATURE_COUNT, |i, j| (j as f64) + rng.uniform(0.0, 3.0) + labels[i] as f64);
        let eng = labels
            .iter()
            .map(|&l| [(5 + 30 * l + rng.below(10)) as u64, (8 + 50 * l + rng.below(10)) as u64])
            .collect();
        (emb, feats, labels, eng)
    }

    fn small_config() -> ModelConfig {
        ModelConfig {
            embed_dim: 6,
            widths: vec![8, 4],
            epochs: 5,
            batch_size: 8,
            ..ModelConfig::default()
        }
    }

    #[test]
    fn batch_boundaries() {
        assert_eq!(batches(10, 4, true), vec![(0, 4), (4, 8), (8, 10)]);
        assert_eq!(batches(9, 4, true), vec![(0, 4), (4, 9)]);
        assert_eq!(batches(9, 4, false), vec![(0, 4), (4, 8), (8, 9)]);
    }

    #[test]
    fn target_transform_inverse_of_mean() {
        let t = TargetTransform::fit(&[[3, 10], [9, 0], [0, 4]], false);
        let m = t.scaler.mean.data().to_vec();
        let back = t.inverse(&[0.0, 0.0]);
        assert!((back[0] - m[0].exp_m1()).abs() < 1e-12);
        assert!((back[1] - m[1].exp_m1()).abs() < 1e-12);
        let fwd = t.forward(&[[3, 10]]);
        let inv = t.inverse(fwd.row(0));
        assert!((inv[0] - 3.0).abs() < 1e-9 && (inv[1] - 10.0).abs() < 1e-9);
    }

    #[test]
    fn deterministic_training_and_round_trip() {
        let (e, f, l, g) = toy(40, 6, 1);
        let set = TrainingSet {
            embeddings: &e,
            features: &f,
            labels: &l,
            engagement: &g,
        };
        let (m1, h1) = train(&small_config(), &set).unwrap();
        let (m2, h2) = train(&small_config(), &set).unwrap();
        assert_eq!(h1, h2);
        let bytes = m1.to_checkpoint().to_bytes();
        assert_eq!(bytes, m2.to_checkpoint().to_bytes());
        let back = TrainedModel::from_checkpoint(&Checkpoint::from_bytes(&bytes).unwrap()).unwrap();
        assert_eq!(back, m1);
        assert_eq!(back.to_checkpoint().to_bytes(), bytes);
    }

    #[test]
    fn single_class_fold_rejected() {
        let (e, f, _, g) = toy(10, 6, 1);
        let l = vec![1; 10];
        let set = TrainingSet {
            embeddings: &e,
            features: &f,
            labels: &l,
            engagement: &g,
        };
        assert!(matches!(train(&small_config(), &set), Err(Error::Training(_))));
    }

    #[test]
    fn predictions_are_batch_independent() {
        let (e, f, l, g) = toy(30, 6, 2);
        let set = TrainingSet {
            embeddings: &e,
            features: &f,
            labels: &l,
            engagement: &g,
        };
        let (m, _) = train(&small_config(), &set).unwrap();
        let all = m.predict(&e, &f).unwrap();
        for i in [0, 7, 29] {
            let one = m.predict(&e.select_rows(&[i]), &f.select_rows(&[i])).unwrap();
            assert_eq!(one[0], all[i]);
        }
        for p in &all {
            assert!((p.probabilities[0] + p.probabilities[1] - 1.0).abs() < 1e-12);
            assert!(p.retweets_5d.unwrap() >= 0.0);
        }
    }

    #[test]
    fn config_mismatch_on_load() {
        let (e, f, l, g) = toy(20, 6, 3);
        let set = TrainingSet {
            embeddings: &e,
            features: &f,
            labels: &l,
            engagement: &g,
        };
        let (m, _) = train(&small_config(), &set).unwrap();
        let cp = m.to_checkpoint();
        let other = ModelConfig {
            widths: vec![16, 8],
            ..small_config()
        };
        assert!(matches!(
            TrainedModel::from_checkpoint_expecting(&cp, &other),
            Err(Error::ConfigMismatch(_))
        ));
        assert!(matches!(
            m.predict(&Matrix::zeros(1, 5), &Matrix::zeros(1, 12)),
            Err(Error::ConfigMismatch(_))
        ));
    }

    #[test]
    fn lambda_zero_identity_matches_single_task() {
        let (e, f, l, g) = toy(40, 6, 4);
        let set = TrainingSet {
            embeddings: &e,
            features: &f,
            labels: &l,
            engagement: &g,
        };
        let multi = ModelConfig {
            lambda: 0.0,
            stitch_init: StitchInit::Identity,
            train_stitches: false,
            ..small_config()
        };
        let single = ModelConfig {
            architecture: Architecture::SingleTask,
            ..multi.clone()
        };
        let (mm, _) = train(&multi, &set).unwrap();
        let (ms, _) = train(&single, &set).unwrap();
        for (name, t) in ms.params.tensors() {
            let other = mm.params.tensors().into_iter().find(|(n, _)| *n == name).unwrap().1.clone();
            assert!(t.bitwise_eq(&other), "{name}");
        }
    }
}

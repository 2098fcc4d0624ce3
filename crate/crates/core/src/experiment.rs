//! Cross-validation and the three-way model comparison.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::data::metrics::{compute_metrics, fn_breakdown, MeanStd, MetricsReport};
use crate::data::split::kfold_split;
use crate::encoder::PretrainedEncoder;
use crate::error::{Error, Result};
use crate::features::{feature_matrix, PosLexicon, SentimentLexicon};
use crate::model::train::TrainingSet;
use crate::model::{train, Architecture, ModelConfig};
use crate::record::{Category, TweetRecord};
use crate::tensor::{Matrix, SeededRng};

/// Row-aligned model inputs for a labeled record set.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelInputs {
    pub embeddings: Matrix,
    pub features: Matrix,
    pub labels: Vec<usize>,
    pub engagement: Vec<[u64; 2]>,
    pub categories: Vec<Option<Category>>,
}

impl ModelInputs {
    pub fn from_records(
        records: &[TweetRecord],
        encoder: &PretrainedEncoder,
        sentiment: &SentimentLexicon,
        pos: &PosLexicon,
    ) -> Result<Self> {
        let labels = records
            .iter()
            .map(|r| {
                r.label
                    .map(|l| l.index())
                    .ok_or_else(|| Error::Config(format!("record {:?} has no label", r.id)))
            })
            .collect::<Result<Vec<_>>>()?;
        let texts: Vec<&str> = records.iter().map(|r| r.text.as_str()).collect();
        Ok(ModelInputs {
            embeddings: encoder.encode_batch(&texts),
            features: feature_matrix(records, sentiment, pos),
            labels,
            engagement: records.iter().map(|r| [r.retweets_5d, r.likes_5d]).collect(),
            categories: records.iter().map(|r| r.category).collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn subset(&self, idx: &[usize]) -> ModelInputs {
        ModelInputs {
            embeddings: self.embeddings.select_rows(idx),
            features: self.features.select_rows(idx),
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
            engagement: idx.iter().map(|&i| self.engagement[i]).collect(),
            categories: idx.iter().map(|&i| self.categories[i]).collect(),
        }
    }

    pub fn training_set(&self) -> TrainingSet<'_> {
        TrainingSet {
            embeddings: &self.embeddings,
            features: &self.features,
            labels: &self.labels,
            engagement: &self.engagement,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvResult {
    pub folds: Vec<MetricsReport>,
    /// Out-of-fold prediction for every record.
    pub predictions: Vec<usize>,
}

/// Seed used for the model trained on fold `f`.
pub fn fold_seed(seed: u64, f: usize) -> u64 {
    SeededRng::new(seed).child(&format!("fold{f}")).seed()
}

/// Stratified k-fold cross-validation of one configuration. Folds may train
/// in parallel; results do not depend on scheduling.
pub fn cross_validate(inputs: &ModelInputs, config: &ModelConfig, k: usize, seed: u64) -> Result<CvResult> {
    let split = kfold_split(&inputs.labels, k, seed)?;
    let folds: Vec<usize> = (0..k).collect();
    let outcomes = crate::par::map(&folds, |&f| -> Result<(Vec<usize>, Vec<usize>)> {
        let test = split.test(f).to_vec();
        let train_part = inputs.subset(&split.train(f));
        let test_part = inputs.subset(&test);
        let cfg = ModelConfig {
            seed: fold_seed(seed, f),
            ..config.clone()
        };
        let (model, _) = train(&cfg, &train_part.training_set())?;
        let preds = model
            .predict(&test_part.embeddings, &test_part.features)?
            .iter()
            .map(|p| p.label.index())
            .collect();
        Ok((test, preds))
    });
    let mut predictions = vec![0; inputs.len()];
    let mut reports = Vec::with_capacity(k);
    for outcome in outcomes {
        let (test, preds) = outcome?;
        let truth: Vec<usize> = test.iter().map(|&i| inputs.labels[i]).collect();
        reports.push(compute_metrics(&preds, &truth)?);
        for (&i, &p) in test.iter().zip(&preds) {
            predictions[i] = p;
        }
    }
    Ok(CvResult {
        folds: reports,
        predictions,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub method: String,
    /// Blackmarket-class precision, recall and F1.
    pub precision: MeanStd,
    pub recall: MeanStd,
    pub f1: MeanStd,
    pub macro_f1: MeanStd,
    pub weighted_f1: MeanStd,
    pub accuracy: MeanStd,
    pub per_fold: Vec<MetricsReport>,
}

impl ComparisonRow {
    fn from_cv(method: &str, cv: &CvResult) -> Self {
        let col = |f: fn(&MetricsReport) -> f64| MeanStd::of(&cv.folds.iter().map(f).collect::<Vec<_>>());
        ComparisonRow {
            method: method.to_string(),
            precision: col(|r| r.per_class[1].precision),
            recall: col(|r| r.per_class[1].recall),
            f1: col(|r| r.per_class[1].f1),
            macro_f1: col(|r| r.macro_avg.f1),
            weighted_f1: col(|r| r.weighted_avg.f1),
            accuracy: col(|r| r.accuracy),
            per_fold: cv.folds.clone(),
        }
    }
}

/// Table of competing methods plus the multitask model's false-negative
/// category breakdown over out-of-fold predictions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub k: usize,
    pub seed: u64,
    pub records: usize,
    pub rows: Vec<ComparisonRow>,
    pub fn_breakdown: BTreeMap<String, f64>,
}

/// The three configurations compared: the multitask model as given, the
/// same classifier branch alone with λ = 0, and an MLP on the concatenated
/// embedding and features with the same widths.
pub fn comparison_configs(base: &ModelConfig) -> Vec<ModelConfig> {
    vec![
        ModelConfig {
            architecture: Architecture::Multitask,
            ..base.clone()
        },
        ModelConfig {
            architecture: Architecture::SingleTask,
            lambda: 0.0,
            ..base.clone()
        },
        ModelConfig {
            architecture: Architecture::FeatureConcat,
            lambda: 0.0,
            ..base.clone()
        },
    ]
}

pub fn run_comparison(inputs: &ModelInputs, configs: &[ModelConfig], k: usize, seed: u64) -> Result<ComparisonReport> {
    let mut rows = Vec::new();
    let mut breakdown = BTreeMap::new();
    for cfg in configs {
        log::info!("cross-validating {}", cfg.architecture.label());
        let cv = cross_validate(inputs, cfg, k, seed)?;
        if cfg.architecture == Architecture::Multitask && breakdown.is_empty() {
            breakdown = fn_breakdown(&cv.predictions, &inputs.labels, &inputs.categories);
        }
        rows.push(ComparisonRow::from_cv(cfg.architecture.label(), &cv));
    }
    Ok(ComparisonReport {
        k,
        seed,
        records: inputs.len(),
        rows,
        fn_breakdown: breakdown,
    })
}

impl ComparisonReport {
    pub fn row(&self, method: &str) -> Option<&ComparisonRow> {
        self.rows.iter().find(|r| r.method == method)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports serialize")
    }

    /// Aligned plain-text table.
    pub fn table(&self) -> String {
        let mut out = String::new();
        let header = ["Method", "Precision", "Recall", "F1", "Macro F1", "Weighted F1"];
        let cells: Vec<[String; 6]> = self
            .rows
            .iter()
            .map(|r| {
                [
                    r.method.clone(),
                    r.precision.to_string(),
                    r.recall.to_string(),
                    r.f1.to_string(),
                    r.macro_f1.to_string(),
                    r.weighted_f1.to_string(),
                ]
            })
            .collect();
        let mut widths = header.map(|h| h.chars().count());
        for row in &cells {
            for (w, c) in widths.iter_mut().zip(row) {
                *w = (*w).max(c.chars().count());
            }
        }
        let line = |cols: &[String]| {
            let mut s = String::new();
            for (i, (c, w)) in cols.iter().zip(widths).enumerate() {
                let pad = w - c.chars().count();
                if i == 0 {
                    s.push_str(c);
                    s.push_str(&" ".repeat(pad));
                } else {
                    s.push_str("  ");
                    s.push_str(&" ".repeat(pad));
                    s.push_str(c);
                }
            }
            s.push('\n');
            s
        };
        out.push_str(&line(&header.map(String::from)));
        out.push_str(&"-".repeat(widths.iter().sum::<usize>() + 2 * (widths.len() - 1)));
        out.push('\n');
        for row in &cells {
            out.push_str(&line(row));
        }
        let _ = writeln!(out, "({}-fold CV over {} records, seed {})", self.k, self.records, self.seed);
        if !self.fn_breakdown.is_empty() {
            out.push_str("\nMultitask false negatives by category:\n");
            for (cat, pct) in &self.fn_breakdown {
                let _ = writeln!(out, "  {cat:<14}{pct:6.2}%");
            }
        }
        out
    }
}

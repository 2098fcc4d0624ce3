//! Precision, recall and F1 for the two-class problem.
//!
//! A ratio with a zero denominator is reported as 0.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::record::{Category, Label};

pub const CLASSES: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Averages {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    /// Indexed by class: genuine, blackmarket.
    pub per_class: [ClassMetrics; CLASSES],
    pub macro_avg: Averages,
    pub weighted_avg: Averages,
    /// Equal to micro-averaged precision, recall and F1.
    pub accuracy: f64,
    /// `confusion[true][predicted]`.
    pub confusion: [[u64; CLASSES]; CLASSES],
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn f1(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

pub fn compute_metrics(preds: &[usize], labels: &[usize]) -> Result<MetricsReport> {
    if preds.len() != labels.len() {
        return Err(Error::Config(format!(
            "{} predictions for {} labels",
            preds.len(),
            labels.len()
        )));
    }
    if preds.is_empty() {
        return Err(Error::Config("no predictions to score".into()));
    }
    let mut confusion = [[0u64; CLASSES]; CLASSES];
    for (&p, &t) in preds.iter().zip(labels) {
        for i in [p, t] {
            if i >= CLASSES {
                return Err(Error::LabelOutOfRange {
                    label: i,
                    classes: CLASSES,
                });
            }
        }
        confusion[t][p] += 1;
    }

    let mut per_class = [ClassMetrics::default(); CLASSES];
    for (c, m) in per_class.iter_mut().enumerate() {
        let tp = confusion[c][c];
        let predicted: u64 = (0..CLASSES).map(|t| confusion[t][c]).sum();
        let support: u64 = confusion[c].iter().sum();
        m.precision = ratio(tp, predicted);
        m.recall = ratio(tp, support);
        m.f1 = f1(m.precision, m.recall);
        m.support = support;
    }

    let total = preds.len() as f64;
    let avg = |weight: &dyn Fn(&ClassMetrics) -> f64| Averages {
        precision: per_class.iter().map(|m| weight(m) * m.precision).sum(),
        recall: per_class.iter().map(|m| weight(m) * m.recall).sum(),
        f1: per_class.iter().map(|m| weight(m) * m.f1).sum(),
    };
    let macro_avg = avg(&|_| 1.0 / CLASSES as f64);
    let weighted_avg = avg(&|m| m.support as f64 / total);
    let correct: u64 = (0..CLASSES).map(|c| confusion[c][c]).sum();

    Ok(MetricsReport {
        per_class,
        macro_avg,
        weighted_avg,
        accuracy: correct as f64 / total,
        confusion,
    })
}

/// Percentage of each category among blackmarket records predicted genuine.
/// Empty when there are no such false negatives.
pub fn fn_breakdown(preds: &[usize], labels: &[usize], categories: &[Option<Category>]) -> BTreeMap<String, f64> {
    let bm = Label::Blackmarket.index();
    let mut counts: BTreeMap<String, u64> = BTreeMap::new();
    let mut total = 0u64;
    for ((&p, &t), c) in preds.iter().zip(labels).zip(categories) {
        if t == bm && p != bm {
            let name = c.map_or("Unknown", Category::as_str);
            *counts.entry(name.to_string()).or_default() += 1;
            total += 1;
        }
    }
    counts
        .into_iter()
        .map(|(k, n)| (k, 100.0 * n as f64 / total as f64))
        .collect()
}

/// Population mean and standard deviation.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

impl MeanStd {
    pub fn of(xs: &[f64]) -> MeanStd {
        if xs.is_empty() {
            return MeanStd::default();
        }
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
        MeanStd { mean, std: var.sqrt() }
    }
}

impl std::fmt::Display for MeanStd {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:.4} ± {:.4}", self.mean, self.std)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_predictions() {
        let y = [0, 1, 1, 0, 1];
        let m = compute_metrics(&y, &y).unwrap();
        assert_eq!(
            m.macro_avg,
            Averages {
                precision: 1.0,
                recall: 1.0,
                f1: 1.0
            }
        );
        assert_eq!(m.accuracy, 1.0);
    }

    #[test]
    fn blackmarket_eight_two_two() {
        // 8 TP, 2 FP, 2 FN for class 1, plus 5 true negatives.
        let mut preds = vec![1; 8];
        let mut labels = vec![1; 8];
        preds.extend([1, 1, 0, 0, 0, 0, 0, 0, 0]);
        labels.extend([0, 0, 1, 1, 0, 0, 0, 0, 0]);
        let m = compute_metrics(&preds, &labels).unwrap();
        let bm = m.per_class[1];
        assert!((bm.precision - 0.8).abs() < 1e-15);
        assert!((bm.recall - 0.8).abs() < 1e-15);
        assert!((bm.f1 - 0.8).abs() < 1e-15);
    }

    #[test]
    fn no_predicted_positives_gives_zero_precision() {
        let m = compute_metrics(&[0, 0, 0], &[1, 0, 1]).unwrap();
        assert_eq!(m.per_class[1].precision, 0.0);
        assert_eq!(m.per_class[1].f1, 0.0);
    }

    #[test]
    fn length_mismatch() {
        assert!(compute_metrics(&[0], &[0, 1]).is_err());
    }

    #[test]
    fn breakdown_cases() {
        let cats = [
            Some(Category::Promotional),
            Some(Category::Promotional),
            Some(Category::Spam),
            None,
        ];
        assert!(fn_breakdown(&[1, 1, 1, 0], &[1, 1, 1, 0], &cats).is_empty());
        let b = fn_breakdown(&[0, 0, 1, 0], &[1, 1, 1, 0], &cats);
        assert_eq!(b.len(), 1);
        assert_eq!(b["Promotional"], 100.0);
    }

    #[test]
    fn mean_std() {
        let s = MeanStd::of(&[1.0, 3.0]);
        assert_eq!((s.mean, s.std), (2.0, 1.0));
    }
}

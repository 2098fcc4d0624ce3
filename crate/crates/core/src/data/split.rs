//! Stratified k-fold partitions.

use crate::error::{Error, Result};
use crate::tensor::SeededRng;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldSplit {
    /// Held-out indices of each fold, ascending.
    pub folds: Vec<Vec<usize>>,
    pub seed: u64,
}

impl FoldSplit {
    pub fn k(&self) -> usize {
        self.folds.len()
    }

    pub fn test(&self, fold: usize) -> &[usize] {
        &self.folds[fold]
    }

    /// Every index outside `fold`, ascending.
    pub fn train(&self, fold: usize) -> Vec<usize> {
        let mut idx: Vec<usize> = self
            .folds
            .iter()
            .enumerate()
            .filter(|&(f, _)| f != fold)
            .flat_map(|(_, v)| v.iter().copied())
            .collect();
        idx.sort_unstable();
        idx
    }
}

/// Shuffles each class separately and deals its members round-robin, so
/// every fold holds `⌊n_c/k⌋` or `⌈n_c/k⌉` members of class `c`.
pub fn kfold_split(labels: &[usize], k: usize, seed: u64) -> Result<FoldSplit> {
    if k < 2 {
        return Err(Error::Config(format!("k must be at least 2, got {k}")));
    }
    let classes = labels.iter().max().map_or(0, |&m| m + 1);
    let rng = SeededRng::new(seed);
    let mut folds = vec![Vec::new(); k];
    for c in 0..classes {
        let mut members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == c).collect();
        if members.is_empty() {
            continue;
        }
        if members.len() < k {
            return Err(Error::Config(format!(
                "class {c} has {} records, fewer than k = {k}",
                members.len()
            )));
        }
        rng.child(&format!("kfold.class{c}")).shuffle(&mut members);
        // Start each class at a different fold.
        let offset = c * (members.len() % k);
        for (j, i) in members.into_iter().enumerate() {
            folds[(j + offset) % k].push(i);
        }
    }
    for f in &mut folds {
        f.sort_unstable();
    }
    Ok(FoldSplit { folds, seed })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn balanced_small_case() {
        let labels: Vec<usize> = (0..20).map(|i| i % 2).collect();
        let s = kfold_split(&labels, 5, 3).unwrap();
        for f in &s.folds {
            assert_eq!(f.len(), 4);
            assert_eq!(f.iter().filter(|&&i| labels[i] == 1).count(), 2);
        }
    }

    #[test]
    fn class_too_small() {
        assert!(kfold_split(&[0, 0, 0, 0, 0, 1, 1], 5, 0).is_err());
    }

    proptest! {
        #[test]
        fn partition_and_stratification(n0 in 5usize..60, n1 in 5usize..60, k in 2usize..6, seed in any::<u64>()) {
            let labels: Vec<usize> = (0..n0 + n1).map(|i| usize::from(i >= n0)).collect();
            let s = kfold_split(&labels, k, seed).unwrap();
            let mut all: Vec<usize> = s.folds.concat();
            all.sort_unstable();
            prop_assert_eq!(all, (0..n0 + n1).collect::<Vec<_>>());
            for f in &s.folds {
                for (c, n) in [(0, n0), (1, n1)] {
                    let got = f.iter().filter(|&&i| labels[i] == c).count();
                    prop_assert!(got == n / k || got == n.div_ceil(k));
                }
            }
        }
    }
}

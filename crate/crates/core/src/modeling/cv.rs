use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::Label;
use crate::error::{Error, Result};
use crate::matrix::FeatureMatrix;

pub const DEFAULT_FOLDS: usize = 5;

/// Speaker-to-fold assignment. Speakers of each class are shuffled and dealt
/// round-robin, so folds are balanced in size and class mix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvPlan {
    pub k: usize,
    pub seed: u64,
    pub assignment: BTreeMap<String, usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Fold {
    pub index: usize,
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
}

fn speaker_labels(m: &FeatureMatrix) -> Result<BTreeMap<&str, Label>> {
    let mut out: BTreeMap<&str, Label> = BTreeMap::new();
    for (s, &l) in m.speakers.iter().zip(&m.labels) {
        if *out.entry(s).or_insert(l) != l {
            return Err(Error::Integrity(format!("speaker {s} has rows with both labels")));
        }
    }
    Ok(out)
}

impl CvPlan {
    pub fn new(m: &FeatureMatrix, k: usize, seed: u64) -> Result<Self> {
        if k < 2 {
            return Err(Error::Config(format!("cross-validation needs at least 2 folds, got {k}")));
        }
        let labels = speaker_labels(m)?;
        if labels.len() < k {
            return Err(Error::Degenerate(format!("{} speakers cannot fill {k} folds", labels.len())));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut assignment = BTreeMap::new();
        let mut next = 0;
        for positive in [true, false] {
            let mut group: Vec<&str> = labels
                .iter()
                .filter(|(_, l)| l.is_positive() == positive)
                .map(|(s, _)| *s)
                .collect();
            group.shuffle(&mut rng);
            for s in group {
                assignment.insert(s.to_string(), next % k);
                next += 1;
            }
        }
        Ok(CvPlan { k, seed, assignment })
    }

    pub fn fold_of(&self, speaker: &str) -> Option<usize> {
        self.assignment.get(speaker).copied()
    }

    /// Row indices per fold. Every speaker of `m` must be assigned.
    pub fn folds(&self, m: &FeatureMatrix) -> Result<Vec<Fold>> {
        let mut folds: Vec<Fold> = (0..self.k)
            .map(|index| Fold { index, train: Vec::new(), validation: Vec::new() })
            .collect();
        for (i, s) in m.speakers.iter().enumerate() {
            let f = self
                .fold_of(s)
                .ok_or_else(|| Error::Integrity(format!("speaker {s} has no fold")))?;
            for fold in folds.iter_mut() {
                if fold.index == f {
                    fold.validation.push(i);
                } else {
                    fold.train.push(i);
                }
            }
        }
        Ok(folds)
    }

    /// Fails when any fold shares a speaker between training and validation.
    pub fn audit(&self, m: &FeatureMatrix) -> Result<()> {
        for fold in self.folds(m)? {
            audit_fold(m, &fold)?;
        }
        Ok(())
    }
}

pub fn audit_fold(m: &FeatureMatrix, fold: &Fold) -> Result<()> {
    let train: BTreeSet<&str> = fold.train.iter().map(|&i| m.speakers[i].as_str()).collect();
    if let Some(s) = fold.validation.iter().map(|&i| m.speakers[i].as_str()).find(|s| train.contains(s)) {
        return Err(Error::Integrity(format!(
            "speaker {s} is in both training and validation of fold {}",
            fold.index
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn matrix(n_pos: usize, n_neg: usize, segs: usize) -> FeatureMatrix {
        let mut m = FeatureMatrix::new(vec!["x".into()]);
        for s in 0..n_pos + n_neg {
            let l = Label::from_positive(s < n_pos);
            for j in 0..segs {
                m.push_row(format!("{s}-{j}"), format!("spk{s:03}"), l, &[j as f64]).unwrap();
            }
        }
        m
    }

    #[test]
    fn every_speaker_in_one_fold() {
        let m = matrix(42, 93, 3);
        let plan = CvPlan::new(&m, 5, 1).unwrap();
        assert_eq!(plan.assignment.len(), 135);
        let folds = plan.folds(&m).unwrap();
        for f in &folds {
            assert_eq!(f.train.len() + f.validation.len(), m.n_rows());
            let pos = f.validation.iter().filter(|&&i| m.labels[i].is_positive()).count();
            assert!(pos > 0 && pos < f.validation.len());
        }
        let total: usize = folds.iter().map(|f| f.validation.len()).sum();
        assert_eq!(total, m.n_rows());
        plan.audit(&m).unwrap();
    }

    #[test]
    fn leaky_fold_is_detected() {
        let m = matrix(2, 2, 2);
        let fold = Fold { index: 0, train: vec![0, 2], validation: vec![1, 3] };
        assert!(matches!(audit_fold(&m, &fold), Err(Error::Integrity(_))));
    }

    #[test]
    fn unknown_speaker_rejected() {
        let m = matrix(3, 3, 1);
        let plan = CvPlan::new(&m, 2, 0).unwrap();
        let other = matrix(4, 3, 1);
        assert!(plan.folds(&other).is_err());
    }

    proptest! {
        #[test]
        fn folds_are_speaker_disjoint(n_pos in 1usize..20, n_neg in 1usize..20, segs in 1usize..4, seed in any::<u64>()) {
            let m = matrix(n_pos, n_neg, segs);
            prop_assume!(n_pos + n_neg >= 5);
            let plan = CvPlan::new(&m, 5, seed).unwrap();
            prop_assert!(plan.audit(&m).is_ok());
            let sizes: Vec<usize> = (0..5).map(|f| plan.assignment.values().filter(|&&x| x == f).count()).collect();
            prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
        }
    }
}

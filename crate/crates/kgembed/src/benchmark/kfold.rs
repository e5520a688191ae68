//! Stratified k-fold assignment.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Fold index per instance. Folds are disjoint, covering, and stratified:
/// each fold's class counts are within one instance of an even share.
#[derive(Debug, Clone, PartialEq)]
pub struct FoldAssignment {
    pub fold_of: Vec<usize>,
    pub k: usize,
}

impl FoldAssignment {
    pub fn test_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.fold_of.len()).filter(|&i| self.fold_of[i] == fold).collect()
    }

    pub fn train_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.fold_of.len()).filter(|&i| self.fold_of[i] != fold).collect()
    }
}

/// Assign instances to `k` stratified folds, deterministically by seed.
pub fn stratified_kfold(labels: &[bool], k: usize, seed: u64) -> Result<FoldAssignment> {
    if k < 2 {
        return Err(Error::InvalidArgument(
            "k must be >= 2: a single fold leaves no held-out data".into(),
        ));
    }
    let mut pos: Vec<usize> = Vec::new();
    let mut neg: Vec<usize> = Vec::new();
    for (i, &l) in labels.iter().enumerate() {
        if l {
            pos.push(i);
        } else {
            neg.push(i);
        }
    }
    for (name, class) in [("positive", &pos), ("negative", &neg)] {
        if class.len() < k {
            return Err(Error::InvalidArgument(format!(
                "{name} class has {} members, fewer than k = {k}",
                class.len()
            )));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    pos.shuffle(&mut rng);
    neg.shuffle(&mut rng);
    let mut fold_of = vec![0usize; labels.len()];
    for (i, &idx) in pos.iter().enumerate() {
        fold_of[idx] = i % k;
    }
    for (i, &idx) in neg.iter().enumerate() {
        fold_of[idx] = i % k;
    }
    Ok(FoldAssignment { fold_of, k })
}

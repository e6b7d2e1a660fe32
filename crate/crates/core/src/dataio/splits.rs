//! Seeded train/test day assignment.
//!
//! Two modes. Repeated random subsampling (the default) draws each fold's
//! training days independently at the requested fraction, so fractions like
//! 80/20 combine freely with any fold count; disjointness holds within a
//! fold only. Classic k-fold partitions the days once into `fold_count`
//! disjoint test blocks.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitMode {
    Subsample,
    KFold,
}

/// One fold's day assignment; indices are sorted ascending.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fold {
    pub train_days: Vec<usize>,
    pub test_days: Vec<usize>,
}

/// A reproducible experiment plan over day indices `0..day_count`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitPlan {
    pub mode: SplitMode,
    pub day_count: usize,
    /// Training fraction requested; for k-fold this is the implied
    /// `(fold_count - 1) / fold_count`.
    pub train_fraction: f64,
    pub seed: u64,
    pub folds: Vec<Fold>,
}

impl SplitPlan {
    pub fn fold_count(&self) -> usize {
        self.folds.len()
    }
}

/// Repeated random subsampling: per fold, `round(train_fraction·day_count)`
/// training days drawn without replacement; the rest test. Deterministic in
/// `seed`; folds draw from one stream, so they differ from each other.
pub fn make_splits(
    day_count: usize,
    train_fraction: f64,
    fold_count: usize,
    seed: u64,
) -> Result<SplitPlan> {
    if !train_fraction.is_finite() || train_fraction <= 0.0 || train_fraction >= 1.0 {
        return Err(Error::parameter(
            "train_fraction",
            format!("must be strictly between 0 and 1, got {train_fraction}"),
        ));
    }
    if fold_count == 0 {
        return Err(Error::parameter("fold_count", "must be at least 1".to_string()));
    }
    let train_size = (train_fraction * day_count as f64).round() as usize;
    if train_size == 0 || train_size >= day_count {
        return Err(Error::data(format!(
            "degenerate split: {train_size} train / {} test days",
            day_count.saturating_sub(train_size)
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut folds = Vec::with_capacity(fold_count);
    for _ in 0..fold_count {
        let mut train = rand::seq::index::sample(&mut rng, day_count, train_size).into_vec();
        train.sort_unstable();
        let test = complement(&train, day_count);
        folds.push(Fold {
            train_days: train,
            test_days: test,
        });
    }
    Ok(SplitPlan {
        mode: SplitMode::Subsample,
        day_count,
        train_fraction,
        seed,
        folds,
    })
}

/// Classic k-fold: one seeded shuffle, then `fold_count` contiguous chunks
/// as disjoint test sets (sizes differ by at most one) whose union covers
/// all days.
pub fn make_kfold_splits(day_count: usize, fold_count: usize, seed: u64) -> Result<SplitPlan> {
    if fold_count < 2 {
        return Err(Error::parameter(
            "fold_count",
            "k-fold needs at least 2 folds".to_string(),
        ));
    }
    if day_count < fold_count {
        return Err(Error::data(format!(
            "cannot form {fold_count} folds from {day_count} days"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..day_count).collect();
    use rand::seq::SliceRandom;
    order.shuffle(&mut rng);

    let base = day_count / fold_count;
    let extra = day_count % fold_count;
    let mut folds = Vec::with_capacity(fold_count);
    let mut offset = 0usize;
    for f in 0..fold_count {
        let size = base + usize::from(f < extra);
        let mut test: Vec<usize> = order[offset..offset + size].to_vec();
        offset += size;
        test.sort_unstable();
        let train = complement(&test, day_count);
        folds.push(Fold {
            train_days: train,
            test_days: test,
        });
    }
    Ok(SplitPlan {
        mode: SplitMode::KFold,
        day_count,
        train_fraction: (fold_count - 1) as f64 / fold_count as f64,
        seed,
        folds,
    })
}

/// Ascending indices of `0..n` not present in the sorted `sorted_subset`.
fn complement(sorted_subset: &[usize], n: usize) -> Vec<usize> {
    let mut out = Vec::with_capacity(n - sorted_subset.len());
    let mut it = sorted_subset.iter().peekable();
    for i in 0..n {
        if it.peek() == Some(&&i) {
            it.next();
        } else {
            out.push(i);
        }
    }
    out
}

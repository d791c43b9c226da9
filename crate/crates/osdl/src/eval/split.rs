//! Seeded random partition of observed rating cells into train, validation,
//! and test sets, plus the per-user views the pipeline consumes.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{RatingCell, RatingDataset};
use crate::error::{Error, Result};

fn default_fractions() -> (f64, f64, f64) {
    (0.8, 0.1, 0.1)
}

/// Split configuration. The default fractions match the benchmark protocol:
/// 80% observation set, 10% validation, 10% test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub seed: u64,
    #[serde(default = "default_fractions")]
    pub fractions: (f64, f64, f64),
}

impl SplitSpec {
    pub fn new(seed: u64) -> Self {
        SplitSpec {
            seed,
            fractions: default_fractions(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (a, b, c) = self.fractions;
        if !(a >= 0.0 && b >= 0.0 && c >= 0.0) || (a + b + c - 1.0).abs() > 1e-9 {
            return Err(Error::param(format!(
                "split fractions must be non-negative and sum to 1, got {:?}",
                self.fractions
            )));
        }
        Ok(())
    }
}

/// A partition of the observed cells.
#[derive(Debug, Clone)]
pub struct SplitSets {
    pub train: Vec<RatingCell>,
    pub validation: Vec<RatingCell>,
    pub test: Vec<RatingCell>,
}

/// Part sizes for `n` cells: train and validation round to the nearest
/// integer, test takes the remainder.
pub fn split_sizes(n: usize, fractions: (f64, f64, f64)) -> (usize, usize, usize) {
    let train = ((fractions.0 * n as f64).round() as usize).min(n);
    let validation = ((fractions.1 * n as f64).round() as usize).min(n - train);
    (train, validation, n - train - validation)
}

/// Uniform seeded partition of the observed cells.
pub fn split(ds: &RatingDataset, spec: &SplitSpec) -> SplitSets {
    let mut order: Vec<usize> = (0..ds.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    order.shuffle(&mut rng);
    let (n_train, n_val, _) = split_sizes(ds.len(), spec.fractions);
    let pick = |range: std::ops::Range<usize>| -> Vec<RatingCell> {
        let mut cells: Vec<RatingCell> = order[range].iter().map(|&i| ds.cells()[i]).collect();
        cells.sort_unstable_by_key(|c| (c.user, c.item));
        cells
    };
    SplitSets {
        train: pick(0..n_train),
        validation: pick(n_train..n_train + n_val),
        test: pick(n_train + n_val..ds.len()),
    }
}

/// Groups cells by user; each user's list is sorted by item.
pub fn per_user_ratings(cells: &[RatingCell], n_users: usize) -> Vec<Vec<(usize, f64)>> {
    let mut by_user = vec![Vec::new(); n_users];
    for c in cells {
        by_user[c.user as usize].push((c.item as usize, c.rating));
    }
    for list in &mut by_user {
        list.sort_unstable_by_key(|&(item, _)| item);
    }
    by_user
}

/// Per-item mean ratings with a global-mean fallback for unseen items.
#[derive(Debug, Clone)]
pub struct ItemMeans {
    means: Vec<f64>,
}

impl ItemMeans {
    pub fn get(&self, item: usize) -> f64 {
        self.means[item]
    }
}

/// Item means over `cells` (typically the training split).
pub fn item_means(cells: &[RatingCell], n_items: usize) -> ItemMeans {
    let mut sums = vec![0.0; n_items];
    let mut counts = vec![0usize; n_items];
    let mut total = 0.0;
    for c in cells {
        sums[c.item as usize] += c.rating;
        counts[c.item as usize] += 1;
        total += c.rating;
    }
    let global = if cells.is_empty() {
        0.0
    } else {
        total / cells.len() as f64
    };
    let means = (0..n_items)
        .map(|i| {
            if counts[i] > 0 {
                sums[i] / counts[i] as f64
            } else {
                global
            }
        })
        .collect();
    ItemMeans { means }
}

/// RMSE and MAE of predicting every cell by its item's training mean.
pub fn item_mean_baseline(means: &ItemMeans, cells: &[RatingCell]) -> Result<(f64, f64)> {
    let pairs: Vec<(f64, f64)> = cells
        .iter()
        .map(|c| (c.rating, means.get(c.item as usize)))
        .collect();
    Ok((super::rmse(&pairs)?, super::mae(&pairs)?))
}

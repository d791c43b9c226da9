//! Metrics, dataset splitting, and the grid-search benchmark protocol.

mod grid;
mod split;

pub use grid::{
    grid_search, read_trials_csv, surfaces, write_surface_csv, write_trials_csv, GridOptions,
    GridOutcome, Grids, Surface, TrialFailure, TrialKey, TrialResult,
};
pub use split::{
    item_mean_baseline, item_means, per_user_ratings, split, split_sizes, ItemMeans, SplitSets,
    SplitSpec,
};

use crate::error::{Error, Result};

/// Root mean squared error over (truth, estimate) pairs.
pub fn rmse(pairs: &[(f64, f64)]) -> Result<f64> {
    if pairs.is_empty() {
        return Err(Error::EmptyInput("metric pair list"));
    }
    let sum: f64 = pairs.iter().map(|(t, e)| (t - e) * (t - e)).sum();
    Ok((sum / pairs.len() as f64).sqrt())
}

/// Mean absolute error over (truth, estimate) pairs.
pub fn mae(pairs: &[(f64, f64)]) -> Result<f64> {
    if pairs.is_empty() {
        return Err(Error::EmptyInput("metric pair list"));
    }
    let sum: f64 = pairs.iter().map(|(t, e)| (t - e).abs()).sum();
    Ok(sum / pairs.len() as f64)
}

//! Online dictionary optimization over a stream of partially observed
//! samples.
//!
//! Each mini-batch is coded against the frozen dictionary, folded into the
//! sufficient statistics under one forgetting discount, and followed by a
//! block-coordinate sweep over the dictionary columns. The statistics make
//! the column subproblems diagonal: for column `j`,
//! `C_j o u_j = b_j - e_j + C_j o d_j`, after which `u_j` is projected onto
//! the unit ball.

use ndarray::{Array1, Array2, ArrayView1};
use serde::{Deserialize, Serialize};

use crate::coder::{solve_code, CoderConfig};
use crate::dictionary::{project_to_unit_ball, Dictionary};
use crate::error::{Error, Result};
use crate::groups::GroupStructure;

/// Below this value a diagonal statistic is treated as "no signal" and the
/// corresponding coordinate keeps its previous value.
pub const DEGENERATE_STAT: f64 = 1e-12;

/// One partially observed sample: the observed coordinate indices (strictly
/// increasing) and their values.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    obs: Vec<usize>,
    values: Array1<f64>,
}

impl Sample {
    pub fn new(obs: Vec<usize>, values: Array1<f64>) -> Result<Sample> {
        if obs.len() != values.len() {
            return Err(Error::shape(format!(
                "{} observed indices but {} values",
                obs.len(),
                values.len()
            )));
        }
        if obs.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::shape("observed indices must be strictly increasing"));
        }
        Ok(Sample { obs, values })
    }

    pub fn obs(&self) -> &[usize] {
        &self.obs
    }

    pub fn values(&self) -> ArrayView1<'_, f64> {
        self.values.view()
    }
}

/// Training configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearnerConfig {
    /// Forgetting factor; 0 keeps the plain running average.
    #[serde(default)]
    pub rho: f64,
    /// Samples coded against one frozen dictionary before a statistics and
    /// dictionary update.
    #[serde(default = "default_minibatch")]
    pub minibatch: usize,
    /// Column sweeps per dictionary update.
    #[serde(default = "default_bcd_iters")]
    pub bcd_iters: usize,
    /// Sparse-coding settings used during training.
    pub coder: CoderConfig,
    /// Seed for the dictionary initialization.
    #[serde(default)]
    pub seed: u64,
}

fn default_minibatch() -> usize {
    8
}

fn default_bcd_iters() -> usize {
    5
}

impl LearnerConfig {
    pub fn new(coder: CoderConfig) -> Self {
        LearnerConfig {
            rho: 0.0,
            minibatch: default_minibatch(),
            bcd_iters: default_bcd_iters(),
            coder,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rho >= 0.0) {
            return Err(Error::param(format!(
                "forgetting factor must be non-negative, got {}",
                self.rho
            )));
        }
        if self.minibatch == 0 {
            return Err(Error::param("mini-batch size must be at least 1"));
        }
        if self.bcd_iters == 0 {
            return Err(Error::param("bcd_iters must be at least 1"));
        }
        self.coder.validate()
    }
}

/// Online sufficient statistics. Columns of `c`, `b`, `e` correspond to
/// dictionary columns: `c` holds the diagonal quadratic weights, `b` the
/// masked data cross-products, and `e` the running reconstruction
/// cross-products.
#[derive(Debug, Clone, PartialEq)]
pub struct LearnerStats {
    c: Array2<f64>,
    b: Array2<f64>,
    e: Array2<f64>,
    t: u64,
    rho: f64,
}

impl LearnerStats {
    pub fn new(obs_dim: usize, code_dim: usize, rho: f64) -> LearnerStats {
        LearnerStats {
            c: Array2::zeros((obs_dim, code_dim)),
            b: Array2::zeros((obs_dim, code_dim)),
            e: Array2::zeros((obs_dim, code_dim)),
            t: 0,
            rho,
        }
    }

    pub fn t(&self) -> u64 {
        self.t
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn c_col(&self, j: usize) -> ArrayView1<'_, f64> {
        self.c.column(j)
    }

    pub fn b_col(&self, j: usize) -> ArrayView1<'_, f64> {
        self.b.column(j)
    }

    pub fn e_col(&self, j: usize) -> ArrayView1<'_, f64> {
        self.e.column(j)
    }

    /// Advances the step counter and applies the forgetting discount
    /// `(1 - 1/t)^rho` once. At `t = 1` with a positive forgetting factor the
    /// discount is zero, so whatever the statistics held before is erased.
    pub fn begin_step(&mut self) {
        self.t += 1;
        let gamma = (1.0 - 1.0 / self.t as f64).powf(self.rho);
        if gamma != 1.0 {
            self.c *= gamma;
            self.b *= gamma;
            self.e *= gamma;
        }
    }

    /// Adds one coded sample's contribution (undiscounted; the discount is
    /// [`begin_step`](Self::begin_step)'s job). `dict` must be the dictionary
    /// the sample was coded against.
    pub fn accumulate(
        &mut self,
        sample: &Sample,
        code: ArrayView1<f64>,
        dict: &Dictionary,
    ) -> Result<()> {
        let (obs_dim, code_dim) = (self.c.nrows(), self.c.ncols());
        if code.len() != code_dim {
            return Err(Error::shape(format!(
                "code length {} does not match {code_dim}",
                code.len()
            )));
        }
        if dict.obs_dim() != obs_dim || dict.code_dim() != code_dim {
            return Err(Error::shape("dictionary does not match statistics"));
        }
        if sample.obs.last().is_some_and(|&o| o >= obs_dim) {
            return Err(Error::shape(format!(
                "observed index {} outside dimension {obs_dim}",
                sample.obs.last().unwrap()
            )));
        }
        let reconstruction = dict.matrix().dot(&code);
        for (k, &o) in sample.obs.iter().enumerate() {
            let x = sample.values[k];
            let y = reconstruction[o];
            let mut c_row = self.c.row_mut(o);
            let mut b_row = self.b.row_mut(o);
            let mut e_row = self.e.row_mut(o);
            for j in 0..code_dim {
                let a = code[j];
                c_row[j] += a * a;
                b_row[j] += x * a;
                e_row[j] += y * a;
            }
        }
        Ok(())
    }

    /// Single-sample step: one discount application, one contribution.
    pub fn update(
        &mut self,
        sample: &Sample,
        code: ArrayView1<f64>,
        dict: &Dictionary,
    ) -> Result<()> {
        self.begin_step();
        self.accumulate(sample, code, dict)
    }
}

/// Solves the diagonal column subproblem `C o u = b - e + C o d`.
/// Coordinates whose diagonal statistic is below [`DEGENERATE_STAT`] received
/// no signal for this column and keep their previous value.
pub fn solve_column(
    c: ArrayView1<f64>,
    b: ArrayView1<f64>,
    e: ArrayView1<f64>,
    d: ArrayView1<f64>,
) -> Array1<f64> {
    Array1::from_shape_fn(c.len(), |i| {
        if c[i] < DEGENERATE_STAT {
            d[i]
        } else {
            d[i] + (b[i] - e[i]) / c[i]
        }
    })
}

/// Runs `sweeps` block-coordinate passes over the dictionary columns. Each
/// column is solved against the statistics and projected onto the unit ball.
///
/// The `e` statistics are deliberately not rewritten inside a sweep; they
/// carry the online approximation accumulated against the dictionary as of
/// this update's start. Because the `C_j o d_j` term exists to cancel `e`'s
/// own-column content, every solve must use the entry value of the column:
/// feeding an already-updated column back in would re-apply the same
/// displacement on each pass and drift. With diagonal statistics the column
/// subproblems carry no cross coupling, so repeated sweeps are idempotent.
pub fn bcd_step(dict: &mut Dictionary, stats: &LearnerStats, sweeps: usize) {
    let entry = dict.matrix().clone();
    for _ in 0..sweeps {
        for j in 0..dict.code_dim() {
            let u = solve_column(
                stats.c_col(j),
                stats.b_col(j),
                stats.e_col(j),
                entry.column(j),
            );
            let projected = project_to_unit_ball(u.view());
            dict.set_column(j, projected.view());
        }
    }
}

/// Result of a training run.
#[derive(Debug)]
pub struct TrainOutcome {
    pub dictionary: Dictionary,
    pub stats: LearnerStats,
    /// Samples dropped because their observation set was empty.
    pub skipped_empty: usize,
    /// Samples actually coded and folded into the statistics.
    pub samples: usize,
}

/// Consumes a stream of samples in mini-batches: codes each sample against
/// the current dictionary, applies one statistics step per batch, then runs
/// the block-coordinate update. A trailing partial batch is processed the
/// same way.
pub fn train<I>(
    obs_dim: usize,
    stream: I,
    gs: &GroupStructure,
    cfg: &LearnerConfig,
) -> Result<TrainOutcome>
where
    I: IntoIterator<Item = Sample>,
{
    cfg.validate()?;
    if obs_dim == 0 {
        return Err(Error::param("observation dimension must be at least 1"));
    }
    let code_dim = gs.code_dim();
    let mut dict = Dictionary::init(obs_dim, code_dim, cfg.seed);
    let mut stats = LearnerStats::new(obs_dim, code_dim, cfg.rho);
    let mut skipped = 0usize;
    let mut coded = 0usize;
    let mut batch: Vec<(Sample, Array1<f64>)> = Vec::with_capacity(cfg.minibatch);

    let flush = |dict: &mut Dictionary,
                     stats: &mut LearnerStats,
                     batch: &mut Vec<(Sample, Array1<f64>)>|
     -> Result<()> {
        stats.begin_step();
        for (sample, code) in batch.iter() {
            stats.accumulate(sample, code.view(), dict)?;
        }
        bcd_step(dict, stats, cfg.bcd_iters);
        batch.clear();
        Ok(())
    };

    for sample in stream {
        if sample.obs.is_empty() {
            skipped += 1;
            continue;
        }
        if *sample.obs.last().unwrap() >= obs_dim {
            return Err(Error::shape(format!(
                "observed index {} outside dimension {obs_dim}",
                sample.obs.last().unwrap()
            )));
        }
        let d_obs = dict.restrict_rows(&sample.obs);
        let solved = solve_code(sample.values.view(), d_obs.view(), gs, &cfg.coder)?;
        batch.push((sample, solved.code));
        if batch.len() == cfg.minibatch {
            coded += batch.len();
            flush(&mut dict, &mut stats, &mut batch)?;
        }
    }
    if !batch.is_empty() {
        coded += batch.len();
        flush(&mut dict, &mut stats, &mut batch)?;
    }
    if stats.t == 0 {
        return Err(Error::EmptyStream);
    }
    Ok(TrainOutcome {
        dictionary: dict,
        stats,
        skipped_empty: skipped,
        samples: coded,
    })
}

/// Exact-statistics reference path. Everything here recomputes from a
/// retained sample buffer instead of the online recursions; it exists to
/// separate the online approximation from solver defects and is used by the
/// verification suites.
pub mod reference {
    use super::*;
    use crate::coder::structured_norm;

    /// A retained sample together with the step index it was processed under
    /// and the code it received.
    #[derive(Debug, Clone)]
    pub struct CodedSample {
        pub step: u64,
        pub obs: Vec<usize>,
        pub values: Array1<f64>,
        pub code: Array1<f64>,
    }

    fn final_step(records: &[CodedSample]) -> u64 {
        records.iter().map(|r| r.step).max().unwrap_or(0)
    }

    fn weight(step: u64, t: u64, rho: f64) -> f64 {
        (step as f64 / t as f64).powf(rho)
    }

    /// Brute-force batch statistics: weighted sums over the buffer, with the
    /// reconstruction cross-products taken at the given (frozen) dictionary.
    pub fn batch_stats(records: &[CodedSample], dict: &Dictionary, rho: f64) -> LearnerStats {
        let (obs_dim, code_dim) = (dict.obs_dim(), dict.code_dim());
        let t = final_step(records);
        let mut stats = LearnerStats::new(obs_dim, code_dim, rho);
        stats.t = t;
        for r in records {
            let w = weight(r.step, t, rho);
            let reconstruction = dict.matrix().dot(&r.code);
            for (k, &o) in r.obs.iter().enumerate() {
                for j in 0..code_dim {
                    let a = r.code[j];
                    stats.c[[o, j]] += w * a * a;
                    stats.b[[o, j]] += w * r.values[k] * a;
                    stats.e[[o, j]] += w * reconstruction[o] * a;
                }
            }
        }
        stats
    }

    /// The empirical dictionary cost at `dict`: normalized weighted sum of
    /// per-sample coding losses at the recorded codes.
    pub fn empirical_cost(
        records: &[CodedSample],
        dict: &Dictionary,
        gs: &GroupStructure,
        kappa: f64,
        eta: f64,
        rho: f64,
    ) -> f64 {
        let t = final_step(records);
        let mut total = 0.0;
        let mut normalizer = 0.0;
        for r in records {
            let w = weight(r.step, t, rho);
            normalizer += w;
            let d_obs = dict.restrict_rows(&r.obs);
            let residual = &r.values - &d_obs.dot(&r.code);
            let fit = 0.5 * residual.iter().map(|v| v * v).sum::<f64>();
            total += w * (fit + kappa * structured_norm(r.code.view(), gs, eta));
        }
        total / normalizer
    }

    /// The column solve with statistics recomputed exactly at the current
    /// dictionary; returns the pre-projection solution.
    pub fn exact_column_solve(
        records: &[CodedSample],
        dict: &Dictionary,
        rho: f64,
        j: usize,
    ) -> Array1<f64> {
        let stats = batch_stats(records, dict, rho);
        solve_column(
            stats.c_col(j),
            stats.b_col(j),
            stats.e_col(j),
            dict.column(j),
        )
    }

    /// One Gauss-Seidel sweep with exact statistics refreshed before every
    /// column. Returns the pre-projection norm of each column solve.
    pub fn exact_bcd_sweep(records: &[CodedSample], dict: &mut Dictionary, rho: f64) -> Vec<f64> {
        let mut norms = Vec::with_capacity(dict.code_dim());
        for j in 0..dict.code_dim() {
            let u = exact_column_solve(records, dict, rho, j);
            norms.push(u.iter().map(|v| v * v).sum::<f64>().sqrt());
            let projected = project_to_unit_ball(u.view());
            dict.set_column(j, projected.view());
        }
        norms
    }
}

//! Rating prediction against a trained dictionary, with similarity-weighted
//! neighbor corrections.
//!
//! Prediction is two-step: code the user's observed ratings against the row
//! restriction of the dictionary, then estimate every coordinate as the full
//! dictionary times the code. The correction step shifts an unobserved item's
//! estimate by the similarity-weighted average of the prediction errors on
//! the user's observed items, where item similarities are derived from the
//! dictionary rows.

use ndarray::{Array1, Array2, ArrayView1};
use serde::{Deserialize, Serialize};
use std::fmt;

use crate::coder::{solve_code, CoderConfig};
use crate::dictionary::Dictionary;
use crate::error::{Error, Result};
use crate::groups::GroupStructure;

/// Correction scheme. The `*Zero` variants scale the base term by a fitted
/// weight instead of keeping it fixed at one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Scheme {
    S1,
    S2,
    #[serde(rename = "S1_0")]
    S1Zero,
    #[serde(rename = "S2_0")]
    S2Zero,
}

impl Scheme {
    pub const ALL: [Scheme; 4] = [Scheme::S1, Scheme::S2, Scheme::S1Zero, Scheme::S2Zero];

    /// The similarity family backing the scheme.
    pub fn similarity_kind(self) -> SimilarityKind {
        match self {
            Scheme::S1 | Scheme::S1Zero => SimilarityKind::Cosine,
            Scheme::S2 | Scheme::S2Zero => SimilarityKind::InverseSqDistance,
        }
    }

    /// Whether the base term carries its own fitted weight.
    pub fn fits_base_weight(self) -> bool {
        matches!(self, Scheme::S1Zero | Scheme::S2Zero)
    }

    pub fn parse(s: &str) -> Result<Scheme> {
        match s {
            "S1" => Ok(Scheme::S1),
            "S2" => Ok(Scheme::S2),
            "S1_0" => Ok(Scheme::S1Zero),
            "S2_0" => Ok(Scheme::S2Zero),
            other => Err(Error::param(format!("unknown correction scheme {other:?}"))),
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Scheme::S1 => "S1",
            Scheme::S2 => "S2",
            Scheme::S1Zero => "S1_0",
            Scheme::S2Zero => "S2_0",
        };
        f.write_str(s)
    }
}

/// Item-similarity family.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SimilarityKind {
    /// Clipped cosine of the two rows, raised to `beta`; lies in [0, 1].
    Cosine,
    /// Normalized squared distance of the rows, raised to `-beta`; diverges
    /// for identical rows and is therefore capped.
    InverseSqDistance,
}

/// Closed rating interval predictions are clamped to.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatingRange {
    pub lo: f64,
    pub hi: f64,
}

impl RatingRange {
    pub fn clamp(&self, v: f64) -> f64 {
        v.clamp(self.lo, self.hi)
    }
}

impl Default for RatingRange {
    fn default() -> Self {
        RatingRange { lo: -10.0, hi: 10.0 }
    }
}

fn default_sim_clamp() -> f64 {
    1e12
}

fn default_gamma0() -> f64 {
    1.0
}

/// Parameters of the neighbor-correction step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrectionConfig {
    pub scheme: Scheme,
    /// Similarity sharpness exponent, `> 0`.
    pub beta: f64,
    /// Base-term weight; only read by the `*Zero` schemes.
    #[serde(default = "default_gamma0")]
    pub gamma0: f64,
    /// Correction-term weight.
    pub gamma1: f64,
    /// Cap for the divergent inverse-distance similarity.
    #[serde(default = "default_sim_clamp")]
    pub sim_clamp: f64,
    #[serde(default)]
    pub rating_range: RatingRange,
}

impl Default for CorrectionConfig {
    fn default() -> Self {
        CorrectionConfig {
            scheme: Scheme::S1,
            beta: 1.0,
            gamma0: 1.0,
            gamma1: 0.0,
            sim_clamp: default_sim_clamp(),
            rating_range: RatingRange::default(),
        }
    }
}

impl CorrectionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.beta > 0.0) {
            return Err(Error::param(format!("beta must be positive, got {}", self.beta)));
        }
        if !(self.sim_clamp > 0.0) {
            return Err(Error::param("sim_clamp must be positive"));
        }
        if !(self.rating_range.lo < self.rating_range.hi) {
            return Err(Error::param("rating range must be a non-empty interval"));
        }
        Ok(())
    }
}

/// Similarity of two dictionary rows. A zero row carries no information
/// about its item and gets similarity 0 against everything.
pub fn similarity(
    a: ArrayView1<f64>,
    b: ArrayView1<f64>,
    kind: SimilarityKind,
    beta: f64,
    sim_clamp: f64,
) -> f64 {
    let na = a.iter().map(|v| v * v).sum::<f64>().sqrt();
    let nb = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    if na <= 0.0 || nb <= 0.0 {
        return 0.0;
    }
    match kind {
        SimilarityKind::Cosine => {
            let cos = (a.dot(&b) / (na * nb)).max(0.0);
            cos.powf(beta)
        }
        SimilarityKind::InverseSqDistance => {
            let dist2 = a
                .iter()
                .zip(b.iter())
                .map(|(x, y)| (x - y) * (x - y))
                .sum::<f64>();
            let q = dist2 / (na * nb);
            if q <= 0.0 {
                return sim_clamp;
            }
            q.powf(-beta).min(sim_clamp)
        }
    }
}

/// Dense item-by-item similarity table for one dictionary and one
/// (kind, beta) choice, built from the row Gram matrix.
#[derive(Debug, Clone)]
pub struct SimilarityMatrix {
    values: Array2<f64>,
}

impl SimilarityMatrix {
    pub fn build(dict: &Dictionary, kind: SimilarityKind, beta: f64, sim_clamp: f64) -> Self {
        let n = dict.obs_dim();
        let gram = dict.row_gram();
        let norms: Vec<f64> = (0..n).map(|i| gram[[i, i]].max(0.0).sqrt()).collect();
        let mut values = Array2::zeros((n, n));
        for i in 0..n {
            for j in i..n {
                let s = if norms[i] <= 0.0 || norms[j] <= 0.0 {
                    0.0
                } else {
                    match kind {
                        SimilarityKind::Cosine => {
                            (gram[[i, j]] / (norms[i] * norms[j])).max(0.0).powf(beta)
                        }
                        SimilarityKind::InverseSqDistance => {
                            let dist2 = (gram[[i, i]] + gram[[j, j]] - 2.0 * gram[[i, j]]).max(0.0);
                            let q = dist2 / (norms[i] * norms[j]);
                            if q <= 0.0 {
                                sim_clamp
                            } else {
                                q.powf(-beta).min(sim_clamp)
                            }
                        }
                    }
                };
                values[[i, j]] = s;
                values[[j, i]] = s;
            }
        }
        SimilarityMatrix { values }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[[i, j]]
    }

    pub fn n_items(&self) -> usize {
        self.values.nrows()
    }
}

/// Code plus full-dimension estimate for one user.
#[derive(Debug, Clone)]
pub struct BasePrediction {
    pub code: Array1<f64>,
    /// Estimates for every coordinate, observed or not (unclamped).
    pub estimate: Array1<f64>,
}

/// Codes the observed ratings against the row-restricted dictionary and
/// extends the estimate to every coordinate.
pub fn predict_base(
    dict: &Dictionary,
    obs: &[usize],
    x_obs: ArrayView1<f64>,
    gs: &GroupStructure,
    coder_cfg: &CoderConfig,
) -> Result<BasePrediction> {
    if obs.is_empty() {
        return Err(Error::EmptyObservations);
    }
    if dict.code_dim() != gs.code_dim() {
        return Err(Error::shape(format!(
            "dictionary code dimension {} does not match structure {}",
            dict.code_dim(),
            gs.code_dim()
        )));
    }
    let d_obs = dict.restrict_rows(obs);
    let solved = solve_code(x_obs, d_obs.view(), gs, coder_cfg)?;
    let estimate = dict.matrix().dot(&solved.code);
    Ok(BasePrediction {
        code: solved.code,
        estimate,
    })
}

/// Similarity-weighted average of neighbor errors; `None` when the weights
/// sum to zero (no usable neighbor).
pub fn weighted_error_correction(sims: &[f64], errors: &[f64]) -> Option<f64> {
    debug_assert_eq!(sims.len(), errors.len());
    let total: f64 = sims.iter().sum();
    if total <= 0.0 {
        return None;
    }
    let acc: f64 = sims.iter().zip(errors).map(|(s, e)| s * e).sum();
    Some(acc / total)
}

/// One corrected estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Corrected {
    /// Final estimate, clamped to the rating range.
    pub value: f64,
    /// Same estimate before clamping.
    pub unclamped: f64,
    /// True when every similarity was zero and only the (possibly scaled)
    /// base term was returned.
    pub fallback: bool,
}

/// Corrects the base estimate of `item` (not in `obs`) using the prediction
/// errors on the user's observed items.
pub fn correct(
    item: usize,
    obs: &[usize],
    x_obs: ArrayView1<f64>,
    estimate: ArrayView1<f64>,
    sims: &SimilarityMatrix,
    cfg: &CorrectionConfig,
) -> Corrected {
    let base = estimate[item];
    let base_term = if cfg.scheme.fits_base_weight() {
        cfg.gamma0 * base
    } else {
        base
    };
    let s: Vec<f64> = obs.iter().map(|&j| sims.get(item, j)).collect();
    let e: Vec<f64> = obs
        .iter()
        .enumerate()
        .map(|(k, &j)| estimate[j] - x_obs[k])
        .collect();
    match weighted_error_correction(&s, &e) {
        Some(corr) => {
            let unclamped = base_term + cfg.gamma1 * corr;
            Corrected {
                value: cfg.rating_range.clamp(unclamped),
                unclamped,
                fallback: false,
            }
        }
        None => Corrected {
            value: cfg.rating_range.clamp(base_term),
            unclamped: base_term,
            fallback: true,
        },
    }
}

/// Per-user predictions for the items outside the observation set. Both the
/// base and the corrected estimates are clamped to the rating range.
#[derive(Debug, Clone)]
pub struct Prediction {
    pub user: usize,
    pub items: Vec<usize>,
    pub base: Vec<f64>,
    pub corrected: Vec<f64>,
    pub fallback: Vec<bool>,
}

/// Reusable prediction context: holds the similarity table for one
/// dictionary and correction configuration.
pub struct Predictor<'a> {
    dict: &'a Dictionary,
    gs: &'a GroupStructure,
    coder_cfg: CoderConfig,
    corr_cfg: CorrectionConfig,
    sims: SimilarityMatrix,
}

impl<'a> Predictor<'a> {
    pub fn new(
        dict: &'a Dictionary,
        gs: &'a GroupStructure,
        coder_cfg: CoderConfig,
        corr_cfg: CorrectionConfig,
    ) -> Result<Self> {
        coder_cfg.validate()?;
        corr_cfg.validate()?;
        let sims = SimilarityMatrix::build(
            dict,
            corr_cfg.scheme.similarity_kind(),
            corr_cfg.beta,
            corr_cfg.sim_clamp,
        );
        Ok(Predictor {
            dict,
            gs,
            coder_cfg,
            corr_cfg,
            sims,
        })
    }

    /// Predicts every item outside `obs` for one user.
    pub fn predict_user(
        &self,
        user: usize,
        obs: &[usize],
        x_obs: ArrayView1<f64>,
    ) -> Result<Prediction> {
        let base = predict_base(self.dict, obs, x_obs, self.gs, &self.coder_cfg)?;
        let observed: std::collections::BTreeSet<usize> = obs.iter().copied().collect();
        let mut items = Vec::new();
        let mut base_out = Vec::new();
        let mut corrected = Vec::new();
        let mut fallback = Vec::new();
        for item in 0..self.dict.obs_dim() {
            if observed.contains(&item) {
                continue;
            }
            let c = correct(
                item,
                obs,
                x_obs,
                base.estimate.view(),
                &self.sims,
                &self.corr_cfg,
            );
            items.push(item);
            base_out.push(self.corr_cfg.rating_range.clamp(base.estimate[item]));
            corrected.push(c.value);
            fallback.push(c.fallback);
        }
        Ok(Prediction {
            user,
            items,
            base: base_out,
            corrected,
            fallback,
        })
    }
}

/// One observation for the correction-weight fit.
#[derive(Debug, Clone, Copy)]
pub struct GammaPoint {
    pub truth: f64,
    pub base: f64,
    pub corr: f64,
}

/// Least-squares fit of `truth ~ gamma0 * base + gamma1 * corr` on validation
/// residuals. Schemes without a base weight fix `gamma0 = 1` and fit the
/// correction weight alone. Rank-deficient normal equations fall back to
/// `(1, 0)`.
pub fn fit_gammas(points: &[GammaPoint], scheme: Scheme) -> (f64, f64) {
    if points.len() < 2 {
        return (1.0, 0.0);
    }
    if scheme.fits_base_weight() {
        let (mut sbb, mut sbc, mut scc, mut sbt, mut sct) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for p in points {
            sbb += p.base * p.base;
            sbc += p.base * p.corr;
            scc += p.corr * p.corr;
            sbt += p.base * p.truth;
            sct += p.corr * p.truth;
        }
        let det = sbb * scc - sbc * sbc;
        let scale = (sbb * scc).max(f64::MIN_POSITIVE);
        if det.abs() <= 1e-12 * scale {
            return (1.0, 0.0);
        }
        let gamma0 = (sbt * scc - sct * sbc) / det;
        let gamma1 = (sct * sbb - sbt * sbc) / det;
        (gamma0, gamma1)
    } else {
        let mut scc = 0.0;
        let mut srt = 0.0;
        for p in points {
            scc += p.corr * p.corr;
            srt += p.corr * (p.truth - p.base);
        }
        if scc <= 1e-300 {
            return (1.0, 0.0);
        }
        (1.0, srt / scc)
    }
}

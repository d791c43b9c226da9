//! The benchmark protocol: for every hyperparameter tuple, train a dictionary
//! on the observation split, pick the correction scheme, similarity
//! sharpness, and correction weights on validation, and score the frozen
//! winner once on the test cells. Trials are independent and run in
//! parallel; results merge in configuration order, so parallel and serial
//! sweeps produce identical reports.

use std::cell::Cell;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::time::Instant;

use ndarray::Array1;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coder::{CodeConstraint, CoderConfig};
use crate::data::{RatingCell, RatingDataset};
use crate::error::{Error, Result};
use crate::groups::StructureSpec;
use crate::learner::{train, LearnerConfig, Sample};
use crate::recommender::{
    fit_gammas, predict_base, weighted_error_correction, GammaPoint, RatingRange, Scheme,
    SimilarityKind, SimilarityMatrix,
};
use crate::seeding::subseed;

use super::split::{item_means, per_user_ratings, split, ItemMeans, SplitSpec};
use super::{mae, rmse};

fn default_eta() -> f64 {
    0.5
}

fn default_inner_iters() -> usize {
    5
}

fn default_epsilon() -> f64 {
    1e-5
}

fn default_bcd_iters() -> usize {
    5
}

fn default_passes() -> usize {
    1
}

fn default_sim_clamp() -> f64 {
    1e12
}

fn default_schemes() -> Vec<Scheme> {
    Scheme::ALL.to_vec()
}

fn default_betas() -> Vec<f64> {
    paper_betas()
}

/// The published similarity grid: 0.2, 1.0, 1.8, ..., 14.6.
pub fn paper_betas() -> Vec<f64> {
    (0..19).map(|k| 0.2 + 0.8 * k as f64).collect()
}

/// The published regularizer grid: 2, 1, 1/2, 1/4, 1/16, ..., 1/2^14.
pub fn paper_kappas() -> Vec<f64> {
    [-1i32, 0, 1, 2, 4, 6, 8, 10, 12, 14]
        .iter()
        .map(|&e| 0.5f64.powi(e))
        .collect()
}

/// The published forgetting grid: 0, 1/64, 1/32, ..., 1/2, 1.
pub fn paper_rhos() -> Vec<f64> {
    let mut v = vec![0.0];
    v.extend((0..7).map(|k| 1.0 / 64.0 * 2f64.powi(k)));
    v
}

/// Hyperparameter grids plus the fixed knobs shared by every trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grids {
    pub structures: Vec<StructureSpec>,
    pub kappas: Vec<f64>,
    pub rhos: Vec<f64>,
    pub batch_sizes: Vec<usize>,
    #[serde(default = "default_betas")]
    pub betas: Vec<f64>,
    #[serde(default = "default_schemes")]
    pub schemes: Vec<Scheme>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_eta")]
    pub eta: f64,
    #[serde(default = "default_inner_iters")]
    pub inner_iters: usize,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default = "default_bcd_iters")]
    pub bcd_iters: usize,
    /// Passes over the training users; the stream is reshuffled per pass.
    #[serde(default = "default_passes")]
    pub passes: usize,
    #[serde(default = "default_sim_clamp")]
    pub sim_clamp: f64,
    #[serde(default)]
    pub rating_range: RatingRange,
}

impl Grids {
    /// The published parameter grids over the given structures.
    pub fn paper(structures: Vec<StructureSpec>, seed: u64) -> Grids {
        Grids {
            structures,
            kappas: paper_kappas(),
            rhos: paper_rhos(),
            batch_sizes: vec![8, 16],
            betas: paper_betas(),
            schemes: Scheme::ALL.to_vec(),
            seed,
            eta: default_eta(),
            inner_iters: default_inner_iters(),
            epsilon: default_epsilon(),
            bcd_iters: default_bcd_iters(),
            passes: default_passes(),
            sim_clamp: default_sim_clamp(),
            rating_range: RatingRange::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, empty) in [
            ("structures", self.structures.is_empty()),
            ("kappas", self.kappas.is_empty()),
            ("rhos", self.rhos.is_empty()),
            ("batch_sizes", self.batch_sizes.is_empty()),
            ("betas", self.betas.is_empty()),
            ("schemes", self.schemes.is_empty()),
        ] {
            if empty {
                return Err(Error::param(format!("grid {name} must be non-empty")));
            }
        }
        if self.passes == 0 {
            return Err(Error::param("passes must be at least 1"));
        }
        // One representative coder config validates the shared knobs.
        CoderConfig {
            kappa: self.kappas[0],
            eta: self.eta,
            inner_iters: self.inner_iters,
            epsilon: self.epsilon,
            aux_exponent: None,
            constraint: CodeConstraint::Unconstrained,
        }
        .validate()
    }

    /// Trial keys in deterministic configuration order.
    pub fn keys(&self) -> Vec<TrialKey> {
        let mut keys = Vec::new();
        for &structure in &self.structures {
            for &kappa in &self.kappas {
                for &rho in &self.rhos {
                    for &batch_size in &self.batch_sizes {
                        keys.push(TrialKey {
                            structure,
                            kappa,
                            rho,
                            batch_size,
                            seed: self.seed,
                        });
                    }
                }
            }
        }
        keys
    }
}

/// One point of the outer grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrialKey {
    pub structure: StructureSpec,
    pub kappa: f64,
    pub rho: f64,
    pub batch_size: usize,
    pub seed: u64,
}

/// Outcome of one trial, including the correction parameters selected on
/// validation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub key: TrialKey,
    pub scheme: Scheme,
    pub beta: f64,
    pub gamma0: f64,
    pub gamma1: f64,
    pub validation_rmse: f64,
    pub validation_mae: f64,
    pub test_rmse: f64,
    pub test_mae: f64,
    /// Held-out cells scored without a usable correction (item-mean users
    /// plus zero-similarity fallbacks), summed over validation and test.
    pub fallback_cells: usize,
    pub wall_time_s: f64,
}

/// A trial that errored; sweeps record failures instead of aborting.
#[derive(Debug, Clone)]
pub struct TrialFailure {
    pub key: TrialKey,
    pub message: String,
}

#[derive(Debug)]
pub struct GridOutcome {
    /// Successful trials sorted by validation RMSE (ties keep configuration
    /// order).
    pub ranked: Vec<TrialResult>,
    pub failures: Vec<TrialFailure>,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct GridOptions {
    /// Worker threads; 0 means one per available core.
    pub workers: usize,
    /// Cap on the number of trials, applied in configuration order.
    pub budget: Option<usize>,
}

/// Read-only per-split data shared by every trial.
struct Prepared {
    n_users: usize,
    n_items: usize,
    user_train: Vec<Vec<(usize, f64)>>,
    val_cells: Vec<RatingCell>,
    test_cells: Vec<RatingCell>,
    means: ItemMeans,
}

impl Prepared {
    fn build(ds: &RatingDataset, spec: &SplitSpec) -> Prepared {
        let sets = split(ds, spec);
        let user_train = per_user_ratings(&sets.train, ds.n_users());
        let means = item_means(&sets.train, ds.n_items());
        Prepared {
            n_users: ds.n_users(),
            n_items: ds.n_items(),
            user_train,
            val_cells: sets.validation,
            test_cells: sets.test,
            means,
        }
    }
}

/// Access-counting view of the test cells; the selection phase must finish
/// with zero reads.
struct CountedCells<'a> {
    cells: &'a [RatingCell],
    reads: Cell<u64>,
}

impl<'a> CountedCells<'a> {
    fn new(cells: &'a [RatingCell]) -> Self {
        CountedCells {
            cells,
            reads: Cell::new(0),
        }
    }

    fn reads(&self) -> u64 {
        self.reads.get()
    }

    fn read(&self) -> &'a [RatingCell] {
        self.reads.set(self.reads.get() + self.cells.len() as u64);
        self.cells
    }
}

/// Base estimate and per-observation prediction errors for one user.
struct UserEstimate {
    estimate: Array1<f64>,
    errors: Vec<f64>,
}

/// Correction term for each cell: `None` when the user is uncoded or no
/// neighbor carries positive similarity.
fn corr_terms(
    cells: &[RatingCell],
    user_est: &[Option<UserEstimate>],
    user_train: &[Vec<(usize, f64)>],
    sims: &SimilarityMatrix,
) -> Vec<Option<f64>> {
    cells
        .iter()
        .map(|c| {
            let u = c.user as usize;
            user_est[u].as_ref().and_then(|est| {
                let s: Vec<f64> = user_train[u]
                    .iter()
                    .map(|&(j, _)| sims.get(c.item as usize, j))
                    .collect();
                weighted_error_correction(&s, &est.errors)
            })
        })
        .collect()
}

/// Clamped predictions for `cells`; returns (truth, estimate) pairs and the
/// number of cells scored without a usable correction.
fn predict_cells(
    cells: &[RatingCell],
    corr: &[Option<f64>],
    user_est: &[Option<UserEstimate>],
    scheme: Scheme,
    gamma0: f64,
    gamma1: f64,
    means: &ItemMeans,
    range: RatingRange,
) -> (Vec<(f64, f64)>, usize) {
    let mut fallback = 0usize;
    let pairs = cells
        .iter()
        .zip(corr)
        .map(|(c, ct)| {
            let item = c.item as usize;
            let raw = match &user_est[c.user as usize] {
                Some(est) => {
                    let base = est.estimate[item];
                    let base_term = if scheme.fits_base_weight() {
                        gamma0 * base
                    } else {
                        base
                    };
                    match ct {
                        Some(v) => base_term + gamma1 * v,
                        None => {
                            fallback += 1;
                            base_term
                        }
                    }
                }
                None => {
                    fallback += 1;
                    means.get(item)
                }
            };
            (c.rating, range.clamp(raw))
        })
        .collect();
    (pairs, fallback)
}

struct Selection {
    scheme: Scheme,
    beta: f64,
    gamma0: f64,
    gamma1: f64,
    rmse: f64,
    mae: f64,
    fallback: usize,
    sim_index: usize,
}

fn kind_code(kind: SimilarityKind) -> u8 {
    match kind {
        SimilarityKind::Cosine => 0,
        SimilarityKind::InverseSqDistance => 1,
    }
}

/// Similarity table plus validation correction terms, keyed by
/// (similarity kind, beta bits); shared across schemes of one family.
type SimsEntry = ((u8, u64), SimilarityMatrix, Vec<Option<f64>>);

fn run_trial(prep: &Prepared, grids: &Grids, key: &TrialKey) -> Result<TrialResult> {
    let started = Instant::now();
    let gs = key.structure.build()?;
    let coder = CoderConfig {
        kappa: key.kappa,
        eta: grids.eta,
        inner_iters: grids.inner_iters,
        epsilon: grids.epsilon,
        aux_exponent: None,
        constraint: CodeConstraint::Unconstrained,
    };
    let learner_cfg = LearnerConfig {
        rho: key.rho,
        minibatch: key.batch_size,
        bcd_iters: grids.bcd_iters,
        coder,
        seed: key.seed,
    };

    let trainable: Vec<usize> = (0..prep.n_users)
        .filter(|&u| !prep.user_train[u].is_empty())
        .collect();
    if trainable.is_empty() {
        return Err(Error::EmptyStream);
    }
    let stream = (0..grids.passes).flat_map(|pass| {
        let mut order = trainable.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(subseed(key.seed, 100 + pass as u64));
        order.shuffle(&mut rng);
        order.into_iter().map(|u| {
            let (obs, values): (Vec<usize>, Vec<f64>) =
                prep.user_train[u].iter().copied().unzip();
            Sample::new(obs, Array1::from_vec(values)).expect("per-user lists are sorted")
        })
    });
    let trained = train(prep.n_items, stream, &gs, &learner_cfg)?;
    let dict = &trained.dictionary;

    // Guarded test view created up front: any read before the selection
    // completes trips the assertion below.
    let test_view = CountedCells::new(&prep.test_cells);

    // Code every user that will be scored.
    let mut needed = vec![false; prep.n_users];
    for c in prep.val_cells.iter().chain(prep.test_cells.iter()) {
        needed[c.user as usize] = true;
    }
    let mut user_est: Vec<Option<UserEstimate>> = Vec::with_capacity(prep.n_users);
    for (u, wanted) in needed.iter().enumerate() {
        if !wanted || prep.user_train[u].is_empty() {
            user_est.push(None);
            continue;
        }
        let (obs, values): (Vec<usize>, Vec<f64>) = prep.user_train[u].iter().copied().unzip();
        let x = Array1::from_vec(values);
        let bp = predict_base(dict, &obs, x.view(), &gs, &coder)?;
        let errors = obs
            .iter()
            .enumerate()
            .map(|(k, &j)| bp.estimate[j] - x[k])
            .collect();
        user_est.push(Some(UserEstimate {
            estimate: bp.estimate,
            errors,
        }));
    }

    // Validation selection of (scheme, beta, gammas). Similarity tables and
    // validation correction terms are shared across schemes of one family.
    let mut sims_store: Vec<SimsEntry> = Vec::new();
    let mut best: Option<Selection> = None;
    for &scheme in &grids.schemes {
        let kind = scheme.similarity_kind();
        for &beta in &grids.betas {
            let cache_key = (kind_code(kind), beta.to_bits());
            let idx = match sims_store.iter().position(|(k, _, _)| *k == cache_key) {
                Some(i) => i,
                None => {
                    let sims = SimilarityMatrix::build(dict, kind, beta, grids.sim_clamp);
                    let corr = corr_terms(&prep.val_cells, &user_est, &prep.user_train, &sims);
                    sims_store.push((cache_key, sims, corr));
                    sims_store.len() - 1
                }
            };
            let corr = &sims_store[idx].2;
            let points: Vec<GammaPoint> = prep
                .val_cells
                .iter()
                .zip(corr)
                .filter_map(|(c, ct)| {
                    ct.and_then(|corr_value| {
                        user_est[c.user as usize].as_ref().map(|est| GammaPoint {
                            truth: c.rating,
                            base: est.estimate[c.item as usize],
                            corr: corr_value,
                        })
                    })
                })
                .collect();
            let (gamma0, gamma1) = fit_gammas(&points, scheme);
            let (pairs, fallback) = predict_cells(
                &prep.val_cells,
                corr,
                &user_est,
                scheme,
                gamma0,
                gamma1,
                &prep.means,
                grids.rating_range,
            );
            let v_rmse = rmse(&pairs)?;
            if best.as_ref().is_none_or(|b| v_rmse < b.rmse) {
                best = Some(Selection {
                    scheme,
                    beta,
                    gamma0,
                    gamma1,
                    rmse: v_rmse,
                    mae: mae(&pairs)?,
                    fallback,
                    sim_index: idx,
                });
            }
        }
    }
    let best = best.ok_or(Error::EmptyInput("validation cells"))?;

    // Selection must not have touched the test cells.
    assert_eq!(
        test_view.reads(),
        0,
        "validation selection read test cells"
    );
    let test_cells = test_view.read();
    let sims = &sims_store[best.sim_index].1;
    let test_corr = corr_terms(test_cells, &user_est, &prep.user_train, sims);
    let (pairs, test_fallback) = predict_cells(
        test_cells,
        &test_corr,
        &user_est,
        best.scheme,
        best.gamma0,
        best.gamma1,
        &prep.means,
        grids.rating_range,
    );

    Ok(TrialResult {
        key: *key,
        scheme: best.scheme,
        beta: best.beta,
        gamma0: best.gamma0,
        gamma1: best.gamma1,
        validation_rmse: best.rmse,
        validation_mae: best.mae,
        test_rmse: rmse(&pairs)?,
        test_mae: mae(&pairs)?,
        fallback_cells: best.fallback + test_fallback,
        wall_time_s: started.elapsed().as_secs_f64(),
    })
}

/// Runs every grid point against one shared split. Individual trial failures
/// are recorded, never fatal. Successful trials are ranked by validation
/// RMSE; the top entry's test metrics are the reported performance.
pub fn grid_search(ds: &RatingDataset, grids: &Grids, opts: &GridOptions) -> Result<GridOutcome> {
    grids.validate()?;
    let prep = Prepared::build(ds, &SplitSpec::new(grids.seed));
    let mut keys = grids.keys();
    if let Some(budget) = opts.budget {
        keys.truncate(budget);
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.workers)
        .build()
        .map_err(|e| Error::param(format!("cannot build worker pool: {e}")))?;
    let results: Vec<std::result::Result<TrialResult, TrialFailure>> = pool.install(|| {
        keys.par_iter()
            .map(|key| {
                run_trial(&prep, grids, key).map_err(|e| TrialFailure {
                    key: *key,
                    message: e.to_string(),
                })
            })
            .collect()
    });
    let mut ranked = Vec::new();
    let mut failures = Vec::new();
    for r in results {
        match r {
            Ok(t) => ranked.push(t),
            Err(f) => failures.push(f),
        }
    }
    ranked.sort_by(|a, b| a.validation_rmse.total_cmp(&b.validation_rmse));
    Ok(GridOutcome { ranked, failures })
}

const TRIALS_HEADER: &str = "structure,kappa,rho,batch_size,seed,scheme,beta,gamma0,gamma1,\
validation_rmse,validation_mae,test_rmse,test_mae,fallback_cells,wall_time_s";

/// Writes trials as CSV, one row per trial. Hyperparameters use shortest
/// round-trip formatting; metrics use fixed six decimals.
pub fn write_trials_csv(trials: &[TrialResult], path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "{TRIALS_HEADER}")?;
    for t in trials {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{:.6},{:.6},{:.6},{:.6},{},{:.6}",
            t.key.structure.to_compact(),
            t.key.kappa,
            t.key.rho,
            t.key.batch_size,
            t.key.seed,
            t.scheme,
            t.beta,
            t.gamma0,
            t.gamma1,
            t.validation_rmse,
            t.validation_mae,
            t.test_rmse,
            t.test_mae,
            t.fallback_cells,
            t.wall_time_s,
        )?;
    }
    Ok(())
}

pub fn read_trials_csv(path: &Path) -> Result<Vec<TrialResult>> {
    let display = path.display().to_string();
    let reader = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || line_no == 1 {
            if line_no == 1 && trimmed != TRIALS_HEADER {
                return Err(Error::DataFormat {
                    path: display,
                    line: 1,
                    message: "unexpected trial CSV header".into(),
                });
            }
            continue;
        }
        let fields: Vec<&str> = trimmed.split(',').collect();
        if fields.len() != 15 {
            return Err(Error::DataFormat {
                path: display,
                line: line_no,
                message: format!("expected 15 columns, found {}", fields.len()),
            });
        }
        let err = |msg: String| Error::DataFormat {
            path: display.clone(),
            line: line_no,
            message: msg,
        };
        let parse_f = |s: &str| s.parse::<f64>().map_err(|_| err(format!("bad number {s:?}")));
        out.push(TrialResult {
            key: TrialKey {
                structure: StructureSpec::parse_compact(fields[0])?,
                kappa: parse_f(fields[1])?,
                rho: parse_f(fields[2])?,
                batch_size: fields[3]
                    .parse()
                    .map_err(|_| err(format!("bad batch size {:?}", fields[3])))?,
                seed: fields[4]
                    .parse()
                    .map_err(|_| err(format!("bad seed {:?}", fields[4])))?,
            },
            scheme: Scheme::parse(fields[5])?,
            beta: parse_f(fields[6])?,
            gamma0: parse_f(fields[7])?,
            gamma1: parse_f(fields[8])?,
            validation_rmse: parse_f(fields[9])?,
            validation_mae: parse_f(fields[10])?,
            test_rmse: parse_f(fields[11])?,
            test_mae: parse_f(fields[12])?,
            fallback_cells: fields[13]
                .parse()
                .map_err(|_| err(format!("bad cell count {:?}", fields[13])))?,
            wall_time_s: parse_f(fields[14])?,
        });
    }
    Ok(out)
}

/// One plot-ready surface: the chosen metric per (kappa, rho) for a fixed
/// structure and mini-batch size. Beta, scheme, and correction weights were
/// already optimized away during the trials.
#[derive(Debug, Clone, PartialEq)]
pub struct Surface {
    pub structure: String,
    pub batch_size: usize,
    pub metric: &'static str,
    /// (kappa, rho, value) rows sorted by (kappa, rho).
    pub rows: Vec<(f64, f64, f64)>,
}

const SURFACE_METRICS: [&str; 4] = [
    "validation_rmse",
    "validation_mae",
    "test_rmse",
    "test_mae",
];

/// Long-format surfaces per (structure, batch size, metric), the artifact's
/// stand-in for the published performance figures.
pub fn surfaces(trials: &[TrialResult]) -> Vec<Surface> {
    let mut group_keys: Vec<(String, usize)> = trials
        .iter()
        .map(|t| (t.key.structure.to_compact(), t.key.batch_size))
        .collect();
    group_keys.sort();
    group_keys.dedup();

    let mut out = Vec::new();
    for (structure, batch_size) in group_keys {
        for metric in SURFACE_METRICS {
            let mut rows: Vec<(f64, f64, f64)> = Vec::new();
            for t in trials {
                if t.key.structure.to_compact() != structure || t.key.batch_size != batch_size {
                    continue;
                }
                let value = match metric {
                    "validation_rmse" => t.validation_rmse,
                    "validation_mae" => t.validation_mae,
                    "test_rmse" => t.test_rmse,
                    _ => t.test_mae,
                };
                match rows
                    .iter_mut()
                    .find(|(k, r, _)| *k == t.key.kappa && *r == t.key.rho)
                {
                    Some(row) => row.2 = row.2.min(value),
                    None => rows.push((t.key.kappa, t.key.rho, value)),
                }
            }
            rows.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
            out.push(Surface {
                structure: structure.clone(),
                batch_size,
                metric,
                rows,
            });
        }
    }
    out
}

/// Writes one surface as `kappa,rho,metric` CSV; returns the file name used.
pub fn write_surface_csv(surface: &Surface, dir: &Path) -> Result<String> {
    let name = format!(
        "surface_{}_R{}_{}.csv",
        surface.structure.replace(':', "_"),
        surface.batch_size,
        surface.metric
    );
    let mut w = BufWriter::new(File::create(dir.join(&name))?);
    writeln!(w, "kappa,rho,metric")?;
    for (kappa, rho, value) in &surface.rows {
        writeln!(w, "{kappa},{rho},{value:.6}")?;
    }
    Ok(name)
}

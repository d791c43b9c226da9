//! Acceptance suite: every benchmark-level requirement as one test with a
//! pass/fail line and a runtime budget.
//!
//! Criterion 7 runs against a real ratings file when `OSDL_JESTER_PATH`
//! points at one (dense layout, count column, 99 sentinel); otherwise it
//! falls back to a seeded synthetic dataset of the same shape. Criterion 8
//! is the optional full-scale reproduction and stays `#[ignore]`d: it needs
//! the full dataset and hours of compute.

use std::collections::BTreeSet;
use std::time::Instant;

use ndarray::{Array1, Array2};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use osdl::coder::{optimal_aux, solve_code, structured_norm, CoderConfig};
use osdl::data::{gen_synthetic, load_jester, RatingDataset, SyntheticSpec};
use osdl::dictionary::Dictionary;
use osdl::eval::{
    grid_search, item_mean_baseline, item_means, mae, per_user_ratings, rmse, split, GridOptions,
    Grids, SplitSpec, TrialResult,
};
use osdl::groups::{toroid_groups, tree_groups, GroupStructure, StructureSpec};
use osdl::learner::{reference, train, LearnerConfig, LearnerStats, Sample};
use osdl::recommender::{
    correct, fit_gammas, predict_base, similarity, CorrectionConfig, GammaPoint, Scheme,
    SimilarityKind, SimilarityMatrix,
};
use osdl::seeding::subseed;

struct Budget {
    name: &'static str,
    started: Instant,
    limit_s: f64,
}

impl Budget {
    fn start(name: &'static str, limit_s: f64) -> Budget {
        Budget {
            name,
            started: Instant::now(),
            limit_s,
        }
    }

    fn finish(self, detail: &str) {
        let elapsed = self.started.elapsed().as_secs_f64();
        println!(
            "[{}] PASS ({detail}; {elapsed:.2}s of {:.0}s budget)",
            self.name, self.limit_s
        );
        assert!(
            elapsed < self.limit_s,
            "[{}] exceeded its runtime budget: {elapsed:.2}s >= {:.0}s",
            self.name,
            self.limit_s
        );
    }
}

/// Random covering structure with strictly positive weights on the members.
fn random_structure(rng: &mut ChaCha8Rng, code_dim: usize) -> GroupStructure {
    let n_groups = rng.random_range(1..=code_dim + 2);
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for _ in 0..n_groups {
        let size = rng.random_range(1..=code_dim);
        let mut members: Vec<usize> = (0..code_dim).collect();
        members.shuffle(rng);
        members.truncate(size);
        members.sort_unstable();
        groups.push(members);
    }
    let covered: BTreeSet<usize> = groups.iter().flatten().copied().collect();
    for j in 0..code_dim {
        if !covered.contains(&j) {
            groups.push(vec![j]);
        }
    }
    let weights = groups
        .iter()
        .map(|members| {
            let mut w = Array1::zeros(code_dim);
            for &j in members {
                w[j] = rng.random_range(0.2..2.0);
            }
            w
        })
        .collect();
    GroupStructure::from_parts(code_dim, groups, weights).unwrap()
}

/// Criterion 1: the closed-form auxiliary vector reproduces the structured
/// norm through the variational identity, to 1e-8 relative error, across
/// 200 random (code, structure, eta) triples.
#[test]
fn criterion_1_variational_identity() {
    let budget = Budget::start("criterion 1: variational identity", 5.0);
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    for trial in 0..200 {
        let eta = [0.5, 1.0, 1.5][trial % 3];
        let dim: usize = rng.random_range(2..10);
        let gs = match trial % 4 {
            0 => toroid_groups(rng.random_range(3..6), 1).unwrap(),
            1 => tree_groups(rng.random_range(2..5)).unwrap(),
            _ => random_structure(&mut rng, dim),
        };
        let code = Array1::from_shape_fn(gs.code_dim(), |_| {
            let v: f64 = rng.random_range(0.2..2.0);
            if rng.random_bool(0.5) {
                v
            } else {
                -v
            }
        });
        let aux = optimal_aux(code.view(), &gs, eta);
        // quadratic term: sum over groups of squared weighted norm / aux
        let mut quad = 0.0;
        for (g, members) in gs.groups().iter().enumerate() {
            let w = gs.weight(g);
            let n2: f64 = members.iter().map(|&j| (w[j] * code[j]).powi(2)).sum();
            quad += n2 / aux[g];
        }
        let beta = eta / (2.0 - eta);
        let aux_norm = aux
            .iter()
            .map(|z| z.powf(beta))
            .sum::<f64>()
            .powf(1.0 / beta);
        let lhs = 0.5 * (quad + aux_norm);
        let omega = structured_norm(code.view(), &gs, eta);
        let rel = (lhs - omega).abs() / omega.max(1e-300);
        assert!(
            rel <= 1e-8,
            "trial {trial} (eta {eta}): relative error {rel:.3e}"
        );
    }
    budget.finish("200 triples at 1e-8 relative error");
}

/// Criterion 2: the coder reproduces the one-dimensional soft-threshold
/// closed form within 1e-3 on 50 random (x, kappa) pairs.
#[test]
fn criterion_2_lasso_oracle() {
    let budget = Budget::start("criterion 2: lasso oracle", 1.0);
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let gs = GroupStructure::with_indicator_weights(1, vec![vec![0]]).unwrap();
    let d = Array2::from_elem((1, 1), 1.0);
    for trial in 0..50 {
        let kappa: f64 = rng.random_range(0.05..2.0);
        // The reweighting contracts at rate kappa/|x| (or its inverse), so
        // ratios are sampled away from the |x| = kappa boundary where any
        // finite iteration count stalls.
        let ratio = if trial % 2 == 0 {
            rng.random_range(1.3..5.0)
        } else {
            rng.random_range(0.15..0.8)
        };
        let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        let x_val = sign * ratio * kappa;
        let expected = x_val.signum() * (x_val.abs() - kappa).max(0.0);
        let cfg = CoderConfig::new(kappa).with_eta(1.0).with_inner_iters(120);
        let x = Array1::from_elem(1, x_val);
        let out = solve_code(x.view(), d.view(), &gs, &cfg).unwrap();
        assert!(
            (out.code[0] - expected).abs() <= 1e-3,
            "trial {trial}: x={x_val}, kappa={kappa}, got {}, want {expected}",
            out.code[0]
        );
    }
    budget.finish("50 soft-threshold instances at 1e-3");
}

/// Brute-force batch statistics, written independently of both the online
/// recursion and the library's reference module.
fn oracle_batch_stats(
    records: &[(u64, Vec<usize>, Array1<f64>, Array1<f64>)],
    dict: &Dictionary,
    rho: f64,
    t: u64,
) -> (Array2<f64>, Array2<f64>, Array2<f64>) {
    let (dx, da) = (dict.obs_dim(), dict.code_dim());
    let (mut c, mut b, mut e) = (
        Array2::zeros((dx, da)),
        Array2::zeros((dx, da)),
        Array2::zeros((dx, da)),
    );
    for (step, obs, x, code) in records {
        let w = (*step as f64 / t as f64).powf(rho);
        let recon = dict.matrix().dot(code);
        for (k, &o) in obs.iter().enumerate() {
            for j in 0..da {
                c[[o, j]] += w * code[j] * code[j];
                b[[o, j]] += w * x[k] * code[j];
                e[[o, j]] += w * recon[o] * code[j];
            }
        }
    }
    (c, b, e)
}

fn rel_frobenius(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    let num = (a - b).iter().map(|v| v * v).sum::<f64>().sqrt();
    let den = b.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-30);
    num / den
}

/// Criterion 3: the online statistics recursions equal brute-force batch
/// sums to 1e-10 relative error on 100 random streams; with the dictionary
/// frozen the approximate cross-product statistic matches its batch sum too.
#[test]
fn criterion_3_statistics_oracle() {
    let budget = Budget::start("criterion 3: statistics oracle", 5.0);
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    for stream_idx in 0..100 {
        let rho = [0.0, 0.5, 1.0][stream_idx % 3];
        let dx = rng.random_range(2..8);
        let da = rng.random_range(1..6);
        let t = rng.random_range(1..=50);
        let dict = Dictionary::init(dx, da, 1000 + stream_idx as u64);
        let mut online = LearnerStats::new(dx, da, rho);
        let mut records = Vec::new();
        for step in 1..=t {
            let obs: Vec<usize> = loop {
                let picked: Vec<usize> = (0..dx).filter(|_| rng.random_bool(0.6)).collect();
                if !picked.is_empty() {
                    break picked;
                }
            };
            let x = Array1::from_shape_fn(obs.len(), |_| rng.random_range(-2.0..2.0));
            let code = Array1::from_shape_fn(da, |_| rng.random_range(-1.5..1.5));
            let sample = Sample::new(obs.clone(), x.clone()).unwrap();
            online.update(&sample, code.view(), &dict).unwrap();
            records.push((step, obs, x, code));
        }
        let (c, b, e) = oracle_batch_stats(&records, &dict, rho, t);
        let online_c = Array2::from_shape_fn((dx, da), |(i, j)| online.c_col(j)[i]);
        let online_b = Array2::from_shape_fn((dx, da), |(i, j)| online.b_col(j)[i]);
        let online_e = Array2::from_shape_fn((dx, da), |(i, j)| online.e_col(j)[i]);
        for (name, got, want) in [("C", online_c, c), ("B", online_b, b), ("e", online_e, e)] {
            let rel = rel_frobenius(&got, &want);
            assert!(
                rel <= 1e-10,
                "stream {stream_idx}: {name} relative error {rel:.3e}"
            );
        }
    }
    budget.finish("100 streams, C/B/e at 1e-10 relative error");
}

/// Weighted empirical reconstruction cost, written independently for the
/// finite-difference checks.
fn oracle_cost(
    records: &[reference::CodedSample],
    dict: &Dictionary,
    rho: f64,
    t: u64,
) -> f64 {
    let mut total = 0.0;
    for r in records {
        let w = (r.step as f64 / t as f64).powf(rho);
        let d_obs = dict.restrict_rows(&r.obs);
        let resid = &r.values - &d_obs.dot(&r.code);
        total += w * 0.5 * resid.iter().map(|v| v * v).sum::<f64>();
    }
    total
}

/// Criterion 4: with exact statistics, every pre-projection column solve is
/// a stationary point of the empirical cost (finite differences, step 1e-5,
/// gradient norm at most 1e-4) on 20 random small problems.
#[test]
fn criterion_4_bcd_stationarity() {
    let budget = Budget::start("criterion 4: bcd stationarity", 10.0);
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let h = 1e-5;
    for problem in 0..20 {
        let rho = [0.0, 0.5, 1.0][problem % 3];
        let dx = rng.random_range(2..=10);
        let da = rng.random_range(1..=8);
        let dict = Dictionary::init(dx, da, 2000 + problem as u64);
        let t = rng.random_range(3..=10);
        let records: Vec<reference::CodedSample> = (1..=t)
            .map(|step| {
                let obs: Vec<usize> = loop {
                    let picked: Vec<usize> = (0..dx).filter(|_| rng.random_bool(0.7)).collect();
                    if !picked.is_empty() {
                        break picked;
                    }
                };
                reference::CodedSample {
                    step,
                    values: Array1::from_shape_fn(obs.len(), |_| rng.random_range(-2.0..2.0)),
                    code: Array1::from_shape_fn(da, |_| rng.random_range(-1.5..1.5)),
                    obs,
                }
            })
            .collect();
        for j in 0..da {
            let u = reference::exact_column_solve(&records, &dict, rho, j);
            let mut grad2 = 0.0;
            for i in 0..dx {
                let eval = |delta: f64| {
                    let mut d = dict.clone();
                    let mut col = u.clone();
                    col[i] += delta;
                    d.set_column(j, col.view());
                    oracle_cost(&records, &d, rho, t)
                };
                let g = (eval(h) - eval(-h)) / (2.0 * h);
                grad2 += g * g;
            }
            let norm = grad2.sqrt();
            assert!(
                norm <= 1e-4,
                "problem {problem}, column {j}: gradient norm {norm:.3e}"
            );
        }
    }
    budget.finish("20 problems, all columns stationary at 1e-4");
}

/// Criterion 5: on the synthetic tree-structured instance, reconstructing
/// the hidden cells beats the item-mean baseline by more than a factor of
/// two, for three seeds.
#[test]
fn criterion_5_synthetic_recovery() {
    let budget = Budget::start("criterion 5: synthetic recovery", 120.0);
    let mut details = Vec::new();
    for seed in [1u64, 2, 3] {
        let spec = SyntheticSpec {
            n_users: 500,
            obs_dim: 20,
            structure: StructureSpec::Tree { levels: 4 },
            sparsity: 4,
            noise_sigma: 0.1,
            missing_fraction: 0.3,
            seed,
        };
        let synth = gen_synthetic(&spec).unwrap();
        let ds = &synth.dataset;
        let user_obs = per_user_ratings(ds.cells(), ds.n_users());
        let means = item_means(ds.cells(), ds.n_items());
        let gs = spec.structure.build().unwrap();
        let coder = CoderConfig::new(1.0 / 128.0).with_inner_iters(8);
        let cfg = LearnerConfig {
            minibatch: 4,
            seed: subseed(seed, 51),
            ..LearnerConfig::new(coder)
        };
        let trainable: Vec<usize> = (0..ds.n_users())
            .filter(|&u| !user_obs[u].is_empty())
            .collect();
        let passes = 10;
        let stream = (0..passes).flat_map(|pass| {
            let mut order = trainable.clone();
            order.shuffle(&mut ChaCha8Rng::seed_from_u64(subseed(seed, 100 + pass)));
            order.into_iter().map(|u| {
                let (obs, values): (Vec<usize>, Vec<f64>) = user_obs[u].iter().copied().unzip();
                Sample::new(obs, Array1::from_vec(values)).unwrap()
            })
        });
        let out = train(ds.n_items(), stream, &gs, &cfg).unwrap();

        // Score the hidden cells against the clean generative signal; the
        // generator hands back the ground truth for exactly this purpose.
        let mut model_pairs = Vec::new();
        let mut baseline_pairs = Vec::new();
        for u in 0..ds.n_users() {
            if user_obs[u].is_empty() {
                continue;
            }
            let observed: BTreeSet<usize> = user_obs[u].iter().map(|&(i, _)| i).collect();
            let (obs, values): (Vec<usize>, Vec<f64>) = user_obs[u].iter().copied().unzip();
            let bp = predict_base(
                &out.dictionary,
                &obs,
                Array1::from_vec(values).view(),
                &gs,
                &cfg.coder,
            )
            .unwrap();
            let clean = synth.dictionary.matrix().dot(&synth.codes.row(u).to_owned());
            for item in 0..ds.n_items() {
                if observed.contains(&item) {
                    continue;
                }
                model_pairs.push((clean[item], bp.estimate[item].clamp(-10.0, 10.0)));
                baseline_pairs.push((clean[item], means.get(item)));
            }
        }
        let model = rmse(&model_pairs).unwrap();
        let baseline = rmse(&baseline_pairs).unwrap();
        let ratio = model / baseline;
        assert!(
            ratio < 0.5,
            "seed {seed}: model {model:.4} vs baseline {baseline:.4} (ratio {ratio:.3})"
        );
        details.push(format!("seed {seed}: ratio {ratio:.3}"));
    }
    budget.finish(&details.join(", "));
}

/// Criterion 6: the stated metric and correction examples hold exactly, and
/// RMSE dominates MAE on 1000 random pair lists.
#[test]
fn criterion_6_metric_and_correction_suites() {
    let budget = Budget::start("criterion 6: metric and correction suites", 30.0);

    // Metric examples.
    assert_eq!(rmse(&[(2.0, 2.0), (-1.0, -1.0)]).unwrap(), 0.0);
    assert_eq!(mae(&[(2.0, 2.0), (-1.0, -1.0)]).unwrap(), 0.0);
    assert_eq!(rmse(&[(1.0, 3.0)]).unwrap(), 2.0);
    assert_eq!(mae(&[(1.0, 3.0)]).unwrap(), 2.0);
    assert_eq!(rmse(&[(0.0, 1.0), (0.0, 7.0)]).unwrap(), 5.0);
    assert_eq!(mae(&[(0.0, 1.0), (0.0, 7.0)]).unwrap(), 4.0);
    assert!(rmse(&[]).is_err());

    // RMSE >= MAE on 1000 random lists.
    let mut rng = ChaCha8Rng::seed_from_u64(606);
    for _ in 0..1000 {
        let n = rng.random_range(1..50);
        let pairs: Vec<(f64, f64)> = (0..n)
            .map(|_| (rng.random_range(-10.0..10.0), rng.random_range(-10.0..10.0)))
            .collect();
        let r = rmse(&pairs).unwrap();
        let m = mae(&pairs).unwrap();
        assert!(r >= m - 1e-12, "rmse {r} < mae {m}");
    }

    // Similarity examples.
    let a = Array1::from_vec(vec![0.4, -0.3, 0.2]);
    for beta in [0.2, 1.0, 8.0] {
        let s = similarity(a.view(), a.view(), SimilarityKind::Cosine, beta, 1e12);
        assert!((s - 1.0).abs() < 1e-12);
    }
    let e1 = Array1::from_vec(vec![1.0, 0.0]);
    let e2 = Array1::from_vec(vec![0.0, 1.0]);
    assert_eq!(
        similarity(e1.view(), e2.view(), SimilarityKind::Cosine, 2.0, 1e12),
        0.0
    );
    assert_eq!(
        similarity(a.view(), a.view(), SimilarityKind::InverseSqDistance, 1.8, 1e12),
        1e12
    );

    // Correction examples against a dictionary-derived similarity table.
    let dict = Dictionary::init(6, 4, 99);
    let gs = GroupStructure::with_indicator_weights(4, (0..4).map(|j| vec![j]).collect()).unwrap();
    let obs = vec![1, 3, 5];
    let x_obs = Array1::from_vec(vec![0.5, -0.2, 0.7]);
    let base = predict_base(&dict, &obs, x_obs.view(), &gs, &CoderConfig::new(0.5)).unwrap();
    let sims = SimilarityMatrix::build(&dict, SimilarityKind::Cosine, 2.0, 1e12);
    let plain = CorrectionConfig {
        scheme: Scheme::S1,
        beta: 2.0,
        gamma0: 1.0,
        gamma1: 0.0,
        ..CorrectionConfig::default()
    };
    for item in [0usize, 2, 4] {
        let c = correct(item, &obs, x_obs.view(), base.estimate.view(), &sims, &plain);
        assert_eq!(c.unclamped, base.estimate[item]);
    }

    // Constant neighbor errors shift the estimate by gamma1 times the error.
    let err = -0.45;
    let estimate = Array1::from_vec(vec![2.0, 0.1, -0.6, 1.4]);
    let x_shifted = Array1::from_vec(vec![0.1 - err, -0.6 - err, 1.4 - err]);
    let weighted = CorrectionConfig {
        scheme: Scheme::S1,
        beta: 1.0,
        gamma0: 1.0,
        gamma1: 0.8,
        ..CorrectionConfig::default()
    };
    let fake_dict = Dictionary::init(4, 3, 7);
    let any_sims = SimilarityMatrix::build(&fake_dict, SimilarityKind::InverseSqDistance, 1.0, 1e12);
    let c = correct(0, &[1, 2, 3], x_shifted.view(), estimate.view(), &any_sims, &weighted);
    assert!((c.unclamped - (2.0 + 0.8 * err)).abs() < 1e-12);

    // Gamma fitting examples.
    let mut rng2 = ChaCha8Rng::seed_from_u64(607);
    let pts: Vec<GammaPoint> = (0..50)
        .map(|_| {
            let b = rng2.random_range(-5.0..5.0);
            GammaPoint {
                truth: b,
                base: b,
                corr: rng2.random_range(-1.0..1.0),
            }
        })
        .collect();
    let (g0, g1) = fit_gammas(&pts, Scheme::S2);
    assert_eq!(g0, 1.0);
    assert!(g1.abs() < 1e-12);
    let pts: Vec<GammaPoint> = (0..80)
        .map(|i| {
            let b = rng2.random_range(-5.0..5.0);
            let c = rng2.random_range(-2.0..2.0) + (i as f64).sin();
            GammaPoint {
                truth: 0.9 * b + 0.2 * c,
                base: b,
                corr: c,
            }
        })
        .collect();
    let (g0, g1) = fit_gammas(&pts, Scheme::S1Zero);
    assert!((g0 - 0.9).abs() < 1e-10 && (g1 - 0.2).abs() < 1e-10);

    budget.finish("examples exact, 1000 pair lists ordered");
}

fn desk_scale_dataset() -> (RatingDataset, &'static str) {
    if let Ok(path) = std::env::var("OSDL_JESTER_PATH") {
        let load = load_jester(std::path::Path::new(&path)).expect("ratings file must parse");
        for w in load.warnings.iter().take(5) {
            eprintln!("warning: {w}");
        }
        let n = load.dataset.n_users().min(5000);
        let ds = load.dataset.subsample_users(n, 4242).unwrap();
        (ds, "ratings file")
    } else {
        // Same shape as the desk-scale benchmark: 5000 users, 100 items,
        // smooth toroidal ground truth, realistic density.
        let spec = SyntheticSpec {
            n_users: 5000,
            obs_dim: 100,
            structure: StructureSpec::Toroid { d: 10, radius: 1 },
            sparsity: 9,
            noise_sigma: 0.1,
            missing_fraction: 0.44,
            seed: 777,
        };
        (gen_synthetic(&spec).unwrap().dataset, "synthetic fallback")
    }
}

fn best_for(structure: StructureSpec, ranked: &[TrialResult]) -> &TrialResult {
    ranked
        .iter()
        .find(|t| t.key.structure == structure)
        .expect("structure must have a completed trial")
}

/// Criterion 7: on the desk-scale benchmark, the best structured (r = 4)
/// configuration beats the item-mean baseline on test RMSE and is not worse
/// than the best unstructured (r = 0) configuration by more than 0.01.
#[test]
fn criterion_7_desk_scale_benchmark() {
    let budget = Budget::start("criterion 7: desk-scale benchmark", 1800.0);
    let (ds, source) = desk_scale_dataset();
    let r0 = StructureSpec::Toroid { d: 10, radius: 0 };
    let r4 = StructureSpec::Toroid { d: 10, radius: 4 };
    let grids = Grids {
        structures: vec![r0, r4],
        kappas: vec![0.25, 1.0 / 64.0, 1.0 / 1024.0, 1.0 / 16384.0],
        rhos: vec![0.0, 0.5],
        batch_sizes: vec![8],
        betas: vec![1.0, 1.8, 2.6, 3.4],
        schemes: Scheme::ALL.to_vec(),
        seed: 42,
        passes: 4,
        ..Grids::paper(vec![], 42)
    };
    let out = grid_search(&ds, &grids, &GridOptions::default()).unwrap();
    assert!(
        out.failures.is_empty(),
        "trials failed: {:?}",
        out.failures
            .iter()
            .map(|f| f.message.clone())
            .collect::<Vec<_>>()
    );

    let sets = split(&ds, &SplitSpec::new(grids.seed));
    let means = item_means(&sets.train, ds.n_items());
    let (baseline_rmse, _) = item_mean_baseline(&means, &sets.test).unwrap();

    let best_r0 = best_for(r0, &out.ranked);
    let best_r4 = best_for(r4, &out.ranked);
    println!(
        "[criterion 7] source: {source}; baseline rmse {baseline_rmse:.4}; \
         best r=0 test rmse {:.4}; best r=4 test rmse {:.4}",
        best_r0.test_rmse, best_r4.test_rmse
    );
    assert!(
        best_r4.test_rmse < baseline_rmse,
        "structured model ({:.4}) must beat the item-mean baseline ({baseline_rmse:.4})",
        best_r4.test_rmse
    );
    assert!(
        best_r4.test_rmse <= best_r0.test_rmse + 0.01,
        "structured ({:.4}) fell behind unstructured ({:.4}) by more than 0.01",
        best_r4.test_rmse,
        best_r0.test_rmse
    );
    budget.finish(&format!(
        "{source}: r4 {:.4} vs r0 {:.4}, baseline {baseline_rmse:.4}",
        best_r4.test_rmse, best_r0.test_rmse
    ));
}

/// Criterion 8 (optional, not gating): full-scale reproduction against the
/// published numbers. Needs `OSDL_JESTER_PATH` pointing at the full dataset
/// and several hours of compute:
/// `cargo test -p osdl --test acceptance -- --ignored criterion_8`.
#[test]
#[ignore = "full-scale run: needs the full ratings file and hours of compute"]
fn criterion_8_full_scale_reproduction() {
    let path = std::env::var("OSDL_JESTER_PATH")
        .expect("set OSDL_JESTER_PATH to the full dense ratings file");
    let load = load_jester(std::path::Path::new(&path)).unwrap();
    let ds = load.dataset;
    let r0 = StructureSpec::Toroid { d: 10, radius: 0 };
    let r4 = StructureSpec::Toroid { d: 10, radius: 4 };
    let grids = Grids {
        structures: vec![r0, r4],
        kappas: vec![1.0 / 256.0, 1.0 / 1024.0, 1.0 / 4096.0],
        rhos: vec![0.0, 1.0 / 32.0],
        batch_sizes: vec![8],
        seed: 42,
        ..Grids::paper(vec![], 42)
    };
    let out = grid_search(&ds, &grids, &GridOptions::default()).unwrap();
    let best_r0 = best_for(r0, &out.ranked);
    let best_r4 = best_for(r4, &out.ranked);
    println!(
        "[criterion 8] best r=4: test rmse {:.4} mae {:.4}; best r=0: test rmse {:.4}",
        best_r4.test_rmse, best_r4.test_mae, best_r0.test_rmse
    );
    assert!(
        best_r4.test_rmse < best_r0.test_rmse,
        "structured must order below unstructured"
    );
    assert!(best_r4.test_rmse <= 4.13, "test RMSE {:.4}", best_r4.test_rmse);
    assert!(best_r4.test_mae <= 3.20, "test MAE {:.4}", best_r4.test_mae);
    assert!(
        (best_r4.test_rmse - 4.0774).abs() <= 0.05,
        "test RMSE {:.4} outside the published band",
        best_r4.test_rmse
    );
}

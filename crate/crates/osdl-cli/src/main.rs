//! Command-line surface for training, prediction, evaluation, and the
//! grid-search benchmark. Every run writes a manifest with the resolved
//! configuration, seeds, and the dataset hash so it can be reproduced
//! bit for bit.

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use ndarray::Array1;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use osdl::coder::CoderConfig;
use osdl::config::RunConfig;
use osdl::data::{gen_synthetic, load_jester, write_jester, RatingDataset, SyntheticSpec};
use osdl::dictionary::Dictionary;
use osdl::eval::{
    grid_search, mae, per_user_ratings, read_trials_csv, rmse, split, surfaces,
    write_surface_csv, write_trials_csv, GridOptions,
};
use osdl::groups::StructureSpec;
use osdl::learner::{train, Sample};
use osdl::recommender::{CorrectionConfig, Predictor};
use osdl::seeding::subseed;

#[derive(Parser)]
#[command(name = "osdl", version, about = "Online group-structured dictionary learning")]
struct Cli {
    /// Path to the JSON run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed override: re-seeds the split, the learner, and the sweep.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for the sweep; 0 means one per core.
    #[arg(long, global = true, default_value_t = 0)]
    workers: usize,
    /// Print the group structure from the configuration and exit.
    #[arg(long, global = true)]
    dump_groups: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a dictionary on the configured dataset's observation split.
    Train,
    /// Predict unobserved items for every user of a ratings file.
    Predict(PredictArgs),
    /// Score a predictions CSV against a ratings file.
    Evaluate(EvaluateArgs),
    /// Run the configured hyperparameter sweep.
    Grid {
        /// Cap on the number of trials, in configuration order.
        #[arg(long)]
        budget: Option<usize>,
    },
    /// Turn a trial CSV into plot-ready per-(kappa, rho) surfaces.
    Report(ReportArgs),
    /// Generate a synthetic dataset with known ground truth.
    Gen(GenArgs),
}

#[derive(Args)]
struct PredictArgs {
    /// Trained dictionary file (its JSON sidecar supplies the structure and
    /// coder settings unless a config is given).
    #[arg(long)]
    dictionary: PathBuf,
    /// Ratings file in the dense layout.
    #[arg(long)]
    ratings: PathBuf,
    /// Output CSV; defaults to `<output_dir>/predictions.csv`.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Predictions CSV produced by `predict`.
    #[arg(long)]
    predictions: PathBuf,
    /// Ratings file holding the true values.
    #[arg(long)]
    truth: PathBuf,
}

#[derive(Args)]
struct ReportArgs {
    /// Trial CSV produced by `grid`.
    #[arg(long)]
    trials: PathBuf,
    /// Directory for the surface CSVs; defaults to the trial file's parent.
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Args)]
struct GenArgs {
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long, default_value_t = 500)]
    users: usize,
    #[arg(long, default_value_t = 20)]
    items: usize,
    /// Structure in compact form: `toroid:<d>:<r>` or `tree:<levels>`.
    #[arg(long, default_value = "tree:4")]
    structure: String,
    /// Support-size cap for the group-aligned codes.
    #[arg(long, default_value_t = 4)]
    sparsity: usize,
    #[arg(long, default_value_t = 0.1)]
    noise: f64,
    #[arg(long, default_value_t = 0.3)]
    missing: f64,
}

/// Provenance sidecar written next to a trained dictionary.
#[derive(Serialize, Deserialize)]
struct DictionarySidecar {
    structure: StructureSpec,
    coder: CoderConfig,
    correction: CorrectionConfig,
    split_seed: u64,
    learner_seed: u64,
    dataset_sha256: String,
    samples: usize,
    skipped_empty: usize,
    steps: u64,
    crate_version: String,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let config = match &cli.config {
        Some(path) => {
            let mut cfg = RunConfig::load(path)
                .with_context(|| format!("cannot load config {}", path.display()))?;
            if let Some(seed) = cli.seed {
                cfg.split.seed = seed;
                cfg.learner.seed = subseed(seed, 1);
                if let Some(grids) = cfg.grids.as_mut() {
                    grids.seed = seed;
                }
            }
            cfg.validate()?;
            Some(cfg)
        }
        None => None,
    };

    if cli.dump_groups {
        let cfg = config
            .as_ref()
            .ok_or_else(|| anyhow!("--dump-groups needs --config to define the structure"))?;
        print!("{}", cfg.structure.build()?.to_text());
        return Ok(());
    }

    match &cli.command {
        Command::Train => cmd_train(config.as_ref().ok_or_else(required_config)?),
        Command::Predict(args) => cmd_predict(config.as_ref(), args),
        Command::Evaluate(args) => cmd_evaluate(args),
        Command::Grid { budget } => cmd_grid(
            config.as_ref().ok_or_else(required_config)?,
            *budget,
            cli.workers,
        ),
        Command::Report(args) => cmd_report(args),
        Command::Gen(args) => cmd_gen(args, cli.seed.unwrap_or(0)),
    }
}

fn required_config() -> anyhow::Error {
    anyhow!("this command needs --config")
}

fn sha256_file(path: &Path) -> Result<String> {
    let bytes =
        fs::read(path).with_context(|| format!("cannot read dataset {}", path.display()))?;
    let mut hasher = Sha256::new();
    hasher.update(&bytes);
    let digest = hasher.finalize();
    Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
}

fn write_manifest(dir: &Path, body: serde_json::Value) -> Result<()> {
    fs::create_dir_all(dir)?;
    let path = dir.join("manifest.json");
    fs::write(&path, serde_json::to_string_pretty(&body)? + "\n")?;
    Ok(())
}

fn load_dataset(path: &Path) -> Result<RatingDataset> {
    let load =
        load_jester(path).with_context(|| format!("cannot load ratings {}", path.display()))?;
    for warning in &load.warnings {
        eprintln!("warning: {warning}");
    }
    Ok(load.dataset)
}

/// Training samples: one pass per `passes`, users reshuffled each pass.
fn training_stream(
    user_train: &[Vec<(usize, f64)>],
    passes: usize,
    seed: u64,
) -> impl Iterator<Item = Sample> + '_ {
    use rand::seq::SliceRandom;
    use rand::SeedableRng;
    let trainable: Vec<usize> = (0..user_train.len())
        .filter(|&u| !user_train[u].is_empty())
        .collect();
    (0..passes).flat_map(move |pass| {
        let mut order = trainable.clone();
        let mut rng =
            rand_chacha::ChaCha8Rng::seed_from_u64(subseed(seed, 1000 + pass as u64));
        order.shuffle(&mut rng);
        order.into_iter().map(move |u| {
            let (obs, values): (Vec<usize>, Vec<f64>) = user_train[u].iter().copied().unzip();
            Sample::new(obs, Array1::from_vec(values)).expect("per-user lists are sorted")
        })
    })
}

fn cmd_train(cfg: &RunConfig) -> Result<()> {
    let ds = load_dataset(&cfg.dataset)?;
    let dataset_sha256 = sha256_file(&cfg.dataset)?;
    let sets = split(&ds, &cfg.split);
    let user_train = per_user_ratings(&sets.train, ds.n_users());
    let gs = cfg.structure.build()?;
    let stream = training_stream(&user_train, cfg.passes, cfg.learner.seed);
    let outcome = train(ds.n_items(), stream, &gs, &cfg.learner)?;

    fs::create_dir_all(&cfg.output_dir)?;
    let dict_path = cfg.output_dir.join("dictionary.osdl");
    let sidecar = DictionarySidecar {
        structure: cfg.structure,
        coder: *cfg.prediction_coder(),
        correction: cfg.correction,
        split_seed: cfg.split.seed,
        learner_seed: cfg.learner.seed,
        dataset_sha256: dataset_sha256.clone(),
        samples: outcome.samples,
        skipped_empty: outcome.skipped_empty,
        steps: outcome.stats.t(),
        crate_version: env!("CARGO_PKG_VERSION").to_string(),
    };
    outcome.dictionary.write_with_sidecar(&dict_path, &sidecar)?;
    write_manifest(
        &cfg.output_dir,
        serde_json::json!({
            "command": "train",
            "config": cfg,
            "dataset_sha256": dataset_sha256,
            "crate_version": env!("CARGO_PKG_VERSION"),
        }),
    )?;
    println!(
        "trained {}x{} dictionary over {} steps ({} samples, {} skipped) -> {}",
        outcome.dictionary.obs_dim(),
        outcome.dictionary.code_dim(),
        outcome.stats.t(),
        outcome.samples,
        outcome.skipped_empty,
        dict_path.display()
    );
    Ok(())
}

fn cmd_predict(config: Option<&RunConfig>, args: &PredictArgs) -> Result<()> {
    let dict = Dictionary::read(&args.dictionary)
        .with_context(|| format!("cannot read dictionary {}", args.dictionary.display()))?;
    let (structure, coder, correction) = match config {
        Some(cfg) => (cfg.structure, *cfg.prediction_coder(), cfg.correction),
        None => {
            let mut name = args
                .dictionary
                .file_name()
                .unwrap_or_default()
                .to_os_string();
            name.push(".json");
            let sidecar_path = args.dictionary.with_file_name(name);
            let text = fs::read_to_string(&sidecar_path).with_context(|| {
                format!(
                    "no --config given and no sidecar at {}",
                    sidecar_path.display()
                )
            })?;
            let sidecar: DictionarySidecar = serde_json::from_str(&text)?;
            (sidecar.structure, sidecar.coder, sidecar.correction)
        }
    };
    let gs = structure.build()?;
    let ds = load_dataset(&args.ratings)?;
    if ds.n_items() != dict.obs_dim() {
        bail!(
            "ratings file has {} items but the dictionary expects {}",
            ds.n_items(),
            dict.obs_dim()
        );
    }

    let out_dir = config
        .map(|c| c.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("out"));
    let out_path = args
        .out
        .clone()
        .unwrap_or_else(|| out_dir.join("predictions.csv"));
    if let Some(parent) = out_path.parent() {
        fs::create_dir_all(parent)?;
    }

    let predictor = Predictor::new(&dict, &gs, coder, correction)?;
    let user_obs = per_user_ratings(ds.cells(), ds.n_users());
    let mut writer = BufWriter::new(fs::File::create(&out_path)?);
    writeln!(writer, "user,item,estimate,corrected_estimate")?;
    let mut skipped_users = 0usize;
    let mut fallback_cells = 0usize;
    let mut rows = 0usize;
    for (u, ratings) in user_obs.iter().enumerate() {
        if ratings.is_empty() {
            skipped_users += 1;
            continue;
        }
        let (obs, values): (Vec<usize>, Vec<f64>) = ratings.iter().copied().unzip();
        let prediction = predictor.predict_user(u, &obs, Array1::from_vec(values).view())?;
        for (k, &item) in prediction.items.iter().enumerate() {
            writeln!(
                writer,
                "{},{},{:.6},{:.6}",
                u + 1,
                item + 1,
                prediction.base[k],
                prediction.corrected[k]
            )?;
            rows += 1;
            if prediction.fallback[k] {
                fallback_cells += 1;
            }
        }
    }
    writer.flush()?;
    if skipped_users > 0 {
        eprintln!("warning: skipped {skipped_users} user(s) with no rated items");
    }
    if fallback_cells > 0 {
        eprintln!("note: {fallback_cells} cell(s) used the uncorrected fallback");
    }
    write_manifest(
        out_path.parent().unwrap_or(Path::new(".")),
        serde_json::json!({
            "command": "predict",
            "dictionary": args.dictionary.display().to_string(),
            "ratings_sha256": sha256_file(&args.ratings)?,
            "structure": structure,
            "coder": coder,
            "correction": correction,
            "rows": rows,
            "skipped_users": skipped_users,
            "fallback_cells": fallback_cells,
            "crate_version": env!("CARGO_PKG_VERSION"),
        }),
    )?;
    println!("wrote {rows} predictions -> {}", out_path.display());
    Ok(())
}

fn cmd_evaluate(args: &EvaluateArgs) -> Result<()> {
    let truth = load_dataset(&args.truth)?;
    let mut lookup = std::collections::HashMap::new();
    for c in truth.cells() {
        lookup.insert((c.user as usize, c.item as usize), c.rating);
    }

    let reader = BufReader::new(
        fs::File::open(&args.predictions)
            .with_context(|| format!("cannot open {}", args.predictions.display()))?,
    );
    let mut base_pairs = Vec::new();
    let mut corrected_pairs = Vec::new();
    let mut unmatched = 0usize;
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || idx == 0 {
            continue;
        }
        let fields: Vec<&str> = trimmed.split(',').collect();
        if fields.len() != 4 {
            bail!(
                "{}:{}: expected 4 columns, found {}",
                args.predictions.display(),
                idx + 1,
                fields.len()
            );
        }
        let user: usize = fields[0].parse().context("bad user id")?;
        let item: usize = fields[1].parse().context("bad item id")?;
        let estimate: f64 = fields[2].parse().context("bad estimate")?;
        let corrected: f64 = fields[3].parse().context("bad corrected estimate")?;
        match lookup.get(&(user - 1, item - 1)) {
            Some(&truth_value) => {
                base_pairs.push((truth_value, estimate));
                corrected_pairs.push((truth_value, corrected));
            }
            None => unmatched += 1,
        }
    }
    if unmatched > 0 {
        eprintln!("warning: {unmatched} prediction(s) had no matching truth cell");
    }
    if corrected_pairs.is_empty() {
        bail!("no prediction matched a truth cell");
    }
    println!("rmse={:.6}", rmse(&corrected_pairs)?);
    println!("mae={:.6}", mae(&corrected_pairs)?);
    println!("base_rmse={:.6}", rmse(&base_pairs)?);
    println!("base_mae={:.6}", mae(&base_pairs)?);
    Ok(())
}

fn cmd_grid(cfg: &RunConfig, budget: Option<usize>, workers: usize) -> Result<()> {
    let grids = cfg
        .grids
        .as_ref()
        .ok_or_else(|| anyhow!("the config has no \"grids\" section"))?;
    let ds = load_dataset(&cfg.dataset)?;
    let dataset_sha256 = sha256_file(&cfg.dataset)?;
    let outcome = grid_search(&ds, grids, &GridOptions { workers, budget })?;
    for failure in &outcome.failures {
        eprintln!(
            "warning: trial {} kappa={} rho={} failed: {}",
            failure.key.structure.to_compact(),
            failure.key.kappa,
            failure.key.rho,
            failure.message
        );
    }
    fs::create_dir_all(&cfg.output_dir)?;
    let trials_path = cfg.output_dir.join("trials.csv");
    write_trials_csv(&outcome.ranked, &trials_path)?;
    write_manifest(
        &cfg.output_dir,
        serde_json::json!({
            "command": "grid",
            "config": cfg,
            "dataset_sha256": dataset_sha256,
            "trials": outcome.ranked.len(),
            "failures": outcome.failures.len(),
            "crate_version": env!("CARGO_PKG_VERSION"),
        }),
    )?;
    match outcome.ranked.first() {
        Some(best) => println!(
            "{} trials -> {} (best: {} kappa={} rho={} R={} {} beta={} | validation rmse {:.6}, test rmse {:.6})",
            outcome.ranked.len(),
            trials_path.display(),
            best.key.structure.to_compact(),
            best.key.kappa,
            best.key.rho,
            best.key.batch_size,
            best.scheme,
            best.beta,
            best.validation_rmse,
            best.test_rmse
        ),
        None => println!("no trial succeeded -> {}", trials_path.display()),
    }
    Ok(())
}

fn cmd_report(args: &ReportArgs) -> Result<()> {
    let trials = read_trials_csv(&args.trials)?;
    if trials.is_empty() {
        bail!("trial file {} holds no rows", args.trials.display());
    }
    let out_dir = args
        .out_dir
        .clone()
        .or_else(|| args.trials.parent().map(Path::to_path_buf))
        .unwrap_or_else(|| PathBuf::from("."));
    fs::create_dir_all(&out_dir)?;
    let mut written = Vec::new();
    for surface in surfaces(&trials) {
        written.push(write_surface_csv(&surface, &out_dir)?);
    }
    println!("wrote {} surface file(s) to {}", written.len(), out_dir.display());
    Ok(())
}

fn cmd_gen(args: &GenArgs, seed: u64) -> Result<()> {
    let spec = SyntheticSpec {
        n_users: args.users,
        obs_dim: args.items,
        structure: StructureSpec::parse_compact(&args.structure)?,
        sparsity: args.sparsity,
        noise_sigma: args.noise,
        missing_fraction: args.missing,
        seed,
    };
    let synth = gen_synthetic(&spec)?;
    fs::create_dir_all(&args.out)?;
    let ratings_path = args.out.join("ratings.csv");
    write_jester(&synth.dataset, &ratings_path)?;
    synth.dictionary.write_with_sidecar(
        &args.out.join("true_dictionary.osdl"),
        &serde_json::json!({ "role": "synthetic ground truth", "spec": spec }),
    )?;
    let mut codes = BufWriter::new(fs::File::create(args.out.join("true_codes.csv"))?);
    let width = synth.codes.ncols();
    let header: Vec<String> = (0..width).map(|j| format!("code_{}", j + 1)).collect();
    writeln!(codes, "user,{}", header.join(","))?;
    for (u, row) in synth.codes.rows().into_iter().enumerate() {
        let cells: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
        writeln!(codes, "{},{}", u + 1, cells.join(","))?;
    }
    codes.flush()?;
    write_manifest(
        &args.out,
        serde_json::json!({
            "command": "gen",
            "spec": spec,
            "observed_cells": synth.dataset.len(),
            "crate_version": env!("CARGO_PKG_VERSION"),
        }),
    )?;
    println!(
        "generated {} users x {} items ({} observed cells) -> {}",
        args.users,
        args.items,
        synth.dataset.len(),
        ratings_path.display()
    );
    Ok(())
}

//! End-to-end tests driving the compiled binary: generate, train, predict,
//! evaluate, sweep, report, plus the error paths and reproducibility
//! guarantees.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn osdl(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_osdl"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary must run")
}

fn assert_ok(out: &Output) {
    assert!(
        out.status.success(),
        "command failed\nstdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

fn write_config(dir: &Path, dataset: &str, with_grids: bool) -> std::path::PathBuf {
    let grids = if with_grids {
        r#","grids": {
            "structures": [{"kind": "toroid", "d": 3, "radius": 1}],
            "kappas": [0.015625, 0.25],
            "rhos": [0.0],
            "batch_sizes": [8],
            "betas": [1.0, 2.6],
            "schemes": ["S1_0", "S1"],
            "seed": 5,
            "passes": 2
        }"#
    } else {
        ""
    };
    let body = format!(
        r#"{{
        "structure": {{"kind": "toroid", "d": 3, "radius": 1}},
        "learner": {{"coder": {{"kappa": 0.015625}}, "minibatch": 8, "seed": 11}},
        "correction": {{"scheme": "S1_0", "beta": 1.8, "gamma0": 1.0, "gamma1": 0.3}},
        "split": {{"seed": 7}},
        "dataset": "{dataset}",
        "output_dir": "out",
        "passes": 2{grids}
    }}"#
    );
    let path = dir.join("config.json");
    fs::write(&path, body).unwrap();
    path
}

fn generate_dataset(dir: &Path) {
    let out = osdl(
        &[
            "--seed",
            "3",
            "gen",
            "--out",
            "data",
            "--users",
            "60",
            "--items",
            "9",
            "--structure",
            "toroid:3:1",
            "--sparsity",
            "9",
            "--noise",
            "0.1",
            "--missing",
            "0.3",
        ],
        dir,
    );
    assert_ok(&out);
    assert!(dir.join("data/ratings.csv").exists());
    assert!(dir.join("data/true_dictionary.osdl").exists());
    assert!(dir.join("data/true_codes.csv").exists());
    assert!(dir.join("data/manifest.json").exists());
}

#[test]
fn full_pipeline_train_predict_evaluate() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    generate_dataset(dir);
    write_config(dir, "data/ratings.csv", false);

    let out = osdl(&["--config", "config.json", "train"], dir);
    assert_ok(&out);
    assert!(dir.join("out/dictionary.osdl").exists());
    assert!(dir.join("out/dictionary.osdl.json").exists());
    assert!(dir.join("out/manifest.json").exists());

    let out = osdl(
        &[
            "predict",
            "--dictionary",
            "out/dictionary.osdl",
            "--ratings",
            "data/ratings.csv",
            "--out",
            "out/predictions.csv",
        ],
        dir,
    );
    assert_ok(&out);
    let predictions = fs::read_to_string(dir.join("out/predictions.csv")).unwrap();
    let mut lines = predictions.lines();
    assert_eq!(lines.next(), Some("user,item,estimate,corrected_estimate"));

    // One row per hidden cell: users appear for every item they did not rate.
    let ratings = fs::read_to_string(dir.join("data/ratings.csv")).unwrap();
    let mut hidden = 0usize;
    for line in ratings.lines() {
        let rated = line.split(',').skip(1).filter(|f| *f != "99").count();
        if rated > 0 {
            hidden += 9 - rated;
        }
    }
    assert_eq!(predictions.lines().count() - 1, hidden);

    // Every estimate stays within the rating range.
    for line in predictions.lines().skip(1) {
        let fields: Vec<&str> = line.split(',').collect();
        let est: f64 = fields[2].parse().unwrap();
        let corrected: f64 = fields[3].parse().unwrap();
        assert!((-10.0..=10.0).contains(&est));
        assert!((-10.0..=10.0).contains(&corrected));
    }

    let out = osdl(
        &[
            "evaluate",
            "--predictions",
            "out/predictions.csv",
            "--truth",
            "data/ratings.csv",
        ],
        dir,
    );
    // Predictions cover only unrated cells, so nothing matches the truth
    // file: that is an error, reported as such.
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("no prediction matched"));
}

#[test]
fn evaluate_perfect_predictions_scores_zero() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    generate_dataset(dir);

    // Build a predictions file that repeats the truth for rated cells.
    let ratings = fs::read_to_string(dir.join("data/ratings.csv")).unwrap();
    let mut predictions = String::from("user,item,estimate,corrected_estimate\n");
    for (u, line) in ratings.lines().enumerate() {
        for (i, field) in line.split(',').skip(1).enumerate() {
            if field != "99" {
                let value: f64 = field.parse().unwrap();
                predictions.push_str(&format!(
                    "{},{},{value:.6},{value:.6}\n",
                    u + 1,
                    i + 1
                ));
            }
        }
    }
    fs::write(dir.join("perfect.csv"), predictions).unwrap();

    let out = osdl(
        &[
            "evaluate",
            "--predictions",
            "perfect.csv",
            "--truth",
            "data/ratings.csv",
        ],
        dir,
    );
    assert_ok(&out);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("rmse=0.000000"), "stdout: {stdout}");
    assert!(stdout.contains("mae=0.000000"), "stdout: {stdout}");
}

#[test]
fn grid_and_report_produce_ranked_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    generate_dataset(dir);
    write_config(dir, "data/ratings.csv", true);

    let out = osdl(&["--config", "config.json", "--workers", "1", "grid"], dir);
    assert_ok(&out);
    let trials = fs::read_to_string(dir.join("out/trials.csv")).unwrap();
    assert_eq!(trials.lines().count(), 3); // header + 2 kappa values
    assert!(trials.lines().nth(1).unwrap().starts_with("toroid:3:1,"));

    // Ranked by validation RMSE.
    let vals: Vec<f64> = trials
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(9).unwrap().parse().unwrap())
        .collect();
    assert!(vals[0] <= vals[1]);

    let out = osdl(
        &["report", "--trials", "out/trials.csv", "--out-dir", "out/surfaces"],
        dir,
    );
    assert_ok(&out);
    let entries: Vec<String> = fs::read_dir(dir.join("out/surfaces"))
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    assert_eq!(entries.len(), 4);
    assert!(entries
        .iter()
        .any(|n| n == "surface_toroid_3_1_R8_validation_rmse.csv"));
    let surface =
        fs::read_to_string(dir.join("out/surfaces/surface_toroid_3_1_R8_test_rmse.csv")).unwrap();
    assert!(surface.starts_with("kappa,rho,metric\n"));
    assert_eq!(surface.lines().count(), 3);
}

#[test]
fn dump_groups_prints_structure_and_exits() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    generate_dataset(dir);
    write_config(dir, "data/ratings.csv", false);
    let out = osdl(&["--config", "config.json", "--dump-groups", "train"], dir);
    assert_ok(&out);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.starts_with("dalpha=9\n"));
    assert!(stdout.contains("G1: "));
    assert!(stdout.contains(" ; w: "));
    // The command exits before training.
    assert!(!dir.join("out/dictionary.osdl").exists());
}

#[test]
fn error_paths_exit_nonzero_with_diagnostics() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();

    let out = osdl(&["--no-such-flag", "train"], dir);
    assert!(!out.status.success());
    assert!(!out.stderr.is_empty());

    let out = osdl(&["train"], dir);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("--config"));

    write_config(dir, "missing/ratings.csv", false);
    let out = osdl(&["--config", "config.json", "train"], dir);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing/ratings.csv"));

    let out = osdl(
        &[
            "predict",
            "--dictionary",
            "nowhere.osdl",
            "--ratings",
            "also_nowhere.csv",
        ],
        dir,
    );
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("nowhere.osdl"));
}

#[test]
fn training_runs_are_bit_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    generate_dataset(dir);
    write_config(dir, "data/ratings.csv", false);

    let out = osdl(&["--config", "config.json", "train"], dir);
    assert_ok(&out);
    let first_dict = fs::read(dir.join("out/dictionary.osdl")).unwrap();
    let first_manifest = fs::read(dir.join("out/manifest.json")).unwrap();

    fs::remove_dir_all(dir.join("out")).unwrap();
    let out = osdl(&["--config", "config.json", "train"], dir);
    assert_ok(&out);
    assert_eq!(first_dict, fs::read(dir.join("out/dictionary.osdl")).unwrap());
    assert_eq!(
        first_manifest,
        fs::read(dir.join("out/manifest.json")).unwrap()
    );
}

#[test]
fn seed_override_changes_the_dictionary() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    generate_dataset(dir);
    write_config(dir, "data/ratings.csv", false);

    let out = osdl(&["--config", "config.json", "train"], dir);
    assert_ok(&out);
    let base = fs::read(dir.join("out/dictionary.osdl")).unwrap();

    let out = osdl(&["--config", "config.json", "--seed", "99", "train"], dir);
    assert_ok(&out);
    let reseeded = fs::read(dir.join("out/dictionary.osdl")).unwrap();
    assert_ne!(base, reseeded);
}

#[test]
fn predict_uses_sidecar_when_no_config_given() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    generate_dataset(dir);
    write_config(dir, "data/ratings.csv", false);
    assert_ok(&osdl(&["--config", "config.json", "train"], dir));

    // Without --config the sidecar supplies structure and coder settings.
    let out = osdl(
        &[
            "predict",
            "--dictionary",
            "out/dictionary.osdl",
            "--ratings",
            "data/ratings.csv",
            "--out",
            "out/p.csv",
        ],
        dir,
    );
    assert_ok(&out);
    assert!(dir.join("out/p.csv").exists());
}

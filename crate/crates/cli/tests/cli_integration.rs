//! End-to-end checks of the command-line surface: exit codes, file layout,
//! CSV schemas, and reproducibility of runs.

use std::path::{Path, PathBuf};
use std::process::Command;

fn binary() -> &'static str {
    env!("CARGO_BIN_EXE_boostlab")
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("bl_cli_{}_{name}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn write_cfg(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path
}

const TREE_CFG: &str = "\
[dataset]
kind = blobs
classes = 3
train_per_class = 40
test_per_class = 20
height = 4
width = 4
separation = 1.5

[learner]
family = tree
leaves = 4
filters = 40
min_rect = 1

[boosting]
algorithm = adaboost
rounds = 3
";

#[test]
fn unknown_subcommand_and_missing_config_exit_1() {
    let out = Command::new(binary()).arg("frobnicate").output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    let out = Command::new(binary())
        .args(["boost", "--config", "/nonexistent/path.cfg"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    let out = Command::new(binary()).args(["boost"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn boost_run_directory_is_complete_and_reproducible() {
    let dir = scratch("boost");
    let cfg = write_cfg(&dir, "cfg.cfg", TREE_CFG);
    let run = |out: &Path| {
        let status = Command::new(binary())
            .args(["boost", "--config"])
            .arg(&cfg)
            .args(["--seed", "11", "--out"])
            .arg(out)
            .status()
            .unwrap();
        assert_eq!(status.code(), Some(0));
    };
    let out_a = dir.join("a");
    let out_b = dir.join("b");
    run(&out_a);
    run(&out_b);

    let metrics = std::fs::read_to_string(out_a.join("metrics.csv")).unwrap();
    assert!(metrics.starts_with("round,r_t,alpha,weighted_error,train_acc,test_acc,cum_params\n"));
    assert_eq!(metrics.lines().count(), 4, "header + 3 rounds");
    // config echo preserves the input text
    assert_eq!(std::fs::read_to_string(out_a.join("config.cfg")).unwrap(), TREE_CFG);
    let manifest = std::fs::read_to_string(out_a.join("manifest.txt")).unwrap();
    assert!(manifest.contains("seed = 11"));
    assert!(manifest.contains("halt = none"));
    assert!(manifest.contains("round_seed_rule"));
    // identical seeds give byte-identical metrics
    assert_eq!(metrics, std::fs::read_to_string(out_b.join("metrics.csv")).unwrap());
    // the serialized ensemble loads and has 3 members
    let ensemble = boostlab::boosting::load_ensemble(&out_a.join("ensemble")).unwrap();
    assert_eq!(ensemble.members.len(), 3);
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn tree_cum_params_column_follows_the_leaf_accounting() {
    // 64-leaf trees on impure digit data: P = 3*(64-1) + 10*64 = 829 per tree
    let dir = scratch("cum");
    // enough examples that 64 leaves cannot purify the training set
    let cfg = write_cfg(
        &dir,
        "cfg.cfg",
        "[dataset]\nkind = synth-digits\ntrain_per_class = 150\ntest_per_class = 10\n\n[learner]\nfamily = tree\nleaves = 64\nfilters = 150\nmin_rect = 4\n\n[boosting]\nalgorithm = adaboost\nrounds = 2\n",
    );
    let out = dir.join("run");
    let status = Command::new(binary())
        .args(["boost", "--config"])
        .arg(&cfg)
        .args(["--seed", "3", "--out"])
        .arg(&out)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    let metrics = std::fs::read_to_string(out.join("metrics.csv")).unwrap();
    let rows: Vec<&str> = metrics.lines().skip(1).collect();
    for (i, row) in rows.iter().enumerate() {
        let cum: usize = row.split(',').next_back().unwrap().parse().unwrap();
        assert_eq!(cum, 829 * (i + 1), "row {row}");
    }
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn repeats_create_subruns_and_a_summary() {
    let dir = scratch("repeats");
    let cfg = write_cfg(&dir, "cfg.cfg", TREE_CFG);
    let out = dir.join("run");
    let status = Command::new(binary())
        .args(["boost", "--config"])
        .arg(&cfg)
        .args(["--seed", "5", "--out"])
        .arg(&out)
        .args(["--repeats", "3", "--workers", "2"])
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    for r in 0..3 {
        assert!(out.join(format!("repeat_{r:03}/metrics.csv")).exists());
    }
    let summary = std::fs::read_to_string(out.join("summary.csv")).unwrap();
    assert!(summary.starts_with("round,r_t_mean,r_t_std,"));
    assert_eq!(summary.lines().count(), 4);
    // repeats use distinct derived seeds
    let a = std::fs::read_to_string(out.join("repeat_000/metrics.csv")).unwrap();
    let b = std::fs::read_to_string(out.join("repeat_001/metrics.csv")).unwrap();
    assert_ne!(a, b);
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn compare_emits_paired_rows_with_identical_first_round() {
    let dir = scratch("compare");
    let cfg = write_cfg(
        &dir,
        "cfg.cfg",
        "[dataset]\nkind = blobs\nclasses = 3\ntrain_per_class = 40\ntest_per_class = 20\nheight = 4\nwidth = 4\nseparation = 2.0\n\n[learner]\nfamily = mlp2\nwidths = 4,4\n\n[boosting]\nrounds = 2\n\n[optimizer]\nlr = 0.1\nepochs = 6\nbatch = 16\n",
    );
    let out = dir.join("run");
    let status = Command::new(binary())
        .args(["compare", "--config"])
        .arg(&cfg)
        .args(["--seed", "9", "--out"])
        .arg(&out)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    let csv = std::fs::read_to_string(out.join("compare.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next(),
        Some("round,ensemble_params,ensemble_train_acc,ensemble_test_acc,single_params,single_train_acc,single_test_acc")
    );
    let first: Vec<&str> = lines.next().unwrap().split(',').collect();
    // round 1: the single model IS the first member
    assert_eq!(first[1], first[4], "params columns match at round 1");
    assert_eq!(first[2], first[5], "train accuracy matches at round 1");
    assert_eq!(first[3], first[6], "test accuracy matches at round 1");
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn merge_verify_exit_codes() {
    let dir = scratch("merge");
    let status = Command::new(binary())
        .args(["merge-verify", "--family", "mlp2", "--inputs", "5", "--seed", "1", "--out"])
        .arg(dir.join("ok"))
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    let status = Command::new(binary())
        .args(["merge-verify", "--family", "mlp2", "--inputs", "5", "--seed", "1", "--corrupt-self-test", "--out"])
        .arg(dir.join("bad"))
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(3), "corrupted merge must exit with the verification code");
    let report = std::fs::read_to_string(dir.join("bad/merge_report.txt")).unwrap();
    assert!(report.contains("verification = fail"));
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn train_and_eval_round_trip() {
    let dir = scratch("traineval");
    let cfg = write_cfg(&dir, "cfg.cfg", TREE_CFG);
    let out = dir.join("model");
    let status = Command::new(binary())
        .args(["train-tree", "--config"])
        .arg(&cfg)
        .args(["--seed", "4", "--out"])
        .arg(&out)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    let output = Command::new(binary())
        .args(["eval", "--model"])
        .arg(out.join("tree.bltr"))
        .args(["--config"])
        .arg(&cfg)
        .args(["--seed", "4"])
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(0));
    let stdout = String::from_utf8_lossy(&output.stdout);
    let report = std::fs::read_to_string(out.join("report.txt")).unwrap();
    // eval reproduces the accuracies recorded at training time
    for line in report.lines().filter(|l| l.starts_with("train_acc") || l.starts_with("test_acc")) {
        assert!(stdout.contains(line), "eval output missing {line:?}\n{stdout}");
    }
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn budget_csv_schema() {
    let output = Command::new(binary())
        .args(["budget", "--family", "cnn3", "--classes", "10", "--rounds", "3", "--csv"])
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(0));
    let stdout = String::from_utf8_lossy(&output.stdout);
    let mut lines = stdout.lines();
    assert_eq!(
        lines.next(),
        Some("family,classes,round,ensemble_params,single_widths,single_params")
    );
    assert_eq!(lines.next(), Some("cnn3,10,1,5954,6x16x32,5954"));
}

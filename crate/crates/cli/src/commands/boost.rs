//! `boost` subcommand: runs boosting (or averaging) per the config, logging
//! one CSV row per round, with optional concurrent repeats.

use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use boostlab::boosting::{boost, BoostConfig, LogitBoostConfig, RoundRecord, SoftLabelMode};
use boostlab::rng::mix_seed;

use crate::config::ExperimentConfig;
use crate::datasets::load_splits;
use crate::learners::{build_learner, member_param_count};
use crate::report::{metrics_csv, summary_csv, write_file, Manifest};
use crate::CliError;

pub fn run(
    cfg: &ExperimentConfig,
    seed: u64,
    out: &Path,
    repeats: usize,
    workers: usize,
) -> Result<(), CliError> {
    if repeats <= 1 {
        run_one(cfg, seed, out)?;
        return Ok(());
    }
    let collected: Mutex<Vec<(usize, Vec<RoundRecord>)>> = Mutex::new(Vec::new());
    let next = AtomicUsize::new(0);
    let errors: Mutex<Vec<String>> = Mutex::new(Vec::new());
    std::thread::scope(|scope| {
        for _ in 0..workers.clamp(1, repeats) {
            scope.spawn(|| loop {
                let r = next.fetch_add(1, Ordering::SeqCst);
                if r >= repeats {
                    break;
                }
                let dir = out.join(format!("repeat_{r:03}"));
                let repeat_seed = mix_seed(seed, 1000 + r as u64);
                match run_one(cfg, repeat_seed, &dir) {
                    Ok(records) => collected.lock().unwrap().push((r, records)),
                    Err(e) => errors.lock().unwrap().push(format!("repeat {r}: {e}")),
                }
            });
        }
    });
    let errors = errors.into_inner().unwrap();
    if let Some(first) = errors.first() {
        return Err(CliError::runtime(first.clone()));
    }
    let mut runs = collected.into_inner().unwrap();
    runs.sort_by_key(|(r, _)| *r);
    let records: Vec<Vec<RoundRecord>> = runs.into_iter().map(|(_, r)| r).collect();
    write_file(&out.join("summary.csv"), &summary_csv(&records))?;
    let mut manifest = Manifest::new("boost", seed);
    manifest.push("repeats", repeats.to_string());
    manifest.push("repeat_seed_rule", "splitmix64(seed + (1000 + repeat) * 0x9E3779B97F4A7C15)");
    manifest.write(out)?;
    Ok(())
}

pub fn run_one(cfg: &ExperimentConfig, seed: u64, dir: &Path) -> Result<Vec<RoundRecord>, CliError> {
    let (train, test) = load_splits(&cfg.dataset, seed)?;
    let learner = build_learner(cfg, &train, seed)?;
    let bc = BoostConfig {
        rounds: cfg.boost.rounds,
        algorithm: cfg.boost.algorithm,
        alpha_rule: cfg.boost.alpha_rule,
        reset_mode: cfg.boost.reset,
        seed,
        logit: LogitBoostConfig {
            shrinkage: cfg.boost.shrinkage,
            clamp: cfg.boost.clamp,
            mse_class_limit: 10,
            soft_labels: SoftLabelMode::default(),
        },
    };
    let outcome = boost(learner.as_ref(), &train, Some(&test), &bc).map_err(CliError::runtime_from)?;

    let mut cum_params = Vec::with_capacity(outcome.records.len());
    let mut total = 0usize;
    for member in &outcome.ensemble.members {
        total += member_param_count(&member.classifier, train.num_classes);
        cum_params.push(total);
    }

    write_file(&dir.join("config.cfg"), &cfg.raw.source_text)?;
    write_file(&dir.join("metrics.csv"), &metrics_csv(&outcome.records, &cum_params))?;
    boostlab::boosting::save_ensemble(&dir.join("ensemble"), &outcome.ensemble)
        .map_err(CliError::runtime_from)?;
    let mut manifest = Manifest::new("boost", seed);
    manifest.push("algorithm", cfg.boost.algorithm.name());
    manifest.push("alpha_rule", cfg.boost.alpha_rule.name());
    manifest.push("reset", cfg.boost.reset.name());
    manifest.push("rounds_requested", cfg.boost.rounds.to_string());
    manifest.push("rounds_completed", outcome.ensemble.rounds().to_string());
    manifest.push("train_examples", train.len().to_string());
    manifest.push("test_examples", test.len().to_string());
    match &outcome.halt {
        Some(reason) => manifest.push("halt", reason.to_string()),
        None => manifest.push("halt", "none"),
    }
    manifest.write(dir)?;
    Ok(outcome.records)
}

/// Resolves the output directory: flag wins, then config, then a default.
pub fn resolve_out_dir(cfg: &ExperimentConfig, flag: &Option<PathBuf>, default: &str) -> PathBuf {
    flag.clone()
        .or_else(|| cfg.out_dir.clone())
        .unwrap_or_else(|| PathBuf::from(default))
}

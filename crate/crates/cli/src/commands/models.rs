//! `train-tree`, `train-net`, and `eval` subcommands.

use std::fmt::Write as _;
use std::path::Path;

use boostlab::boosting::{load_ensemble, train_single, NetworkLearner, PreparedData, TreeLearner, WeakClassifier, WeakLearner};
use boostlab::haar::{generate_filter_bank, load_bank_file, save_bank_file, IntegralSet};
use boostlab::nn::{argmax_class, load_network_file, save_network_file};
use boostlab::rng::mix_seed;
use boostlab::tree::{load_tree_file, save_tree_file};

use crate::config::{ExperimentConfig, LearnerFamily};
use crate::datasets::load_splits;
use crate::learners::network_spec;
use crate::report::{write_file, Manifest};
use crate::CliError;

pub fn train_tree(cfg: &ExperimentConfig, seed: u64, dir: &Path) -> Result<(), CliError> {
    if !matches!(cfg.learner.family, LearnerFamily::Tree) {
        return Err(CliError::validation("train-tree needs [learner] family = tree".into()));
    }
    let (train, test) = load_splits(&cfg.dataset, seed)?;
    let bank_seed = cfg.learner.bank_seed.unwrap_or_else(|| mix_seed(seed, 0xBA2C));
    let bank = generate_filter_bank(
        (train.height, train.width),
        cfg.learner.min_rect,
        train.channels,
        cfg.learner.filters,
        bank_seed,
    )
    .map_err(CliError::validation_from)?;
    let learner = TreeLearner::new(&bank, cfg.learner.leaves, cfg.learner.objective);
    let prepared = PreparedData::new(&train, false, true);
    let classifier = train_single(&learner, &prepared, seed).map_err(CliError::runtime_from)?;
    let WeakClassifier::Tree(tree) = &classifier else {
        return Err(CliError::runtime("tree learner produced a non-tree".into()));
    };
    let expanded = learner.filters().expect("tree learner holds its bank");

    std::fs::create_dir_all(dir).map_err(|e| CliError::runtime(e.to_string()))?;
    save_tree_file(&dir.join("tree.bltr"), tree).map_err(CliError::runtime_from)?;
    save_bank_file(&dir.join("bank.blhb"), expanded).map_err(CliError::runtime_from)?;

    let test_prepared = PreparedData::new(&test, false, true);
    let train_acc = classifier_accuracy(&classifier, &expanded.filters, &prepared)?;
    let test_acc = classifier_accuracy(&classifier, &expanded.filters, &test_prepared)?;
    let mut report = String::new();
    let _ = writeln!(report, "leaves_requested = {}", cfg.learner.leaves);
    let _ = writeln!(report, "leaves = {}", tree.num_leaves());
    if tree.num_leaves() < cfg.learner.leaves {
        let _ = writeln!(report, "warning = growth stopped early: every remaining leaf was unsplittable");
    }
    let _ = writeln!(report, "train_acc = {train_acc}");
    let _ = writeln!(report, "test_acc = {test_acc}");
    print!("{report}");
    write_file(&dir.join("report.txt"), &report)?;
    let mut manifest = Manifest::new("train-tree", seed);
    manifest.push("bank_seed", bank_seed.to_string());
    manifest.write(dir)?;
    Ok(())
}

pub fn train_net(cfg: &ExperimentConfig, seed: u64, dir: &Path) -> Result<(), CliError> {
    let LearnerFamily::Net(_) = cfg.learner.family else {
        return Err(CliError::validation("train-net needs a network learner family".into()));
    };
    let (train, test) = load_splits(&cfg.dataset, seed)?;
    let spec = network_spec(cfg, &train)?;
    let learner = NetworkLearner::new(spec.clone(), cfg.optimizer.clone());
    let prepared = PreparedData::new(&train, true, false);
    let classifier = train_single(&learner, &prepared, seed).map_err(CliError::runtime_from)?;
    let WeakClassifier::Network(spec, params) = &classifier else {
        return Err(CliError::runtime("network learner produced a non-network".into()));
    };

    std::fs::create_dir_all(dir).map_err(|e| CliError::runtime(e.to_string()))?;
    save_network_file(&dir.join("model.blnn"), spec, params, None).map_err(CliError::runtime_from)?;

    let test_prepared = PreparedData::new(&test, true, false);
    let train_acc = classifier_accuracy(&classifier, &[], &prepared)?;
    let test_acc = classifier_accuracy(&classifier, &[], &test_prepared)?;
    let mut report = String::new();
    let _ = writeln!(report, "params = {}", params.param_count());
    let _ = writeln!(report, "train_acc = {train_acc}");
    let _ = writeln!(report, "test_acc = {test_acc}");
    print!("{report}");
    write_file(&dir.join("report.txt"), &report)?;
    Manifest::new("train-net", seed).write(dir)?;
    Ok(())
}

fn classifier_accuracy(
    classifier: &WeakClassifier,
    filters: &[boostlab::haar::HaarFilter],
    prepared: &PreparedData,
) -> Result<f64, CliError> {
    let mut correct = 0usize;
    for i in 0..prepared.len() {
        let probs = classifier
            .predict(filters, prepared.sample(i))
            .map_err(CliError::runtime_from)?;
        if argmax_class(&probs) == prepared.labels[i] {
            correct += 1;
        }
    }
    Ok(correct as f64 / prepared.len() as f64)
}

/// Evaluates a saved model (ensemble directory, `.blnn` network, or `.bltr`
/// tree with its sibling `bank.blhb`) on the config's dataset.
pub fn eval(model: &Path, cfg: &ExperimentConfig, seed: u64) -> Result<(), CliError> {
    let (train, test) = load_splits(&cfg.dataset, seed)?;
    if model.is_dir() {
        let ensemble = load_ensemble(model).map_err(CliError::validation_from)?;
        let needs_integrals = ensemble
            .members
            .iter()
            .any(|m| matches!(m.classifier, WeakClassifier::Tree(_)));
        let needs_tensors = ensemble
            .members
            .iter()
            .any(|m| matches!(m.classifier, WeakClassifier::Network(..)));
        let train_prep = PreparedData::new(&train, needs_tensors, needs_integrals);
        let test_prep = PreparedData::new(&test, needs_tensors, needs_integrals);
        println!("members = {}", ensemble.members.len());
        println!("train_acc = {}", ensemble.accuracy(&train_prep).map_err(CliError::runtime_from)?);
        println!("test_acc = {}", ensemble.accuracy(&test_prep).map_err(CliError::runtime_from)?);
        return Ok(());
    }
    match model.extension().and_then(|e| e.to_str()) {
        Some("blnn") => {
            let (spec, params, _) = load_network_file(model).map_err(CliError::validation_from)?;
            let classifier = WeakClassifier::Network(spec, params);
            let train_prep = PreparedData::new(&train, true, false);
            let test_prep = PreparedData::new(&test, true, false);
            println!("train_acc = {}", classifier_accuracy(&classifier, &[], &train_prep)?);
            println!("test_acc = {}", classifier_accuracy(&classifier, &[], &test_prep)?);
            Ok(())
        }
        Some("bltr") => {
            let tree = load_tree_file(model).map_err(CliError::validation_from)?;
            let bank_path = model
                .parent()
                .map(|p| p.join("bank.blhb"))
                .filter(|p| p.exists())
                .ok_or_else(|| CliError::validation("tree model needs a sibling bank.blhb".into()))?;
            let bank = load_bank_file(&bank_path).map_err(CliError::validation_from)?;
            let train_ii = IntegralSet::from_dataset(&train);
            let test_ii = IntegralSet::from_dataset(&test);
            let acc = |integrals: &IntegralSet, labels: &[usize]| -> Result<f64, CliError> {
                let mut correct = 0usize;
                for (i, ii) in integrals.images.iter().enumerate() {
                    let dist = tree.predict(&bank.filters, ii).map_err(CliError::runtime_from)?;
                    if argmax_class(&dist) == labels[i] {
                        correct += 1;
                    }
                }
                Ok(correct as f64 / labels.len() as f64)
            };
            println!("train_acc = {}", acc(&train_ii, &train.labels_usize())?);
            println!("test_acc = {}", acc(&test_ii, &test.labels_usize())?);
            Ok(())
        }
        _ => Err(CliError::validation(format!(
            "cannot tell what kind of model {} is",
            model.display()
        ))),
    }
}

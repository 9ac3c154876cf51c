//! `compare` subcommand: per round, a parameter-matched single model next to
//! the growing ensemble (continued tree growth, or budget-widened networks).

use std::fmt::Write as _;
use std::path::Path;

use boostlab::boosting::{
    boost, train_single, BoostConfig, LogitBoostConfig, PreparedData, TreeLearner, WeakLearner,
};
use boostlab::budget::BudgetRequest;
use boostlab::data::Dataset;
use boostlab::haar::generate_filter_bank;
use boostlab::nn::argmax_class;
use boostlab::rng::mix_seed;
use boostlab::tree::{continue_growth, DecisionTree, TreeParamModel};

use crate::config::{ExperimentConfig, LearnerFamily};
use crate::datasets::load_splits;
use crate::learners::{member_param_count, network_spec, TREE_K};
use crate::report::{write_file, Manifest};
use crate::CliError;

pub const COMPARE_HEADER: &str =
    "round,ensemble_params,ensemble_train_acc,ensemble_test_acc,single_params,single_train_acc,single_test_acc";

pub fn run(cfg: &ExperimentConfig, seed: u64, dir: &Path) -> Result<(), CliError> {
    let (train, test) = load_splits(&cfg.dataset, seed)?;
    let rows = match cfg.learner.family {
        LearnerFamily::Tree => compare_trees(cfg, seed, &train, &test)?,
        LearnerFamily::Net(family) => compare_networks(cfg, seed, family, &train, &test)?,
        LearnerFamily::Chance => {
            return Err(CliError::validation(
                "compare needs a tree or network learner".into(),
            ))
        }
    };
    let mut csv = String::from(COMPARE_HEADER);
    csv.push('\n');
    for r in &rows {
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{},{}",
            r.round,
            r.ensemble_params,
            r.ensemble_train_acc,
            r.ensemble_test_acc,
            r.single_params,
            r.single_train_acc,
            r.single_test_acc
        );
    }
    write_file(&dir.join("config.cfg"), &cfg.raw.source_text)?;
    write_file(&dir.join("compare.csv"), &csv)?;
    let mut manifest = Manifest::new("compare", seed);
    manifest.push("rounds", cfg.boost.rounds.to_string());
    manifest.write(dir)?;
    Ok(())
}

pub struct CompareRow {
    pub round: usize,
    pub ensemble_params: usize,
    pub ensemble_train_acc: f64,
    pub ensemble_test_acc: f64,
    pub single_params: usize,
    pub single_train_acc: f64,
    pub single_test_acc: f64,
}

fn boost_config(cfg: &ExperimentConfig, seed: u64) -> BoostConfig {
    BoostConfig {
        rounds: cfg.boost.rounds,
        algorithm: cfg.boost.algorithm,
        alpha_rule: cfg.boost.alpha_rule,
        reset_mode: cfg.boost.reset,
        seed,
        logit: LogitBoostConfig {
            shrinkage: cfg.boost.shrinkage,
            clamp: cfg.boost.clamp,
            ..LogitBoostConfig::default()
        },
    }
}

fn tree_accuracy(tree: &DecisionTree, filters: &[boostlab::haar::HaarFilter], prepared: &PreparedData) -> Result<f64, CliError> {
    let integrals = prepared
        .integrals
        .as_ref()
        .ok_or_else(|| CliError::runtime("missing integral images".into()))?;
    let mut correct = 0usize;
    for (i, ii) in integrals.images.iter().enumerate() {
        let dist = tree.predict(filters, ii).map_err(CliError::runtime_from)?;
        if argmax_class(&dist) == prepared.labels[i] {
            correct += 1;
        }
    }
    Ok(correct as f64 / prepared.len() as f64)
}

/// Boosted fixed-size trees against one tree grown to the matched leaf
/// count (64 -> 128 -> ... by continued growth).
pub fn compare_trees(
    cfg: &ExperimentConfig,
    seed: u64,
    train: &Dataset,
    test: &Dataset,
) -> Result<Vec<CompareRow>, CliError> {
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
    let filters = learner.filters().expect("tree learner carries its bank").filters.clone();

    let outcome = boost(&learner, train, Some(test), &boost_config(cfg, seed)).map_err(CliError::runtime_from)?;

    let train_prep = PreparedData::new(train, false, true);
    let test_prep = PreparedData::new(test, false, true);
    let labels = &train_prep.labels;
    let weights = vec![1.0 / train.len() as f64; train.len()];
    let model = TreeParamModel {
        k: TREE_K,
        c: train.num_classes,
    };

    // single-tree chain: the round-1 member, grown onward
    let mut single = match &outcome.ensemble.members.first() {
        Some(member) => match &member.classifier {
            boostlab::boosting::WeakClassifier::Tree(t) => t.clone(),
            _ => return Err(CliError::runtime("tree compare got a non-tree member".into())),
        },
        None => return Err(CliError::runtime("boosting produced no members".into())),
    };

    let mut rows = Vec::new();
    let mut cum_params = 0usize;
    for (t, record) in outcome.records.iter().enumerate() {
        let member = &outcome.ensemble.members[t];
        cum_params += member_param_count(&member.classifier, train.num_classes);
        let target_leaves = cfg.learner.leaves * (t + 1);
        if t > 0 {
            let integrals = train_prep.integrals.as_ref().unwrap();
            let (grown, _) = continue_growth(
                &single,
                integrals,
                labels,
                &weights,
                &filters,
                target_leaves,
                cfg.learner.objective,
            )
            .map_err(CliError::runtime_from)?;
            single = grown;
        }
        rows.push(CompareRow {
            round: record.round,
            ensemble_params: cum_params,
            ensemble_train_acc: record.train_acc,
            ensemble_test_acc: record.test_acc,
            single_params: single.param_count(model),
            single_train_acc: tree_accuracy(&single, &filters, &train_prep)?,
            single_test_acc: tree_accuracy(&single, &filters, &test_prep)?,
        });
    }
    Ok(rows)
}

/// Boosted fixed-size networks against budget-matched single networks.
pub fn compare_networks(
    cfg: &ExperimentConfig,
    seed: u64,
    family: boostlab::budget::Family,
    train: &Dataset,
    test: &Dataset,
) -> Result<Vec<CompareRow>, CliError> {
    let base_spec = network_spec(cfg, train)?;
    let learner = boostlab::boosting::NetworkLearner::new(base_spec, cfg.optimizer.clone());
    let outcome = boost(&learner, train, Some(test), &boost_config(cfg, seed)).map_err(CliError::runtime_from)?;

    // parameter accounting follows the family's published convention
    // (bias-free for cnn3/mlp2, biased for vgg8) regardless of whether the
    // trained nets carry biases
    let standard = BudgetRequest::standard(family, train.num_classes);
    let request = BudgetRequest {
        family,
        base_widths: cfg.learner.widths.clone(),
        input_shape: train.image_shape(),
        num_classes: train.num_classes,
        c_factor: standard.c_factor,
        include_bias: standard.include_bias,
    };
    let base_count = request.base_params().map_err(CliError::runtime_from)?;

    let train_prep = PreparedData::new(train, true, false);
    let test_prep = PreparedData::new(test, true, false);

    let mut rows = Vec::new();
    for (t, record) in outcome.records.iter().enumerate() {
        let cum_params = base_count * (t + 1);
        let widths = request.widths_for_multiplier(t + 1).map_err(CliError::runtime_from)?;
        let spec = request.spec_for_widths(&widths).map_err(CliError::runtime_from)?;
        let single_learner = boostlab::boosting::NetworkLearner::new(spec.clone(), cfg.optimizer.clone());
        // round 1 uses the run seed so the single model IS the round-1
        // member; later rounds train from independent derived seeds
        let single_seed = if t == 0 { seed } else { mix_seed(seed, 0x517E + t as u64) };
        let single = train_single(&single_learner, &train_prep, single_seed).map_err(CliError::runtime_from)?;
        let (acc_train, acc_test) = match &single {
            boostlab::boosting::WeakClassifier::Network(spec, params) => (
                network_accuracy(spec, params, &train_prep)?,
                network_accuracy(spec, params, &test_prep)?,
            ),
            _ => unreachable!("network learner returns networks"),
        };
        rows.push(CompareRow {
            round: record.round,
            ensemble_params: cum_params,
            ensemble_train_acc: record.train_acc,
            ensemble_test_acc: record.test_acc,
            single_params: spec.param_count(request.include_bias),
            single_train_acc: acc_train,
            single_test_acc: acc_test,
        });
    }
    Ok(rows)
}

fn network_accuracy(
    spec: &boostlab::nn::NetworkSpec,
    params: &boostlab::nn::NetworkParams,
    prepared: &PreparedData,
) -> Result<f64, CliError> {
    let tensors = prepared
        .tensors
        .as_ref()
        .ok_or_else(|| CliError::runtime("missing tensors".into()))?;
    boostlab::nn::accuracy(spec, params, tensors, &prepared.labels).map_err(CliError::runtime_from)
}

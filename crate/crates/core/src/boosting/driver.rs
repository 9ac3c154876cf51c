//! The boosting round driver.

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::nn::argmax_class;
use crate::rng::mix_seed;

use super::learner::{PreparedData, WeakClassifier, WeakLearner};
use super::logitboost::{logitboost_round, LogitBoostConfig, LogitState};
use super::samme::{samme_round, SammeRound};
use super::{
    alpha, average_margin, margin, Algorithm, AlphaRule, Ensemble, EnsembleMember, HaltReason,
    ResetMode, RoundRecord, WeightDistribution,
};

#[derive(Debug, Clone)]
pub struct BoostConfig {
    pub rounds: usize,
    pub algorithm: Algorithm,
    pub alpha_rule: AlphaRule,
    pub reset_mode: ResetMode,
    pub seed: u64,
    pub logit: LogitBoostConfig,
}

impl BoostConfig {
    pub fn adaboost(rounds: usize, seed: u64) -> Self {
        BoostConfig {
            rounds,
            algorithm: Algorithm::AdaBoost,
            alpha_rule: AlphaRule::Sigmoid,
            reset_mode: ResetMode::Reset,
            seed,
            logit: LogitBoostConfig::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct BoostOutcome {
    pub ensemble: Ensemble,
    pub records: Vec<RoundRecord>,
    pub halt: Option<HaltReason>,
    /// The example distribution each completed round trained with
    /// (uniform for averaging and LogitBoost).
    pub weights_per_round: Vec<Vec<f64>>,
}

/// Cumulative ensemble scores per example, so per-round ensemble accuracy
/// does not re-evaluate earlier members.
struct ScoreBoard {
    scores: Vec<Vec<f64>>,
}

impl ScoreBoard {
    fn new(m: usize, c: usize) -> Self {
        ScoreBoard {
            scores: vec![vec![0.0; c]; m],
        }
    }

    fn add_probs(&mut self, alpha: f64, outputs: &[Vec<f64>]) {
        for (row, out) in self.scores.iter_mut().zip(outputs) {
            for (s, p) in row.iter_mut().zip(out) {
                *s += alpha * p;
            }
        }
    }

    fn add_votes(&mut self, alpha: f64, outputs: &[Vec<f64>]) {
        for (row, out) in self.scores.iter_mut().zip(outputs) {
            row[argmax_class(out)] += alpha;
        }
    }

    fn accuracy(&self, labels: &[usize]) -> f64 {
        let correct = self
            .scores
            .iter()
            .zip(labels)
            .filter(|(row, &y)| argmax_class(row) == y)
            .count();
        correct as f64 / labels.len().max(1) as f64
    }
}

fn member_probs(
    classifier: &WeakClassifier,
    filters: &[crate::haar::HaarFilter],
    data: &PreparedData,
) -> Result<Vec<Vec<f64>>> {
    (0..data.len())
        .map(|i| classifier.predict(filters, data.sample(i)))
        .collect()
}

/// The plain (un-boosted) training run: the weak learner on uniform weights
/// with the same derived seed boosting would hand round 1. `boost` with
/// T = 1 produces exactly this classifier.
pub fn train_single(learner: &dyn WeakLearner, data: &PreparedData, seed: u64) -> Result<WeakClassifier> {
    let uniform = WeightDistribution::uniform(data.len())?;
    learner.train(data, &uniform, mix_seed(seed, 1), None)
}

/// Trains `rounds` members independently on unweighted data (seeds differ
/// per round) and combines them with equal coefficients 1/T.
pub fn average_ensemble(
    learner: &dyn WeakLearner,
    train: &Dataset,
    test: Option<&Dataset>,
    rounds: usize,
    seed: u64,
) -> Result<BoostOutcome> {
    let config = BoostConfig {
        rounds,
        algorithm: Algorithm::Average,
        alpha_rule: AlphaRule::Sigmoid,
        reset_mode: ResetMode::Reset,
        seed,
        logit: LogitBoostConfig::default(),
    };
    boost(learner, train, test, &config)
}

/// Runs multi-class boosting (or averaging) for `config.rounds` rounds,
/// returning the ensemble, per-round records, and the halt reason if the
/// run stopped early.
pub fn boost(
    learner: &dyn WeakLearner,
    train: &Dataset,
    test: Option<&Dataset>,
    config: &BoostConfig,
) -> Result<BoostOutcome> {
    if config.rounds < 1 {
        return Err(Error::InvalidArgument("rounds must be >= 1".into()));
    }
    if train.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let (need_tensors, need_integrals) = learner.needs();
    let prepared = PreparedData::new(train, need_tensors, need_integrals);
    let prepared_test = test.map(|t| PreparedData::new(t, need_tensors, need_integrals));
    let c = train.num_classes;
    let m = train.len();
    let labels = &prepared.labels;
    let empty: Vec<crate::haar::HaarFilter> = Vec::new();
    let filters: &[crate::haar::HaarFilter] =
        learner.filters().map(|b| b.filters.as_slice()).unwrap_or(&empty);

    let mut ensemble = Ensemble {
        algorithm: config.algorithm,
        alpha_rule: config.alpha_rule,
        reset_mode: config.reset_mode,
        num_classes: c,
        members: Vec::new(),
        filters: learner.filters().cloned(),
    };
    let mut records = Vec::new();
    let mut halt = None;
    let mut weights_per_round = Vec::new();

    let mut train_board = ScoreBoard::new(m, c);
    let mut test_board = prepared_test.as_ref().map(|p| ScoreBoard::new(p.len(), c));
    let mut d = WeightDistribution::uniform(m)?;
    let uniform = WeightDistribution::uniform(m)?;
    let mut logit_state = LogitState::new(m, c);

    for t in 1..=config.rounds {
        let round_seed = mix_seed(config.seed, t as u64);
        let warm = match (config.reset_mode, t) {
            (ResetMode::NoReset, t) if t > 1 => ensemble.members.first().map(|m| &m.classifier),
            _ => None,
        };

        if config.algorithm == Algorithm::LogitBoost {
            weights_per_round.push(uniform.weights().to_vec());
            let (member, clamp) =
                logitboost_round(&mut logit_state, learner, &prepared, &config.logit, round_seed)?;
            let outputs = member_probs(&member, filters, &prepared)?;
            let margins: Vec<f64> = outputs
                .iter()
                .zip(labels)
                .map(|(p, &y)| margin(p, y))
                .collect::<Result<_>>()?;
            let r_t = average_margin(&uniform, &margins);
            let weighted_error: f64 = outputs
                .iter()
                .zip(labels)
                .filter(|(p, &y)| argmax_class(p) != y)
                .map(|_| 1.0 / m as f64)
                .sum();
            ensemble.members.push(EnsembleMember {
                alpha: config.logit.shrinkage,
                clamp,
                classifier: member,
            });
            // ensemble train accuracy comes from the accumulated F
            let train_acc = logit_state
                .probs
                .iter()
                .zip(labels)
                .filter(|(p, &y)| argmax_class(p) == y)
                .count() as f64
                / m as f64;
            let test_acc = match (&prepared_test, &mut test_board) {
                (Some(pt), Some(board)) => {
                    let member = &ensemble.members[t - 1];
                    let mut outputs = Vec::with_capacity(pt.len());
                    for i in 0..pt.len() {
                        let mut raw = member.classifier.predict_raw(filters, pt.sample(i))?;
                        if let Some(bound) = member.clamp {
                            for v in &mut raw {
                                *v = v.min(bound);
                            }
                        }
                        outputs.push(raw);
                    }
                    board.add_probs(member.alpha, &outputs);
                    board.accuracy(&pt.labels)
                }
                _ => f64::NAN,
            };
            records.push(RoundRecord {
                round: t,
                r_t,
                alpha: config.logit.shrinkage,
                weighted_error,
                train_acc,
                test_acc,
            });
            continue;
        }

        let train_weights = match config.algorithm {
            Algorithm::Average => &uniform,
            _ => &d,
        };
        weights_per_round.push(train_weights.weights().to_vec());
        let classifier = learner.train(&prepared, train_weights, round_seed, warm)?;
        let outputs = member_probs(&classifier, filters, &prepared)?;
        let margins: Vec<f64> = outputs
            .iter()
            .zip(labels)
            .map(|(p, &y)| margin(p, y))
            .collect::<Result<_>>()?;
        let r_t = average_margin(train_weights, &margins);
        let weighted_error: f64 = train_weights
            .weights()
            .iter()
            .zip(outputs.iter().zip(labels))
            .map(|(w, (p, &y))| if argmax_class(p) != y { *w } else { 0.0 })
            .sum();

        let member_alpha = match config.algorithm {
            Algorithm::AdaBoost => match alpha(config.alpha_rule, r_t, c) {
                Ok(a) => {
                    d = super::update_weights(&d, a, &margins)?;
                    a
                }
                Err(Error::AlphaDomain { .. }) => {
                    halt = Some(HaltReason::AlphaDomain { round: t, r: r_t });
                    break;
                }
                Err(other) => return Err(other),
            },
            Algorithm::Samme => {
                let predictions: Vec<usize> = outputs.iter().map(|p| argmax_class(p)).collect();
                match samme_round(&d, &predictions, labels, c)? {
                    SammeRound::Halt { error } => {
                        halt = Some(HaltReason::SammeChance { round: t, error });
                        break;
                    }
                    SammeRound::Continue { alpha, updated, .. } => {
                        d = updated;
                        alpha
                    }
                }
            }
            Algorithm::Average => 1.0,
            Algorithm::LogitBoost => unreachable!("handled above"),
        };

        match config.algorithm {
            Algorithm::Samme => train_board.add_votes(member_alpha, &outputs),
            _ => train_board.add_probs(member_alpha, &outputs),
        }
        let test_acc = match (&prepared_test, &mut test_board) {
            (Some(pt), Some(board)) => {
                let outputs = member_probs(&classifier, filters, pt)?;
                match config.algorithm {
                    Algorithm::Samme => board.add_votes(member_alpha, &outputs),
                    _ => board.add_probs(member_alpha, &outputs),
                }
                board.accuracy(&pt.labels)
            }
            _ => f64::NAN,
        };
        ensemble.members.push(EnsembleMember {
            alpha: member_alpha,
            clamp: None,
            classifier,
        });
        records.push(RoundRecord {
            round: t,
            r_t,
            alpha: member_alpha,
            weighted_error,
            train_acc: train_board.accuracy(labels),
            test_acc,
        });
    }

    if config.algorithm == Algorithm::Average {
        let t = ensemble.members.len().max(1) as f64;
        for member in &mut ensemble.members {
            member.alpha = 1.0 / t;
        }
        for record in &mut records {
            record.alpha = 1.0 / t;
        }
    }

    weights_per_round.truncate(records.len());
    Ok(BoostOutcome {
        ensemble,
        records,
        halt,
        weights_per_round,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boosting::{ConstantLearner, NetworkLearner, TreeLearner};
    use crate::data::synth_blobs;
    use crate::haar::generate_filter_bank;
    use crate::nn::{mlp2_spec, OptimizerConfig};
    use crate::tree::SplitObjective;

    fn blob_tree_learner(image: usize) -> TreeLearner {
        let bank = generate_filter_bank((image, image), 1, 1, 60, 7).unwrap();
        TreeLearner::new(&bank, 4, SplitObjective::WeightedMass)
    }

    #[test]
    fn singleton_boost_equals_plain_training() {
        let data = synth_blobs(3, 30, (4, 4, 1), 3.0, 17).unwrap();
        let learner = blob_tree_learner(4);
        let config = BoostConfig::adaboost(1, 99);
        let outcome = boost(&learner, &data, None, &config).unwrap();
        assert_eq!(outcome.ensemble.rounds(), 1);

        let prepared = PreparedData::new(&data, false, true);
        let plain = train_single(&learner, &prepared, 99).unwrap();
        match (&outcome.ensemble.members[0].classifier, &plain) {
            (WeakClassifier::Tree(a), WeakClassifier::Tree(b)) => assert_eq!(a, b),
            other => panic!("expected tree classifiers, got {other:?}"),
        }
    }

    #[test]
    fn boosting_trees_improves_separable_training_accuracy() {
        let data = synth_blobs(3, 40, (4, 4, 1), 3.0, 23).unwrap();
        let learner = blob_tree_learner(4);
        let config = BoostConfig::adaboost(10, 5);
        let outcome = boost(&learner, &data, None, &config).unwrap();
        assert!(outcome.halt.is_none());
        let first = outcome.records.first().unwrap();
        let last = outcome.records.last().unwrap();
        assert!(
            last.train_acc >= first.train_acc,
            "final {} < round-1 {}",
            last.train_acc,
            first.train_acc
        );
        // weights remain a distribution all the way through; r_t in range
        for r in &outcome.records {
            assert!(r.r_t >= -1.0 - 1e-12 && r.r_t <= 1.0 + 1e-12);
        }
    }

    #[test]
    fn samme_halts_on_at_chance_learner() {
        let data = synth_blobs(10, 10, (3, 3, 1), 1.0, 3).unwrap();
        let learner = ConstantLearner::uniform(10);
        let mut config = BoostConfig::adaboost(5, 1);
        config.algorithm = Algorithm::Samme;
        let outcome = boost(&learner, &data, None, &config).unwrap();
        match outcome.halt {
            Some(HaltReason::SammeChance { round, error }) => {
                assert_eq!(round, 1);
                assert!((error - 0.9).abs() < 1e-9);
            }
            other => panic!("expected a SAMME chance halt, got {other:?}"),
        }
        assert!(outcome.ensemble.members.is_empty());
    }

    #[test]
    fn averaging_sets_equal_alphas() {
        let data = synth_blobs(2, 20, (3, 3, 1), 4.0, 9).unwrap();
        let spec = mlp2_spec([4, 4], (3, 3, 1), 2, true).unwrap();
        let learner = NetworkLearner::new(spec, OptimizerConfig::sgd(0.1, 8, 8, 0));
        let outcome = average_ensemble(&learner, &data, Some(&data), 3, 4).unwrap();
        assert_eq!(outcome.ensemble.rounds(), 3);
        for member in &outcome.ensemble.members {
            assert!((member.alpha - 1.0 / 3.0).abs() < 1e-12);
        }
        // members trained from different seeds differ
        match (
            &outcome.ensemble.members[0].classifier,
            &outcome.ensemble.members[1].classifier,
        ) {
            (WeakClassifier::Network(_, a), WeakClassifier::Network(_, b)) => assert_ne!(a, b),
            other => panic!("expected networks, got {other:?}"),
        }
    }

    #[test]
    fn boost_is_deterministic_given_seed() {
        let data = synth_blobs(3, 25, (4, 4, 1), 2.0, 8).unwrap();
        let learner = blob_tree_learner(4);
        let config = BoostConfig::adaboost(4, 12);
        let a = boost(&learner, &data, None, &config).unwrap();
        let b = boost(&learner, &data, None, &config).unwrap();
        assert_eq!(a.ensemble.rounds(), b.ensemble.rounds());
        for (ra, rb) in a.records.iter().zip(&b.records) {
            assert_eq!(ra.r_t, rb.r_t);
            assert_eq!(ra.alpha, rb.alpha);
            assert_eq!(ra.train_acc, rb.train_acc);
        }
    }

    #[test]
    fn predict_ensemble_matches_hand_combination() {
        // two constant classifiers averaging to [0.4, 0.6]
        let members = vec![
            EnsembleMember {
                alpha: 0.5,
                clamp: None,
                classifier: WeakClassifier::Constant(vec![0.6, 0.4]),
            },
            EnsembleMember {
                alpha: 0.5,
                clamp: None,
                classifier: WeakClassifier::Constant(vec![0.2, 0.8]),
            },
        ];
        let ensemble = Ensemble {
            algorithm: Algorithm::Average,
            alpha_rule: AlphaRule::Sigmoid,
            reset_mode: ResetMode::Reset,
            num_classes: 2,
            members,
            filters: None,
        };
        let sample = crate::boosting::learner::SampleView {
            tensor: None,
            integral: None,
        };
        let (label, score) = ensemble.predict(sample).unwrap();
        assert_eq!(label, 1);
        assert!((score[0] - 0.4).abs() < 1e-12);
        assert!((score[1] - 0.6).abs() < 1e-12);
    }

    #[test]
    fn alpha_scaling_leaves_argmax_unchanged() {
        let data = synth_blobs(3, 20, (4, 4, 1), 2.5, 2).unwrap();
        let learner = blob_tree_learner(4);
        let config = BoostConfig::adaboost(3, 3);
        let outcome = boost(&learner, &data, None, &config).unwrap();
        let prepared = PreparedData::new(&data, false, true);
        let mut scaled = outcome.ensemble.clone();
        for member in &mut scaled.members {
            member.alpha *= 37.5;
        }
        for i in 0..prepared.len() {
            let (a, _) = outcome.ensemble.predict(prepared.sample(i)).unwrap();
            let (b, _) = scaled.predict(prepared.sample(i)).unwrap();
            assert_eq!(a, b);
        }
    }
}

//! LogitBoost adapted to network base learners.
//!
//! The standard multi-class working responses z = (y* - p) / (p (1 - p))
//! with weights p (1 - p) are fit by a network instead of a regression
//! tree: with weighted mean squared error for C <= 10, and with soft-label
//! KL targets for larger class counts (where the MSE fit fails to
//! converge). Member outputs of rounds past the first are clamped from
//! above before accumulation into the additive scores F.

use crate::error::{Error, Result};
use crate::nn::{softmax, Loss, LossTargets};

use super::learner::{PreparedData, WeakClassifier, WeakLearner};

/// Probability floor in the working-response denominator.
pub const PROB_FLOOR: f64 = 1e-7;

/// Soft-label construction for the KL variant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SoftLabelMode {
    /// softmax(z / temperature) of the working-response vector.
    ResponseSoftmax { temperature: f64 },
}

impl Default for SoftLabelMode {
    fn default() -> Self {
        SoftLabelMode::ResponseSoftmax { temperature: 1.0 }
    }
}

#[derive(Debug, Clone)]
pub struct LogitBoostConfig {
    /// Multiplier on each member's contribution to F.
    pub shrinkage: f64,
    /// Upper clamp on member outputs for rounds > 1.
    pub clamp: f64,
    /// Class count above which the soft-label KL fit replaces weighted MSE.
    pub mse_class_limit: usize,
    pub soft_labels: SoftLabelMode,
}

impl Default for LogitBoostConfig {
    fn default() -> Self {
        LogitBoostConfig {
            shrinkage: 1.0,
            clamp: 3.0,
            mse_class_limit: 10,
            soft_labels: SoftLabelMode::default(),
        }
    }
}

/// Additive-score state: per-example, per-class F and its softmax.
#[derive(Debug, Clone)]
pub struct LogitState {
    pub f: Vec<Vec<f64>>,
    pub probs: Vec<Vec<f64>>,
    pub rounds: usize,
}

impl LogitState {
    /// Round-1 state: F = 0, probabilities uniform.
    pub fn new(num_examples: usize, num_classes: usize) -> Self {
        LogitState {
            f: vec![vec![0.0; num_classes]; num_examples],
            probs: vec![vec![1.0 / num_classes as f64; num_classes]; num_examples],
            rounds: 0,
        }
    }

    /// Mean negative log-likelihood of the labels under softmax(F).
    pub fn log_loss(&self, labels: &[usize]) -> f64 {
        let mut total = 0.0;
        for (p, &y) in self.probs.iter().zip(labels) {
            total -= p[y].max(1e-300).ln();
        }
        total / labels.len() as f64
    }
}

/// Clamp applied to raw member outputs from round 2 on.
pub fn clamp_output(raw: &[f64], bound: f64) -> Vec<f64> {
    raw.iter().map(|v| v.min(bound)).collect()
}

/// Runs one LogitBoost round: builds working responses from the current
/// probabilities, fits the network, and folds its (clamped) outputs into F.
/// Returns the fitted member and the clamp recorded for it.
pub fn logitboost_round(
    state: &mut LogitState,
    learner: &dyn WeakLearner,
    data: &PreparedData,
    config: &LogitBoostConfig,
    seed: u64,
) -> Result<(WeakClassifier, Option<f64>)> {
    let m = data.len();
    let c = data.num_classes;
    if state.f.len() != m {
        return Err(Error::ShapeMismatch {
            context: "logitboost state".into(),
            expected: format!("{m}"),
            actual: format!("{}", state.f.len()),
        });
    }

    // working responses and their weights
    let mut responses = Vec::with_capacity(m);
    let mut weights = Vec::with_capacity(m);
    for (i, p_row) in state.probs.iter().enumerate() {
        let mut z = Vec::with_capacity(c);
        let mut w = Vec::with_capacity(c);
        for (j, &p) in p_row.iter().enumerate() {
            let p = p.clamp(PROB_FLOOR, 1.0 - PROB_FLOOR);
            let y = if data.labels[i] == j { 1.0 } else { 0.0 };
            let denom = p * (1.0 - p);
            let zij = (y - p) / denom;
            if !zij.is_finite() {
                return Err(Error::InvalidArgument(format!(
                    "non-finite working response at example {i}, class {j}"
                )));
            }
            z.push(zij);
            w.push(denom);
        }
        responses.push(z);
        weights.push(w);
    }

    let member = if c <= config.mse_class_limit {
        learner.fit_targets(
            data,
            LossTargets::WeightedVectors(responses, weights),
            Loss::MeanSquaredError,
            seed,
        )?
    } else {
        let SoftLabelMode::ResponseSoftmax { temperature } = config.soft_labels;
        let soft: Vec<Vec<f64>> = responses
            .iter()
            .map(|z| {
                let scaled: Vec<f64> = z.iter().map(|v| v / temperature).collect();
                softmax(&scaled)
            })
            .collect::<Result<_>>()?;
        learner.fit_targets(data, LossTargets::Vectors(soft), Loss::SoftLabelKL, seed)?
    };

    // accumulate member output into F; rounds past the first are clamped
    let clamp = if state.rounds >= 1 { Some(config.clamp) } else { None };
    let filters: &[crate::haar::HaarFilter] = &[];
    for i in 0..m {
        let raw = member.predict_raw(filters, data.sample(i))?;
        let contribution = match clamp {
            Some(bound) => clamp_output(&raw, bound),
            None => raw,
        };
        for (fj, v) in state.f[i].iter_mut().zip(&contribution) {
            *fj += config.shrinkage * v;
        }
        state.probs[i] = softmax(&state.f[i])?;
    }
    state.rounds += 1;
    Ok((member, clamp))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boosting::NetworkLearner;
    use crate::data::synth_blobs;
    use crate::nn::{mlp2_spec, OptimizerConfig};

    #[test]
    fn initial_state_is_zero_f_uniform_p() {
        let state = LogitState::new(4, 3);
        assert!(state.f.iter().all(|row| row.iter().all(|&v| v == 0.0)));
        for row in &state.probs {
            for &p in row {
                assert!((p - 1.0 / 3.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn clamp_definition() {
        assert_eq!(clamp_output(&[5.2, -1.0, 3.0], 3.0), vec![3.0, -1.0, 3.0]);
    }

    #[test]
    fn two_rounds_decrease_train_log_loss_on_separable_blobs() {
        let data = synth_blobs(3, 25, (3, 3, 1), 6.0, 31).unwrap();
        let prepared = PreparedData::new(&data, true, false);
        let spec = mlp2_spec([8, 8], (3, 3, 1), 3, true).unwrap();
        let learner = NetworkLearner::new(spec, OptimizerConfig::sgd(0.05, 30, 16, 0));
        let mut state = LogitState::new(prepared.len(), 3);
        let config = LogitBoostConfig::default();
        let loss0 = state.log_loss(&prepared.labels);
        logitboost_round(&mut state, &learner, &prepared, &config, 11).unwrap();
        let loss1 = state.log_loss(&prepared.labels);
        logitboost_round(&mut state, &learner, &prepared, &config, 12).unwrap();
        let loss2 = state.log_loss(&prepared.labels);
        assert!(loss1 < loss0, "round 1 did not reduce log loss: {loss0} -> {loss1}");
        assert!(loss2 < loss1, "round 2 did not reduce log loss: {loss1} -> {loss2}");
    }
}

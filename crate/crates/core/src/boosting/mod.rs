//! Multi-class boosting: the margin/weight-update arithmetic, the alpha
//! rules, and the round driver generic over weak-learner family (trees or
//! networks), plus SAMME, a LogitBoost adaptation, and uniform averaging.

mod driver;
mod learner;
mod logitboost;
mod samme;
mod serialize;

pub use driver::{average_ensemble, boost, train_single, BoostConfig, BoostOutcome};
pub use learner::{
    ConstantLearner, NetworkLearner, PreparedData, TreeLearner, WeakClassifier, WeakLearner,
};
pub use logitboost::{logitboost_round, LogitBoostConfig, LogitState, SoftLabelMode};
pub use samme::{samme_round, SammeRound, SAMME_ALPHA_CAP_SCALE};
pub use serialize::{load_ensemble, save_ensemble};

use crate::error::{Error, Result};
use crate::haar::FilterBank;

/// Per-example boosting distribution D_t.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightDistribution {
    weights: Vec<f64>,
}

impl WeightDistribution {
    /// Wraps a weight vector, validating it is a distribution
    /// (entries >= 0, sum within 1e-9 of 1).
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::EmptyDataset);
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::InvalidArgument(
                "distribution entries must be finite and >= 0".into(),
            ));
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidArgument(format!(
                "distribution sums to {sum}, not 1"
            )));
        }
        Ok(WeightDistribution { weights })
    }

    /// D_1: 1/m everywhere.
    pub fn uniform(m: usize) -> Result<Self> {
        if m == 0 {
            return Err(Error::EmptyDataset);
        }
        Ok(WeightDistribution {
            weights: vec![1.0 / m as f64; m],
        })
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

/// Margin of a prediction: probability of the correct class minus the
/// average probability of the others. Lies in [-1/(C-1), 1].
pub fn margin(probs: &[f64], label: usize) -> Result<f64> {
    let c = probs.len();
    if c < 2 {
        return Err(Error::InvalidArgument(format!(
            "margin needs at least 2 classes, got {c}"
        )));
    }
    if label >= c {
        return Err(Error::InvalidArgument(format!(
            "label {label} out of range for {c} classes"
        )));
    }
    let p = probs[label];
    Ok(p - (1.0 - p) / (c as f64 - 1.0))
}

/// How the weak-classifier coefficient alpha_t is computed from r_t.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AlphaRule {
    /// alpha = 1 / (1 + e^{-r}); defined for all r.
    Sigmoid,
    /// alpha = 0.5 * ln((1 + r) / (1 - r)); needs r in (-1, 1).
    SchapireSinger,
    /// alpha = ln((K - 1) * r / (1 - r)); needs r in (0, 1).
    SammeRule,
}

impl AlphaRule {
    pub fn name(&self) -> &'static str {
        match self {
            AlphaRule::Sigmoid => "sigmoid",
            AlphaRule::SchapireSinger => "schapire-singer",
            AlphaRule::SammeRule => "samme",
        }
    }
}

/// alpha_t for the given rule. Out-of-domain r_t is an error so the boosting
/// driver can halt the run and record why.
pub fn alpha(rule: AlphaRule, r: f64, num_classes: usize) -> Result<f64> {
    let fail = || Error::AlphaDomain {
        rule: rule.name().to_string(),
        r,
    };
    if !r.is_finite() {
        return Err(fail());
    }
    match rule {
        AlphaRule::Sigmoid => Ok(1.0 / (1.0 + (-r).exp())),
        AlphaRule::SchapireSinger => {
            if r <= -1.0 || r >= 1.0 {
                return Err(fail());
            }
            Ok(0.5 * ((1.0 + r) / (1.0 - r)).ln())
        }
        AlphaRule::SammeRule => {
            if r <= 0.0 || r >= 1.0 {
                return Err(fail());
            }
            Ok(((num_classes as f64 - 1.0) * r / (1.0 - r)).ln())
        }
    }
}

/// Algorithm-1 weight update: D'(i) = D(i) e^{-alpha m_i} / Z.
pub fn update_weights(d: &WeightDistribution, alpha: f64, margins: &[f64]) -> Result<WeightDistribution> {
    if margins.len() != d.len() {
        return Err(Error::ShapeMismatch {
            context: "margins".into(),
            expected: format!("{}", d.len()),
            actual: format!("{}", margins.len()),
        });
    }
    if !alpha.is_finite() {
        return Err(Error::InvalidArgument("alpha must be finite".into()));
    }
    let mut updated: Vec<f64> = d
        .weights
        .iter()
        .zip(margins)
        .map(|(w, m)| w * (-alpha * m).exp())
        .collect();
    let z: f64 = updated.iter().sum();
    if !(z > 0.0) || !z.is_finite() {
        return Err(Error::WeightUnderflow);
    }
    for w in &mut updated {
        *w /= z;
    }
    // renormalize away residual rounding so downstream validation holds
    WeightDistribution::new(updated)
}

/// Weighted average margin r_t = sum_i D(i) m_i.
pub fn average_margin(d: &WeightDistribution, margins: &[f64]) -> f64 {
    d.weights.iter().zip(margins).map(|(w, m)| w * m).sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Algorithm {
    AdaBoost,
    Samme,
    LogitBoost,
    Average,
}

impl Algorithm {
    pub fn name(&self) -> &'static str {
        match self {
            Algorithm::AdaBoost => "adaboost",
            Algorithm::Samme => "samme",
            Algorithm::LogitBoost => "logitboost",
            Algorithm::Average => "average",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ResetMode {
    /// Fresh initialization every round.
    Reset,
    /// Rounds past the first warm-start from the first round's weights.
    NoReset,
}

impl ResetMode {
    pub fn name(&self) -> &'static str {
        match self {
            ResetMode::Reset => "reset",
            ResetMode::NoReset => "no-reset",
        }
    }
}

/// Why a run stopped before its requested round count.
#[derive(Debug, Clone, PartialEq)]
pub enum HaltReason {
    /// r_t fell outside the alpha rule's domain.
    AlphaDomain { round: usize, r: f64 },
    /// SAMME weighted error reached chance level (epsilon >= 1 - 1/K).
    SammeChance { round: usize, error: f64 },
}

impl std::fmt::Display for HaltReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            HaltReason::AlphaDomain { round, r } => {
                write!(f, "round {round}: r_t = {r} outside the alpha rule domain")
            }
            HaltReason::SammeChance { round, error } => {
                write!(f, "round {round}: weighted error {error} not better than chance")
            }
        }
    }
}

/// One row of the per-round metrics log.
#[derive(Debug, Clone)]
pub struct RoundRecord {
    pub round: usize,
    pub r_t: f64,
    pub alpha: f64,
    pub weighted_error: f64,
    pub train_acc: f64,
    pub test_acc: f64,
}

/// An alpha-weighted list of weak classifiers plus the metadata that
/// produced it.
#[derive(Debug, Clone)]
pub struct Ensemble {
    pub algorithm: Algorithm,
    pub alpha_rule: AlphaRule,
    pub reset_mode: ResetMode,
    pub num_classes: usize,
    pub members: Vec<EnsembleMember>,
    /// Channel-expanded filter list backing tree members.
    pub filters: Option<FilterBank>,
}

#[derive(Debug, Clone)]
pub struct EnsembleMember {
    pub alpha: f64,
    /// LogitBoost upper clamp applied to raw outputs at prediction time.
    pub clamp: Option<f64>,
    pub classifier: WeakClassifier,
}

impl Ensemble {
    pub fn rounds(&self) -> usize {
        self.members.len()
    }

    /// Combined score vector and argmax label (lowest index wins ties).
    ///
    /// AdaBoost and averaging combine probability outputs; SAMME combines
    /// hard votes; LogitBoost sums (clamped) raw outputs.
    pub fn predict(&self, sample: learner::SampleView) -> Result<(usize, Vec<f64>)> {
        if self.members.is_empty() {
            return Err(Error::InvalidArgument("empty ensemble".into()));
        }
        let mut score = vec![0.0; self.num_classes];
        let filters = self.filters.as_ref().map(|b| b.filters.as_slice()).unwrap_or(&[]);
        for member in &self.members {
            match self.algorithm {
                Algorithm::AdaBoost | Algorithm::Average => {
                    let probs = member.classifier.predict(filters, sample)?;
                    for (s, p) in score.iter_mut().zip(&probs) {
                        *s += member.alpha * p;
                    }
                }
                Algorithm::Samme => {
                    let probs = member.classifier.predict(filters, sample)?;
                    score[crate::nn::argmax_class(&probs)] += member.alpha;
                }
                Algorithm::LogitBoost => {
                    let mut raw = member.classifier.predict_raw(filters, sample)?;
                    if let Some(clamp) = member.clamp {
                        for v in &mut raw {
                            *v = v.min(clamp);
                        }
                    }
                    for (s, v) in score.iter_mut().zip(&raw) {
                        *s += member.alpha * v;
                    }
                }
            }
        }
        Ok((crate::nn::argmax_class(&score), score))
    }

    /// Fraction of a prepared dataset classified correctly.
    pub fn accuracy(&self, prepared: &PreparedData) -> Result<f64> {
        let mut correct = 0usize;
        for i in 0..prepared.len() {
            let (label, _) = self.predict(prepared.sample(i))?;
            if label == prepared.labels[i] {
                correct += 1;
            }
        }
        Ok(correct as f64 / prepared.len() as f64)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn margin_examples() {
        let mut perfect = vec![0.0; 10];
        perfect[4] = 1.0;
        assert_eq!(margin(&perfect, 4).unwrap(), 1.0);
        assert!(margin(&vec![0.1; 10], 3).unwrap().abs() < 1e-12);
        let mut worst = vec![1.0 / 9.0; 10];
        worst[2] = 0.0;
        assert!((margin(&worst, 2).unwrap() + 1.0 / 9.0).abs() < 1e-12);
        assert!(margin(&[1.0], 0).is_err());
    }

    #[test]
    fn alpha_rule_examples() {
        assert!((alpha(AlphaRule::Sigmoid, 0.0, 10).unwrap() - 0.5).abs() < 1e-12);
        assert!(alpha(AlphaRule::SchapireSinger, 0.0, 10).unwrap().abs() < 1e-12);
        let a = alpha(AlphaRule::SammeRule, 0.5, 10).unwrap();
        assert!((a - 9f64.ln()).abs() < 1e-12, "got {a}");
    }

    #[test]
    fn alpha_rules_reject_out_of_domain() {
        assert!(matches!(
            alpha(AlphaRule::SchapireSinger, 1.0, 10),
            Err(Error::AlphaDomain { .. })
        ));
        assert!(alpha(AlphaRule::SchapireSinger, -1.0, 10).is_err());
        assert!(alpha(AlphaRule::SammeRule, 0.0, 10).is_err());
        assert!(alpha(AlphaRule::SammeRule, -0.2, 10).is_err());
        assert!(alpha(AlphaRule::Sigmoid, f64::NAN, 10).is_err());
    }

    #[test]
    fn update_weights_examples() {
        let d = WeightDistribution::new(vec![0.5, 0.5]).unwrap();
        // equal margins leave D unchanged
        let same = update_weights(&d, 0.7, &[0.3, 0.3]).unwrap();
        for (a, b) in same.weights().iter().zip(d.weights()) {
            assert!((a - b).abs() < 1e-12);
        }
        // alpha = 0 leaves D unchanged
        let same = update_weights(&d, 0.0, &[0.9, -0.2]).unwrap();
        for (a, b) in same.weights().iter().zip(d.weights()) {
            assert!((a - b).abs() < 1e-12);
        }
        // closed form: [e^-1, 1] / (e^-1 + 1)
        let updated = update_weights(&d, 1.0, &[1.0, 0.0]).unwrap();
        let e1 = (-1.0f64).exp();
        assert!((updated.weights()[0] - e1 / (e1 + 1.0)).abs() < 1e-12);
        assert!((updated.weights()[1] - 1.0 / (e1 + 1.0)).abs() < 1e-12);
    }

    #[test]
    fn update_weights_monotonicity() {
        // larger margin shrinks weight relatively more
        let d = WeightDistribution::new(vec![0.25; 4]).unwrap();
        let margins = [0.9, 0.5, 0.1, -0.3];
        let updated = update_weights(&d, 0.8, &margins).unwrap();
        for i in 0..3 {
            let ratio_i = updated.weights()[i] / d.weights()[i];
            let ratio_j = updated.weights()[i + 1] / d.weights()[i + 1];
            assert!(ratio_i < ratio_j);
        }
    }

    #[test]
    fn update_weights_detects_underflow() {
        let d = WeightDistribution::new(vec![0.5, 0.5]).unwrap();
        assert!(matches!(
            update_weights(&d, 1e6, &[1.0, 1.0]),
            Err(Error::WeightUnderflow)
        ));
    }

    #[test]
    fn distribution_validation() {
        assert!(WeightDistribution::new(vec![0.5, 0.6]).is_err());
        assert!(WeightDistribution::new(vec![-0.1, 1.1]).is_err());
        assert!(WeightDistribution::new(vec![]).is_err());
        let u = WeightDistribution::uniform(4).unwrap();
        assert_eq!(u.weights(), &[0.25; 4]);
    }
}

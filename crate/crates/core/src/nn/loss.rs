//! Losses used by the training loop. Each returns the scalar loss and its
//! gradient with respect to the logits.

use crate::error::{Error, Result};

use super::forward::softmax;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Loss {
    /// Cross-entropy over softmax with a hard label.
    CrossEntropy,
    /// Mean squared error against a target vector, optionally with
    /// per-coordinate weights (used by the LogitBoost regression fit).
    MeanSquaredError,
    /// KL divergence from a soft-label distribution to softmax(logits).
    SoftLabelKL,
}

/// Per-example training target.
#[derive(Debug, Clone)]
pub enum LossTargets {
    Labels(Vec<usize>),
    Vectors(Vec<Vec<f64>>),
    /// Target vectors with matching per-coordinate weights.
    WeightedVectors(Vec<Vec<f64>>, Vec<Vec<f64>>),
}

impl LossTargets {
    pub fn len(&self) -> usize {
        match self {
            LossTargets::Labels(v) => v.len(),
            LossTargets::Vectors(v) => v.len(),
            LossTargets::WeightedVectors(v, _) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Loss value and d(loss)/d(logits) for one example.
pub fn loss_and_grad(loss: Loss, logits: &[f64], targets: &LossTargets, example: usize) -> Result<(f64, Vec<f64>)> {
    let c = logits.len();
    match (loss, targets) {
        (Loss::CrossEntropy, LossTargets::Labels(labels)) => {
            let y = labels[example];
            if y >= c {
                return Err(Error::InvalidArgument(format!("label {y} out of range for {c} classes")));
            }
            let p = softmax(logits)?;
            let value = -p[y].max(1e-300).ln();
            let mut grad = p;
            grad[y] -= 1.0;
            Ok((value, grad))
        }
        (Loss::MeanSquaredError, LossTargets::Vectors(t)) => {
            mse(logits, &t[example], None)
        }
        (Loss::MeanSquaredError, LossTargets::WeightedVectors(t, w)) => {
            mse(logits, &t[example], Some(&w[example]))
        }
        (Loss::SoftLabelKL, LossTargets::Vectors(t)) => {
            let q = &t[example];
            if q.len() != c {
                return Err(Error::ShapeMismatch {
                    context: "soft label".into(),
                    expected: format!("{c}"),
                    actual: format!("{}", q.len()),
                });
            }
            let p = softmax(logits)?;
            // KL(q || p) = sum q (ln q - ln p); gradient wrt logits is p - q.
            let mut value = 0.0;
            for (qi, pi) in q.iter().zip(&p) {
                if *qi > 0.0 {
                    value += qi * (qi.ln() - pi.max(1e-300).ln());
                }
            }
            let grad = p.iter().zip(q).map(|(pi, qi)| pi - qi).collect();
            Ok((value, grad))
        }
        _ => Err(Error::InvalidArgument(
            "loss/target combination not supported".into(),
        )),
    }
}

fn mse(logits: &[f64], target: &[f64], weights: Option<&[f64]>) -> Result<(f64, Vec<f64>)> {
    let c = logits.len();
    if target.len() != c {
        return Err(Error::ShapeMismatch {
            context: "mse target".into(),
            expected: format!("{c}"),
            actual: format!("{}", target.len()),
        });
    }
    let mut value = 0.0;
    let mut grad = vec![0.0; c];
    for i in 0..c {
        let w = weights.map_or(1.0, |w| w[i]);
        let d = logits[i] - target[i];
        value += w * d * d;
        grad[i] = 2.0 * w * d;
    }
    let scale = 1.0 / c as f64;
    for g in &mut grad {
        *g *= scale;
    }
    Ok((value * scale, grad))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cross_entropy_gradient_is_p_minus_onehot() {
        let logits = [0.3, -0.2, 1.4];
        let (v, g) = loss_and_grad(Loss::CrossEntropy, &logits, &LossTargets::Labels(vec![2]), 0).unwrap();
        let p = softmax(&logits).unwrap();
        assert!((v + p[2].ln()).abs() < 1e-12);
        assert!((g[0] - p[0]).abs() < 1e-12);
        assert!((g[2] - (p[2] - 1.0)).abs() < 1e-12);
    }

    #[test]
    fn mse_on_exact_target_is_zero() {
        let t = vec![vec![0.1, 0.2]];
        let (v, g) = loss_and_grad(Loss::MeanSquaredError, &[0.1, 0.2], &LossTargets::Vectors(t), 0).unwrap();
        assert_eq!(v, 0.0);
        assert!(g.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn kl_of_identical_distribution_is_zero() {
        let logits = [0.0, 1.0, -0.5];
        let q = softmax(&logits).unwrap();
        let (v, g) = loss_and_grad(Loss::SoftLabelKL, &logits, &LossTargets::Vectors(vec![q]), 0).unwrap();
        assert!(v.abs() < 1e-12);
        assert!(g.iter().all(|&x| x.abs() < 1e-12));
    }
}

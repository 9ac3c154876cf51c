//! One SAMME round: hard-vote weighted error, its alpha, and the
//! multiplicative weight update.

use crate::error::{Error, Result};

use super::WeightDistribution;

/// alpha is capped at `ln(SAMME_ALPHA_CAP_SCALE) + ln(K - 1)` when the
/// weighted error is exactly zero (the formula diverges there).
pub const SAMME_ALPHA_CAP_SCALE: f64 = 1e10;

#[derive(Debug, Clone)]
pub enum SammeRound {
    /// Weak classifier no better than chance: epsilon >= 1 - 1/K.
    Halt { error: f64 },
    Continue {
        error: f64,
        alpha: f64,
        /// True when the zero-error alpha cap was applied.
        capped: bool,
        updated: WeightDistribution,
    },
}

/// Runs one SAMME round from hard predictions.
///
/// epsilon = sum_i D(i) [pred_i != y_i]; halts when epsilon >= 1 - 1/K;
/// otherwise alpha = ln((1 - eps)/eps) + ln(K - 1) and
/// D(i) <- D(i) exp(alpha [pred_i != y_i]) / Z.
pub fn samme_round(
    d: &WeightDistribution,
    predictions: &[usize],
    labels: &[usize],
    num_classes: usize,
) -> Result<SammeRound> {
    if predictions.len() != d.len() || labels.len() != d.len() {
        return Err(Error::ShapeMismatch {
            context: "samme round".into(),
            expected: format!("{} predictions and labels", d.len()),
            actual: format!("{} predictions, {} labels", predictions.len(), labels.len()),
        });
    }
    if num_classes < 2 {
        return Err(Error::InvalidArgument("SAMME needs at least 2 classes".into()));
    }
    let k = num_classes as f64;
    let error: f64 = d
        .weights()
        .iter()
        .zip(predictions.iter().zip(labels))
        .map(|(w, (p, y))| if p != y { *w } else { 0.0 })
        .sum();
    // 1e-12 slack so float-summed errors sitting on the boundary still halt
    if error >= 1.0 - 1.0 / k - 1e-12 {
        return Ok(SammeRound::Halt { error });
    }
    let (alpha, capped) = if error <= 0.0 {
        (SAMME_ALPHA_CAP_SCALE.ln() + (k - 1.0).ln(), true)
    } else {
        (((1.0 - error) / error).ln() + (k - 1.0).ln(), false)
    };
    let mut weights: Vec<f64> = d
        .weights()
        .iter()
        .zip(predictions.iter().zip(labels))
        .map(|(w, (p, y))| if p != y { w * alpha.exp() } else { *w })
        .collect();
    let z: f64 = weights.iter().sum();
    if !(z > 0.0) || !z.is_finite() {
        return Err(Error::WeightUnderflow);
    }
    for w in &mut weights {
        *w /= z;
    }
    Ok(SammeRound::Continue {
        error,
        alpha,
        capped,
        updated: WeightDistribution::new(weights)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn halts_exactly_at_chance_boundary() {
        // K = 10, 10 examples, 9 wrong: epsilon = 0.9 = 1 - 1/K exactly
        let d = WeightDistribution::uniform(10).unwrap();
        let labels: Vec<usize> = (0..10).collect();
        let mut predictions = labels.clone();
        for p in predictions.iter_mut().take(9) {
            *p = (*p + 1) % 10;
        }
        match samme_round(&d, &predictions, &labels, 10).unwrap() {
            SammeRound::Halt { error } => assert!((error - 0.9).abs() < 1e-12),
            other => panic!("expected halt, got {other:?}"),
        }
    }

    #[test]
    fn zero_error_caps_alpha_and_keeps_d() {
        let d = WeightDistribution::uniform(5).unwrap();
        let labels = vec![0, 1, 2, 3, 4];
        match samme_round(&d, &labels, &labels, 10).unwrap() {
            SammeRound::Continue { alpha, capped, updated, .. } => {
                assert!(capped);
                assert!((alpha - (1e10f64.ln() + 9f64.ln())).abs() < 1e-9);
                for (a, b) in updated.weights().iter().zip(d.weights()) {
                    assert!((a - b).abs() < 1e-12);
                }
            }
            other => panic!("expected continue, got {other:?}"),
        }
    }

    #[test]
    fn closed_form_alpha() {
        // epsilon = 0.3, K = 10: alpha = ln(7/3) + ln 9
        let weights = vec![0.3, 0.7];
        let d = WeightDistribution::new(weights).unwrap();
        let labels = vec![0, 1];
        let predictions = vec![1, 1]; // first wrong (weight 0.3)
        match samme_round(&d, &predictions, &labels, 10).unwrap() {
            SammeRound::Continue { error, alpha, .. } => {
                assert!((error - 0.3).abs() < 1e-12);
                let want = (7.0f64 / 3.0).ln() + 9.0f64.ln();
                assert!((alpha - want).abs() < 1e-12, "alpha {alpha} vs {want}");
                assert!((alpha - 3.0445).abs() < 1e-3);
            }
            other => panic!("expected continue, got {other:?}"),
        }
    }

    #[test]
    fn misclassified_weights_grow() {
        let d = WeightDistribution::uniform(4).unwrap();
        let labels = vec![0, 0, 1, 1];
        let predictions = vec![0, 1, 1, 1]; // one mistake
        match samme_round(&d, &predictions, &labels, 3).unwrap() {
            SammeRound::Continue { updated, .. } => {
                assert!(updated.weights()[1] > updated.weights()[0]);
                let sum: f64 = updated.weights().iter().sum();
                assert!((sum - 1.0).abs() < 1e-9);
            }
            other => panic!("expected continue, got {other:?}"),
        }
    }
}

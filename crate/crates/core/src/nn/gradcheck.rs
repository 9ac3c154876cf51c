//! Central-finite-difference verification of backpropagated gradients.
//!
//! The numeric side only ever calls the forward pass, so it stays an
//! independent check on `backward`. Perturbing a parameter in layer L leaves
//! activations before L untouched; the re-evaluation restarts there.

use crate::error::Result;
use crate::tensor::Tensor;

use super::{backward, forward_from, forward_with_trace, loss_and_grad, Loss, LossTargets, NetworkParams, NetworkSpec};

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub checked: usize,
    pub max_rel_err: f64,
}

impl GradCheckReport {
    pub fn passes(&self, tol: f64) -> bool {
        self.max_rel_err <= tol
    }
}

/// Compares every analytic weight/bias gradient against central finite
/// differences with the given step. Relative error uses a small absolute
/// floor so that near-zero gradients are not judged on finite-difference
/// noise alone.
///
/// A coordinate whose difference quotient disagrees at the base step is
/// re-evaluated at step/10 and step/100: a perturbation can push a ReLU
/// input or a pooling window across its kink, in which case the quotient is
/// not a derivative estimate at all. A genuinely wrong gradient fails at
/// every step; the reported error per coordinate is the best across steps.
pub fn check_gradients(
    spec: &NetworkSpec,
    params: &NetworkParams,
    input: &Tensor,
    loss: Loss,
    targets: &LossTargets,
    step: f64,
) -> Result<GradCheckReport> {
    let trace = forward_with_trace(spec, params, input)?;
    let (_, dlogits) = loss_and_grad(loss, trace.logits(), targets, 0)?;
    let analytic = backward(spec, params, &trace, &dlogits)?;

    let parametric = spec.parametric_layers();
    let mut work = params.clone();
    let mut max_rel = 0.0f64;
    let mut checked = 0usize;

    for (pi, &layer_idx) in parametric.iter().enumerate() {
        let wlen = params.layers[pi].weights.len();
        let blen = params.layers[pi].bias.as_ref().map_or(0, Tensor::len);
        for j in 0..wlen + blen {
            let (orig, a) = if j < wlen {
                (
                    params.layers[pi].weights.data()[j],
                    analytic.layers[pi].weights.data()[j],
                )
            } else {
                (
                    params.layers[pi].bias.as_ref().unwrap().data()[j - wlen],
                    analytic.layers[pi].bias.as_ref().unwrap().data()[j - wlen],
                )
            };
            let mut rel_at = |h: f64| -> Result<f64> {
                let mut eval = |v: f64| -> Result<f64> {
                    set_param(&mut work, pi, j, wlen, v);
                    let logits = forward_from(spec, &work, &trace, layer_idx)?;
                    let (value, _) = loss_and_grad(loss, &logits, targets, 0)?;
                    Ok(value)
                };
                let plus = eval(orig + h)?;
                let minus = eval(orig - h)?;
                set_param(&mut work, pi, j, wlen, orig);
                let fd = (plus - minus) / (2.0 * h);
                Ok((a - fd).abs() / a.abs().max(fd.abs()).max(1e-6))
            };
            let mut rel = rel_at(step)?;
            if rel > 1e-4 {
                rel = rel.min(rel_at(step / 10.0)?);
            }
            if rel > 1e-4 {
                rel = rel.min(rel_at(step / 100.0)?);
            }
            if rel > max_rel {
                max_rel = rel;
            }
            checked += 1;
        }
    }
    Ok(GradCheckReport {
        checked,
        max_rel_err: max_rel,
    })
}

fn set_param(params: &mut NetworkParams, pi: usize, j: usize, wlen: usize, v: f64) {
    if j < wlen {
        params.layers[pi].weights.data_mut()[j] = v;
    } else {
        params.layers[pi].bias.as_mut().unwrap().data_mut()[j - wlen] = v;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{cnn3_spec, mlp2_spec, LayerSpec};
    use crate::rng::Rng;

    fn random_input(shape: &[usize], seed: u64) -> Tensor {
        let mut rng = Rng::new(seed);
        let mut t = Tensor::zeros(shape);
        for v in t.data_mut() {
            *v = rng.normal();
        }
        t
    }

    #[test]
    fn mlp_gradients_match_finite_differences() {
        let spec = mlp2_spec([6, 5], (3, 3, 1), 4, true).unwrap();
        let params = NetworkParams::init(&spec, 31);
        let input = random_input(&[3, 3, 1], 32);
        let report = check_gradients(
            &spec,
            &params,
            &input,
            Loss::CrossEntropy,
            &LossTargets::Labels(vec![2]),
            1e-5,
        )
        .unwrap();
        assert!(report.passes(1e-4), "max rel err {}", report.max_rel_err);
    }

    #[test]
    fn conv_pool_gap_gradients_match_finite_differences() {
        let spec = cnn3_spec([2, 3, 4], (22, 22, 2), 3, true).unwrap();
        let params = NetworkParams::init(&spec, 7);
        let input = random_input(&[22, 22, 2], 8);
        let report = check_gradients(
            &spec,
            &params,
            &input,
            Loss::CrossEntropy,
            &LossTargets::Labels(vec![1]),
            1e-5,
        )
        .unwrap();
        assert!(report.passes(1e-4), "max rel err {}", report.max_rel_err);
    }

    #[test]
    fn padded_conv_and_mse_gradients_match() {
        let layers = vec![
            LayerSpec::conv(3, 1, 3, 1, 1, true),
            LayerSpec::ReLU,
            LayerSpec::MaxPool { window: 2, stride: 2 },
            LayerSpec::Reshape,
            LayerSpec::fc(3 * 3 * 3, 2, true),
        ];
        let spec = NetworkSpec::new(layers, (6, 6, 1), 2).unwrap();
        let params = NetworkParams::init(&spec, 13);
        let input = random_input(&[6, 6, 1], 14);
        let report = check_gradients(
            &spec,
            &params,
            &input,
            Loss::MeanSquaredError,
            &LossTargets::Vectors(vec![vec![0.3, -0.8]]),
            1e-5,
        )
        .unwrap();
        assert!(report.passes(1e-4), "max rel err {}", report.max_rel_err);
    }
}

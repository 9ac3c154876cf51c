//! Seeded training loop: weighted batch sampling, gradient accumulation,
//! SGD/Adam steps with a multiplicative learning-rate schedule.

use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::tensor::Tensor;

use super::{
    adam_step, backward, forward_with_trace, loss_and_grad, sgd_step, AdamState, Loss,
    LossTargets, NetworkParams, NetworkSpec, OptimizerConfig, OptimizerKind, WeightedSampler,
};

/// How the trained parameters start out.
#[derive(Debug, Clone)]
pub enum InitMode {
    /// Fan-in-scaled uniform initialization from this seed.
    Fresh(u64),
    /// Continue from existing weights.
    WarmStart(NetworkParams),
}

#[derive(Debug, Clone, Default)]
pub struct TrainReport {
    /// Mean per-example loss of each epoch, in batch order.
    pub epoch_loss: Vec<f64>,
}

/// Trains a network. Deterministic given the sampler, config seed, and init.
///
/// One epoch draws `ceil(m / batch_size)` batches with replacement from the
/// sampler. Gradients are averaged over the batch and applied once per batch.
/// Zero epochs returns the initialization unchanged.
pub fn train_network(
    spec: &NetworkSpec,
    config: &OptimizerConfig,
    images: &[Tensor],
    targets: &LossTargets,
    sampler: &WeightedSampler,
    loss: Loss,
    init: InitMode,
) -> Result<(NetworkParams, TrainReport)> {
    config.validate()?;
    if images.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if targets.len() != images.len() {
        return Err(Error::ShapeMismatch {
            context: "training targets".into(),
            expected: format!("{}", images.len()),
            actual: format!("{}", targets.len()),
        });
    }
    if sampler.len() != images.len() {
        return Err(Error::ShapeMismatch {
            context: "sampler distribution".into(),
            expected: format!("{}", images.len()),
            actual: format!("{}", sampler.len()),
        });
    }

    let mut params = match init {
        InitMode::Fresh(seed) => NetworkParams::init(spec, seed),
        InitMode::WarmStart(p) => {
            p.matches(spec)?;
            p
        }
    };
    let mut report = TrainReport::default();
    let mut rng = Rng::new(config.seed);
    let mut adam = match config.kind {
        OptimizerKind::Adam => Some(AdamState::new(spec)),
        OptimizerKind::Sgd => None,
    };
    let batches_per_epoch = images.len().div_ceil(config.batch_size);

    for epoch in 0..config.epochs {
        let lr = config.rate_at(epoch);
        let mut epoch_loss = 0.0;
        let mut seen = 0usize;
        for _ in 0..batches_per_epoch {
            let batch = sampler.draw_batch(&mut rng, config.batch_size);
            let mut grads = NetworkParams::zeros(spec);
            let mut batch_loss = 0.0;
            for &i in &batch {
                let trace = forward_with_trace(spec, &params, &images[i])?;
                if !trace.logits().iter().all(|v| v.is_finite()) {
                    return Err(Error::Diverged { epoch });
                }
                let (value, mut dlogits) = loss_and_grad(loss, trace.logits(), targets, i)?;
                batch_loss += value;
                let scale = 1.0 / batch.len() as f64;
                for g in &mut dlogits {
                    *g *= scale;
                }
                let g = backward(spec, &params, &trace, &dlogits)?;
                accumulate(&mut grads, &g);
            }
            if !batch_loss.is_finite() {
                return Err(Error::Diverged { epoch });
            }
            match &mut adam {
                Some(state) => adam_step(&mut params, &grads, state, lr),
                None => sgd_step(&mut params, &grads, lr),
            }
            epoch_loss += batch_loss;
            seen += batch.len();
        }
        if !params.all_finite() {
            return Err(Error::Diverged { epoch });
        }
        report.epoch_loss.push(epoch_loss / seen.max(1) as f64);
    }
    Ok((params, report))
}

fn accumulate(into: &mut NetworkParams, from: &NetworkParams) {
    for (a, b) in into.layers.iter_mut().zip(&from.layers) {
        for (x, y) in a.weights.data_mut().iter_mut().zip(b.weights.iter()) {
            *x += y;
        }
        if let (Some(ab), Some(bb)) = (&mut a.bias, &b.bias) {
            for (x, y) in ab.data_mut().iter_mut().zip(bb.iter()) {
                *x += y;
            }
        }
    }
}

/// Argmax class with lowest-index tie-break.
pub fn argmax_class(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in scores.iter().enumerate().skip(1) {
        if *v > scores[best] {
            best = i;
        }
    }
    best
}

/// Fraction of examples whose argmax logit equals the label.
pub fn accuracy(spec: &NetworkSpec, params: &NetworkParams, images: &[Tensor], labels: &[usize]) -> Result<f64> {
    if images.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut correct = 0usize;
    for (img, &y) in images.iter().zip(labels) {
        let logits = super::forward(spec, params, img)?;
        if argmax_class(&logits) == y {
            correct += 1;
        }
    }
    Ok(correct as f64 / images.len() as f64)
}

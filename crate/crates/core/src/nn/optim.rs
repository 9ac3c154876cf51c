//! SGD and Adam parameter updates.

use crate::error::Result;

use super::{NetworkParams, NetworkSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OptimizerKind {
    Sgd,
    Adam,
}

/// Training configuration for one network fit.
#[derive(Debug, Clone)]
pub struct OptimizerConfig {
    pub kind: OptimizerKind,
    pub learning_rate: f64,
    /// `(epoch, factor)`: from `epoch` onward the rate is multiplied by
    /// `factor` (factors compound across entries).
    pub schedule: Vec<(usize, f64)>,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
}

impl OptimizerConfig {
    pub fn sgd(learning_rate: f64, epochs: usize, batch_size: usize, seed: u64) -> Self {
        OptimizerConfig {
            kind: OptimizerKind::Sgd,
            learning_rate,
            schedule: Vec::new(),
            batch_size,
            epochs,
            seed,
        }
    }

    pub fn adam(learning_rate: f64, epochs: usize, batch_size: usize, seed: u64) -> Self {
        OptimizerConfig {
            kind: OptimizerKind::Adam,
            learning_rate,
            schedule: Vec::new(),
            batch_size,
            epochs,
            seed,
        }
    }

    pub fn with_schedule(mut self, schedule: Vec<(usize, f64)>) -> Self {
        self.schedule = schedule;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) {
            return Err(crate::Error::InvalidArgument("learning rate must be > 0".into()));
        }
        if self.batch_size == 0 {
            return Err(crate::Error::InvalidArgument("batch size must be >= 1".into()));
        }
        for &(_, f) in &self.schedule {
            if !(f > 0.0 && f <= 1.0) {
                return Err(crate::Error::InvalidArgument(format!(
                    "schedule factors must lie in (0, 1], got {f}"
                )));
            }
        }
        Ok(())
    }

    /// Learning rate in effect during `epoch`.
    pub fn rate_at(&self, epoch: usize) -> f64 {
        let mut lr = self.learning_rate;
        for &(e, f) in &self.schedule {
            if epoch >= e {
                lr *= f;
            }
        }
        lr
    }
}

/// Plain SGD: `w <- w - lr * g`.
pub fn sgd_step(params: &mut NetworkParams, grads: &NetworkParams, lr: f64) {
    for (lp, lg) in params.layers.iter_mut().zip(&grads.layers) {
        for (w, g) in lp.weights.data_mut().iter_mut().zip(lg.weights.iter()) {
            *w -= lr * g;
        }
        if let (Some(b), Some(gb)) = (&mut lp.bias, &lg.bias) {
            for (w, g) in b.data_mut().iter_mut().zip(gb.iter()) {
                *w -= lr * g;
            }
        }
    }
}

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

/// First/second moment estimates for Adam.
#[derive(Debug, Clone)]
pub struct AdamState {
    pub m: NetworkParams,
    pub v: NetworkParams,
    pub step: u64,
}

impl AdamState {
    pub fn new(spec: &NetworkSpec) -> Self {
        AdamState {
            m: NetworkParams::zeros(spec),
            v: NetworkParams::zeros(spec),
            step: 0,
        }
    }
}

/// Adam with standard bias correction (beta1=0.9, beta2=0.999, eps=1e-8).
pub fn adam_step(params: &mut NetworkParams, grads: &NetworkParams, state: &mut AdamState, lr: f64) {
    state.step += 1;
    let t = state.step as f64;
    let c1 = 1.0 - ADAM_BETA1.powf(t);
    let c2 = 1.0 - ADAM_BETA2.powf(t);
    for li in 0..params.layers.len() {
        {
            let w = params.layers[li].weights.data_mut();
            let g = grads.layers[li].weights.data();
            let m = state.m.layers[li].weights.data_mut();
            let v = state.v.layers[li].weights.data_mut();
            adam_update(w, g, m, v, lr, c1, c2);
        }
        if params.layers[li].bias.is_some() {
            let w = params.layers[li].bias.as_mut().unwrap().data_mut();
            let g = grads.layers[li].bias.as_ref().unwrap().data();
            let m = state.m.layers[li].bias.as_mut().unwrap().data_mut();
            let v = state.v.layers[li].bias.as_mut().unwrap().data_mut();
            adam_update(w, g, m, v, lr, c1, c2);
        }
    }
}

fn adam_update(w: &mut [f64], g: &[f64], m: &mut [f64], v: &mut [f64], lr: f64, c1: f64, c2: f64) {
    for i in 0..w.len() {
        m[i] = ADAM_BETA1 * m[i] + (1.0 - ADAM_BETA1) * g[i];
        v[i] = ADAM_BETA2 * v[i] + (1.0 - ADAM_BETA2) * g[i] * g[i];
        let m_hat = m[i] / c1;
        let v_hat = v[i] / c2;
        w[i] -= lr * m_hat / (v_hat.sqrt() + ADAM_EPS);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{mlp2_spec, NetworkParams};

    fn scalar_net() -> (NetworkSpec, NetworkParams) {
        let layers = vec![crate::nn::LayerSpec::Reshape, crate::nn::LayerSpec::fc(1, 1, false)];
        let spec = NetworkSpec::new(layers, (1, 1, 1), 1).unwrap();
        let params = NetworkParams::zeros(&spec);
        (spec, params)
    }

    #[test]
    fn sgd_with_zero_gradient_is_identity() {
        let spec = mlp2_spec([4, 4], (2, 2, 1), 2, true).unwrap();
        let mut params = NetworkParams::init(&spec, 3);
        let before = params.clone();
        let zeros = NetworkParams::zeros(&spec);
        sgd_step(&mut params, &zeros, 0.5);
        assert_eq!(params, before);
    }

    #[test]
    fn sgd_on_quadratic_follows_geometric_decay() {
        // L(w) = w^2, dL/dw = 2w, lr = 0.1: w_k = 0.8^k exactly.
        let (_, mut params) = scalar_net();
        params.layers[0].weights.data_mut()[0] = 1.0;
        for k in 1..=20 {
            let w = params.layers[0].weights.data()[0];
            let mut grads = params.clone();
            grads.layers[0].weights.data_mut()[0] = 2.0 * w;
            sgd_step(&mut params, &grads, 0.1);
            let want = 0.8f64.powi(k);
            let got = params.layers[0].weights.data()[0];
            assert!((got - want).abs() < 1e-12, "step {k}: {got} vs {want}");
        }
    }

    #[test]
    fn adam_on_quadratic_strictly_decreases_loss() {
        let (spec, mut params) = scalar_net();
        params.layers[0].weights.data_mut()[0] = 1.0;
        let mut state = AdamState::new(&spec);
        let mut last = 1.0f64;
        let mut decreased = true;
        for _ in 0..100 {
            let w = params.layers[0].weights.data()[0];
            let mut grads = params.clone();
            grads.layers[0].weights.data_mut()[0] = 2.0 * w;
            adam_step(&mut params, &grads, &mut state, 0.01);
            let loss = params.layers[0].weights.data()[0].powi(2);
            decreased &= loss < last;
            last = loss;
        }
        assert!(decreased, "loss failed to decrease monotonically over 100 Adam steps");
    }

    #[test]
    fn schedule_compounds_from_epoch() {
        let cfg = OptimizerConfig::sgd(0.1, 10, 8, 0).with_schedule(vec![(3, 0.1), (6, 0.5)]);
        assert!((cfg.rate_at(0) - 0.1).abs() < 1e-15);
        assert!((cfg.rate_at(3) - 0.01).abs() < 1e-15);
        assert!((cfg.rate_at(6) - 0.005).abs() < 1e-15);
    }
}

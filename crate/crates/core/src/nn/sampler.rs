//! Weighted example sampling for network training.
//!
//! Boosting hands networks the example distribution D_t by sampling batches
//! with replacement from it, so the training loop itself never sees weights.

use crate::error::{Error, Result};
use crate::rng::Rng;

/// Samples example indices with replacement, proportionally to a weight
/// vector, via inverse-CDF binary search.
#[derive(Debug, Clone)]
pub struct WeightedSampler {
    cumulative: Vec<f64>,
}

impl WeightedSampler {
    pub fn new(weights: &[f64]) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::EmptyDataset);
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::InvalidArgument("sampler weights must be finite and >= 0".into()));
        }
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return Err(Error::WeightUnderflow);
        }
        let mut cumulative = Vec::with_capacity(weights.len());
        let mut acc = 0.0;
        for w in weights {
            acc += w / total;
            cumulative.push(acc);
        }
        *cumulative.last_mut().unwrap() = 1.0;
        Ok(WeightedSampler { cumulative })
    }

    /// Uniform sampler over `n` examples (same code path as explicit equal
    /// weights).
    pub fn uniform(n: usize) -> Result<Self> {
        Self::new(&vec![1.0; n])
    }

    pub fn len(&self) -> usize {
        self.cumulative.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cumulative.is_empty()
    }

    pub fn draw(&self, rng: &mut Rng) -> usize {
        let u = rng.uniform();
        self.cumulative.partition_point(|&c| c <= u)
    }

    pub fn draw_batch(&self, rng: &mut Rng, n: usize) -> Vec<usize> {
        (0..n).map(|_| self.draw(rng)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_weight_entries_are_never_drawn() {
        let s = WeightedSampler::new(&[0.0, 1.0, 0.0, 2.0]).unwrap();
        let mut rng = Rng::new(3);
        for _ in 0..2000 {
            let i = s.draw(&mut rng);
            assert!(i == 1 || i == 3);
        }
    }

    #[test]
    fn uniform_matches_explicit_equal_weights() {
        let a = WeightedSampler::uniform(7).unwrap();
        let b = WeightedSampler::new(&[0.25; 7]).unwrap();
        let mut ra = Rng::new(11);
        let mut rb = Rng::new(11);
        for _ in 0..500 {
            assert_eq!(a.draw(&mut ra), b.draw(&mut rb));
        }
    }

    #[test]
    fn frequencies_track_weights() {
        let s = WeightedSampler::new(&[1.0, 3.0]).unwrap();
        let mut rng = Rng::new(5);
        let n = 40_000;
        let ones = (0..n).filter(|_| s.draw(&mut rng) == 1).count();
        let frac = ones as f64 / n as f64;
        assert!((frac - 0.75).abs() < 0.02, "got {frac}");
    }

    #[test]
    fn rejects_degenerate_weights() {
        assert!(WeightedSampler::new(&[]).is_err());
        assert!(WeightedSampler::new(&[0.0, 0.0]).is_err());
        assert!(WeightedSampler::new(&[f64::NAN, 1.0]).is_err());
        assert!(WeightedSampler::new(&[-1.0, 2.0]).is_err());
    }
}

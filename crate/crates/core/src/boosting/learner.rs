//! Weak-learner families and the classifiers they produce.

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::haar::{FilterBank, HaarFilter, IntegralImage, IntegralSet};
use crate::nn::{
    forward, softmax, InitMode, Loss, LossTargets, NetworkParams, NetworkSpec, OptimizerConfig,
    WeightedSampler,
};
use crate::rng::mix_seed;
use crate::tensor::Tensor;
use crate::tree::{grow_tree, DecisionTree, GrowOptions, SplitObjective};

use super::WeightDistribution;

/// A trained weak classifier. Networks output probabilities through softmax;
/// trees output their leaf distribution directly.
#[derive(Debug, Clone)]
pub enum WeakClassifier {
    Tree(DecisionTree),
    Network(NetworkSpec, NetworkParams),
    /// Fixed output regardless of input; used to construct at-chance
    /// learners for halt-behavior tests.
    Constant(Vec<f64>),
}

/// One example as seen by a classifier: the scaled tensor for networks, the
/// integral image for trees.
#[derive(Clone, Copy)]
pub struct SampleView<'a> {
    pub tensor: Option<&'a Tensor>,
    pub integral: Option<&'a IntegralImage>,
}

impl WeakClassifier {
    /// Probability distribution over classes.
    pub fn predict(&self, filters: &[HaarFilter], sample: SampleView) -> Result<Vec<f64>> {
        match self {
            WeakClassifier::Tree(tree) => {
                let ii = sample
                    .integral
                    .ok_or_else(|| Error::InvalidArgument("tree prediction needs integral images".into()))?;
                tree.predict(filters, ii)
            }
            WeakClassifier::Network(spec, params) => {
                let t = sample
                    .tensor
                    .ok_or_else(|| Error::InvalidArgument("network prediction needs tensors".into()))?;
                softmax(&forward(spec, params, t)?)
            }
            WeakClassifier::Constant(dist) => Ok(dist.clone()),
        }
    }

    /// Raw score vector: logits for networks, the distribution itself for
    /// trees and constants. LogitBoost accumulates these.
    pub fn predict_raw(&self, filters: &[HaarFilter], sample: SampleView) -> Result<Vec<f64>> {
        match self {
            WeakClassifier::Network(spec, params) => {
                let t = sample
                    .tensor
                    .ok_or_else(|| Error::InvalidArgument("network prediction needs tensors".into()))?;
                forward(spec, params, t)
            }
            other => other.predict(filters, sample),
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            WeakClassifier::Tree(_) => "tree",
            WeakClassifier::Network(..) => "net",
            WeakClassifier::Constant(_) => "constant",
        }
    }
}

/// Dataset views prepared once per run: labels plus whichever of tensors /
/// integral images the learner family needs.
pub struct PreparedData {
    pub labels: Vec<usize>,
    pub num_classes: usize,
    pub tensors: Option<Vec<Tensor>>,
    pub integrals: Option<IntegralSet>,
}

impl PreparedData {
    pub fn new(data: &Dataset, tensors: bool, integrals: bool) -> Self {
        PreparedData {
            labels: data.labels_usize(),
            num_classes: data.num_classes,
            tensors: tensors.then(|| data.to_tensors()),
            integrals: integrals.then(|| IntegralSet::from_dataset(data)),
        }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn sample(&self, i: usize) -> SampleView<'_> {
        SampleView {
            tensor: self.tensors.as_ref().map(|t| &t[i]),
            integral: self.integrals.as_ref().map(|s| &s.images[i]),
        }
    }
}

/// A weak-learner family: trains one classifier from weighted data.
pub trait WeakLearner {
    /// Trains a weak classifier under the example distribution. `warm`
    /// carries the first round's classifier in no-reset mode.
    fn train(
        &self,
        data: &PreparedData,
        weights: &WeightDistribution,
        seed: u64,
        warm: Option<&WeakClassifier>,
    ) -> Result<WeakClassifier>;

    /// Fits per-class regression targets (LogitBoost). Only network learners
    /// support this.
    fn fit_targets(
        &self,
        _data: &PreparedData,
        _targets: LossTargets,
        _loss: Loss,
        _seed: u64,
    ) -> Result<WeakClassifier> {
        Err(Error::InvalidArgument(
            "this learner family does not fit regression targets".into(),
        ))
    }

    /// Whether this family consumes tensors, integral images, or both.
    fn needs(&self) -> (bool, bool);

    /// Channel-expanded filters backing tree classifiers, if any.
    fn filters(&self) -> Option<&FilterBank> {
        None
    }
}

/// Decision-tree learner: consumes the weight distribution directly as
/// example weights (no resampling).
pub struct TreeLearner {
    expanded: FilterBank,
    pub num_leaves: usize,
    pub objective: SplitObjective,
}

impl TreeLearner {
    /// `bank` is the per-channel bank from `generate_filter_bank`; it is
    /// expanded across channels here.
    pub fn new(bank: &FilterBank, num_leaves: usize, objective: SplitObjective) -> Self {
        let expanded = FilterBank {
            filters: crate::haar::expand_channels(bank),
            image_size: bank.image_size,
            channels: bank.channels,
            min_rect: bank.min_rect,
            seed: bank.seed,
        };
        TreeLearner {
            expanded,
            num_leaves,
            objective,
        }
    }
}

impl WeakLearner for TreeLearner {
    fn train(
        &self,
        data: &PreparedData,
        weights: &WeightDistribution,
        _seed: u64,
        _warm: Option<&WeakClassifier>,
    ) -> Result<WeakClassifier> {
        let integrals = data
            .integrals
            .as_ref()
            .ok_or_else(|| Error::InvalidArgument("tree learner needs integral images".into()))?;
        let options = GrowOptions {
            num_leaves: self.num_leaves,
            objective: self.objective,
        };
        let (tree, _) = grow_tree(
            integrals,
            &data.labels,
            data.num_classes,
            weights.weights(),
            &self.expanded.filters,
            &options,
        )?;
        Ok(WeakClassifier::Tree(tree))
    }

    fn needs(&self) -> (bool, bool) {
        (false, true)
    }

    fn filters(&self) -> Option<&FilterBank> {
        Some(&self.expanded)
    }
}

/// Network learner: consumes the weight distribution through seeded batch
/// sampling with replacement.
pub struct NetworkLearner {
    pub spec: NetworkSpec,
    pub optimizer: OptimizerConfig,
    pub loss: Loss,
}

impl NetworkLearner {
    pub fn new(spec: NetworkSpec, optimizer: OptimizerConfig) -> Self {
        NetworkLearner {
            spec,
            optimizer,
            loss: Loss::CrossEntropy,
        }
    }
}

impl WeakLearner for NetworkLearner {
    fn train(
        &self,
        data: &PreparedData,
        weights: &WeightDistribution,
        seed: u64,
        warm: Option<&WeakClassifier>,
    ) -> Result<WeakClassifier> {
        let tensors = data
            .tensors
            .as_ref()
            .ok_or_else(|| Error::InvalidArgument("network learner needs tensors".into()))?;
        let sampler = WeightedSampler::new(weights.weights())?;
        let mut config = self.optimizer.clone();
        config.seed = mix_seed(seed, 0xBA7C);
        let init = match warm {
            Some(WeakClassifier::Network(_, params)) => InitMode::WarmStart(params.clone()),
            Some(other) => {
                return Err(Error::InvalidArgument(format!(
                    "cannot warm-start a network from a {} classifier",
                    other.kind_name()
                )))
            }
            None => InitMode::Fresh(mix_seed(seed, 0x1217)),
        };
        let (params, _) = crate::nn::train_network(
            &self.spec,
            &config,
            tensors,
            &LossTargets::Labels(data.labels.clone()),
            &sampler,
            self.loss,
            init,
        )?;
        Ok(WeakClassifier::Network(self.spec.clone(), params))
    }

    fn fit_targets(
        &self,
        data: &PreparedData,
        targets: LossTargets,
        loss: Loss,
        seed: u64,
    ) -> Result<WeakClassifier> {
        let tensors = data
            .tensors
            .as_ref()
            .ok_or_else(|| Error::InvalidArgument("network learner needs tensors".into()))?;
        let sampler = WeightedSampler::uniform(tensors.len())?;
        let mut config = self.optimizer.clone();
        config.seed = mix_seed(seed, 0xBA7C);
        let (params, _) = crate::nn::train_network(
            &self.spec,
            &config,
            tensors,
            &targets,
            &sampler,
            loss,
            InitMode::Fresh(mix_seed(seed, 0x1217)),
        )?;
        Ok(WeakClassifier::Network(self.spec.clone(), params))
    }

    fn needs(&self) -> (bool, bool) {
        (true, false)
    }
}

/// Always predicts the same distribution: a deliberately at-chance weak
/// learner for exercising halt behavior.
pub struct ConstantLearner {
    pub dist: Vec<f64>,
}

impl ConstantLearner {
    pub fn uniform(num_classes: usize) -> Self {
        ConstantLearner {
            dist: vec![1.0 / num_classes as f64; num_classes],
        }
    }
}

impl WeakLearner for ConstantLearner {
    fn train(
        &self,
        _data: &PreparedData,
        _weights: &WeightDistribution,
        _seed: u64,
        _warm: Option<&WeakClassifier>,
    ) -> Result<WeakClassifier> {
        Ok(WeakClassifier::Constant(self.dist.clone()))
    }

    fn needs(&self) -> (bool, bool) {
        (false, false)
    }
}

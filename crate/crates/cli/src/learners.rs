//! Weak-learner construction from config.

use boostlab::boosting::{ConstantLearner, NetworkLearner, TreeLearner, WeakLearner};
use boostlab::budget::Family;
use boostlab::data::Dataset;
use boostlab::haar::generate_filter_bank;
use boostlab::nn::{cnn3_spec, mlp2_spec, vgg8_spec, NetworkSpec};
use boostlab::rng::mix_seed;
use boostlab::tree::TreeParamModel;

use crate::config::{ExperimentConfig, LearnerFamily};
use crate::CliError;

/// Parameters per internal tree decision under the accounting model used in
/// reports: a filter index, a threshold, and a child pointer pair counted as
/// one routing slot.
pub const TREE_K: usize = 3;

pub fn network_spec(cfg: &ExperimentConfig, data: &Dataset) -> Result<NetworkSpec, CliError> {
    let shape = data.image_shape();
    let c = data.num_classes;
    let w = &cfg.learner.widths;
    let bias = cfg.learner.bias;
    let spec = match cfg.learner.family {
        LearnerFamily::Net(Family::Cnn3) => {
            if w.len() != 3 {
                return Err(CliError::validation("cnn3 needs 3 widths".into()));
            }
            cnn3_spec([w[0], w[1], w[2]], shape, c, bias)
        }
        LearnerFamily::Net(Family::Mlp2) => {
            if w.len() != 2 {
                return Err(CliError::validation("mlp2 needs 2 widths".into()));
            }
            mlp2_spec([w[0], w[1]], shape, c, bias)
        }
        LearnerFamily::Net(Family::Vgg8) => {
            if w.len() != 5 {
                return Err(CliError::validation("vgg8 needs 5 widths".into()));
            }
            vgg8_spec([w[0], w[1], w[2], w[3], w[4]], shape, c, bias, bias)
        }
        _ => return Err(CliError::validation("not a network learner".into())),
    };
    spec.map_err(CliError::validation_from)
}

/// Builds the weak learner the config names. `seed` feeds the filter-bank
/// sampler unless the config pins `bank_seed`.
pub fn build_learner(
    cfg: &ExperimentConfig,
    data: &Dataset,
    seed: u64,
) -> Result<Box<dyn WeakLearner>, CliError> {
    match cfg.learner.family {
        LearnerFamily::Tree => {
            let bank_seed = cfg.learner.bank_seed.unwrap_or_else(|| mix_seed(seed, 0xBA2C));
            let bank = generate_filter_bank(
                (data.height, data.width),
                cfg.learner.min_rect,
                data.channels,
                cfg.learner.filters,
                bank_seed,
            )
            .map_err(CliError::validation_from)?;
            Ok(Box::new(TreeLearner::new(
                &bank,
                cfg.learner.leaves,
                cfg.learner.objective,
            )))
        }
        LearnerFamily::Net(_) => {
            let spec = network_spec(cfg, data)?;
            Ok(Box::new(NetworkLearner::new(spec, cfg.optimizer.clone())))
        }
        LearnerFamily::Chance => Ok(Box::new(ConstantLearner::uniform(data.num_classes))),
    }
}

/// Parameter count of one weak classifier under the reporting conventions:
/// trees use P = k(L-1) + cL with k = 3, networks count their stored
/// scalars.
pub fn member_param_count(
    classifier: &boostlab::boosting::WeakClassifier,
    num_classes: usize,
) -> usize {
    match classifier {
        boostlab::boosting::WeakClassifier::Tree(tree) => tree.param_count(TreeParamModel {
            k: TREE_K,
            c: num_classes,
        }),
        boostlab::boosting::WeakClassifier::Network(_, params) => params.param_count(),
        boostlab::boosting::WeakClassifier::Constant(dist) => dist.len(),
    }
}

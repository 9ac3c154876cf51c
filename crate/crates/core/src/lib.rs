//! Desk-scale laboratory for multi-class boosting over two weak-learner
//! families: Haar-filter decision trees and small feed-forward networks.
//!
//! The crate provides
//!
//! - a minimal dense-tensor network engine with manual backpropagation,
//!   SGD/Adam, and weighted-sampling training loops ([`nn`]),
//! - Haar rectangle filters over integral images and a weighted multi-class
//!   decision-tree learner grown by the peak criterion ([`haar`], [`tree`]),
//! - multi-class AdaBoost plus SAMME, a LogitBoost adaptation for networks,
//!   and uniform model averaging ([`boosting`]),
//! - the constructive composition of several networks into one equivalent
//!   larger network, with a numerical verifier ([`merge`]),
//! - parameter-budget planning that pairs N-round ensembles with enlarged
//!   single models ([`budget`]),
//! - dataset loaders (IDX / CIFAR binary) and seeded synthetic generators
//!   ([`data`]).
//!
//! All randomness flows through the seeded generators in [`rng`]; every
//! operation is deterministic given its seed.

pub mod boosting;

pub mod budget;
pub mod data;
pub mod error;
pub mod haar;
pub mod merge;

pub mod nn;
pub mod rng;
pub mod tensor;
pub mod tree;

pub use error::{Error, Result};
pub use tensor::Tensor;

//! Dataset resolution for the harness: file datasets under the data root,
//! synthetic generators otherwise.

use std::path::PathBuf;

use boostlab::data::{
    dataset_root, load_cifar, load_mnist, split_train_test, subset, synth_blobs, synth_digits,
    CifarVariant, Dataset, Split,
};
use boostlab::rng::mix_seed;

use crate::config::{DatasetConfig, DatasetKind};
use crate::CliError;

fn root_dir(cfg: &DatasetConfig) -> Result<PathBuf, CliError> {
    cfg.root
        .clone()
        .or_else(dataset_root)
        .ok_or_else(|| {
            CliError::validation(
                "file datasets need [dataset] root or the BOOSTLAB_DATA environment variable".into(),
            )
        })
}

/// Loads the train and test splits named by the config. Stratified subsets
/// are applied when `train_per_class` / `test_per_class` are non-zero.
pub fn load_splits(cfg: &DatasetConfig, seed: u64) -> Result<(Dataset, Dataset), CliError> {
    let (mut train, mut test) = match cfg.kind {
        DatasetKind::Blobs => {
            let total = cfg.train_per_class.max(1) + cfg.test_per_class.max(1);
            let all = synth_blobs(
                cfg.classes,
                total,
                (cfg.height, cfg.width, cfg.channels),
                cfg.separation,
                mix_seed(seed, 0xB10B5),
            )
            .map_err(CliError::runtime_from)?;
            let split = split_train_test(&all, cfg.train_per_class.max(1)).map_err(CliError::runtime_from)?;
            return Ok(split);
        }
        DatasetKind::SynthDigits => {
            let train = synth_digits(cfg.train_per_class.max(1), seed, Split::Train)
                .map_err(CliError::runtime_from)?;
            let test = synth_digits(cfg.test_per_class.max(1), seed, Split::Test)
                .map_err(CliError::runtime_from)?;
            (train, test)
        }
        DatasetKind::Mnist => {
            let root = root_dir(cfg)?;
            let train = load_mnist(
                &root.join("train-images-idx3-ubyte"),
                &root.join("train-labels-idx1-ubyte"),
            )
            .map_err(CliError::validation_from)?;
            let test = load_mnist(
                &root.join("t10k-images-idx3-ubyte"),
                &root.join("t10k-labels-idx1-ubyte"),
            )
            .map_err(CliError::validation_from)?;
            (train, test)
        }
        DatasetKind::Cifar10 => {
            let root = root_dir(cfg)?;
            let batches: Vec<PathBuf> = (1..=5)
                .map(|i| root.join(format!("data_batch_{i}.bin")))
                .collect();
            let train = load_cifar(&batches, CifarVariant::C10).map_err(CliError::validation_from)?;
            let test = load_cifar(&[root.join("test_batch.bin")], CifarVariant::C10)
                .map_err(CliError::validation_from)?;
            (train, test)
        }
        DatasetKind::Cifar100 => {
            let root = root_dir(cfg)?;
            let train =
                load_cifar(&[root.join("train.bin")], CifarVariant::C100).map_err(CliError::validation_from)?;
            let test =
                load_cifar(&[root.join("test.bin")], CifarVariant::C100).map_err(CliError::validation_from)?;
            (train, test)
        }
    };
    if cfg.train_per_class > 0 {
        train = subset(&train, cfg.train_per_class, mix_seed(seed, 0x5B1)).map_err(CliError::runtime_from)?;
    }
    if cfg.test_per_class > 0 {
        test = subset(&test, cfg.test_per_class, mix_seed(seed, 0x5B2)).map_err(CliError::runtime_from)?;
    }
    Ok((train, test))
}

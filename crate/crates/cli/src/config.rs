//! Line-oriented `[section]` / `key = value` experiment configuration.
//! Dependency-free and diff-friendly; `#` starts a comment.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use boostlab::boosting::{Algorithm, AlphaRule, ResetMode};
use boostlab::budget::Family;
use boostlab::nn::{OptimizerConfig, OptimizerKind};
use boostlab::tree::SplitObjective;

use crate::CliError;

/// Raw parsed config: section -> key -> value.
#[derive(Debug, Clone, Default)]
pub struct RawConfig {
    sections: BTreeMap<String, BTreeMap<String, String>>,
    pub source_text: String,
}

impl RawConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut sections: BTreeMap<String, BTreeMap<String, String>> = BTreeMap::new();
        let mut current = String::from("");
        for (no, raw_line) in text.lines().enumerate() {
            let line = raw_line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[') {
                let name = name
                    .strip_suffix(']')
                    .ok_or_else(|| CliError::validation(format!("line {}: unterminated section header", no + 1)))?;
                current = name.trim().to_string();
                sections.entry(current.clone()).or_default();
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| CliError::validation(format!("line {}: expected key = value", no + 1)))?;
            sections
                .entry(current.clone())
                .or_default()
                .insert(key.trim().to_string(), value.trim().to_string());
        }
        Ok(RawConfig {
            sections,
            source_text: text.to_string(),
        })
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::validation(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn get(&self, section: &str, key: &str) -> Option<&str> {
        self.sections.get(section)?.get(key).map(String::as_str)
    }

    pub fn require(&self, section: &str, key: &str) -> Result<&str, CliError> {
        self.get(section, key)
            .ok_or_else(|| CliError::validation(format!("missing [{section}] {key}")))
    }

    pub fn parse_or<T: std::str::FromStr>(&self, section: &str, key: &str, default: T) -> Result<T, CliError> {
        match self.get(section, key) {
            None => Ok(default),
            Some(v) => v
                .parse()
                .map_err(|_| CliError::validation(format!("[{section}] {key}: cannot parse {v:?}"))),
        }
    }

}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DatasetKind {
    Blobs,
    SynthDigits,
    Mnist,
    Cifar10,
    Cifar100,
}

#[derive(Debug, Clone)]
pub struct DatasetConfig {
    pub kind: DatasetKind,
    pub root: Option<PathBuf>,
    pub train_per_class: usize,
    pub test_per_class: usize,
    pub classes: usize,
    pub height: usize,
    pub width: usize,
    pub channels: usize,
    pub separation: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LearnerFamily {
    Tree,
    Net(Family),
    Chance,
}

#[derive(Debug, Clone)]
pub struct LearnerConfig {
    pub family: LearnerFamily,
    pub leaves: usize,
    pub filters: usize,
    pub min_rect: usize,
    pub objective: SplitObjective,
    pub bank_seed: Option<u64>,
    pub widths: Vec<usize>,
    pub bias: bool,
}

#[derive(Debug, Clone)]
pub struct BoostSection {
    pub algorithm: Algorithm,
    pub alpha_rule: AlphaRule,
    pub rounds: usize,
    pub reset: ResetMode,
    pub shrinkage: f64,
    pub clamp: f64,
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub dataset: DatasetConfig,
    pub learner: LearnerConfig,
    pub boost: BoostSection,
    pub optimizer: OptimizerConfig,
    pub out_dir: Option<PathBuf>,
    pub raw: RawConfig,
}

impl ExperimentConfig {
    pub fn from_raw(raw: RawConfig) -> Result<Self, CliError> {
        let kind = match raw.require("dataset", "kind")? {
            "blobs" => DatasetKind::Blobs,
            "synth-digits" => DatasetKind::SynthDigits,
            "mnist" => DatasetKind::Mnist,
            "cifar10" => DatasetKind::Cifar10,
            "cifar100" => DatasetKind::Cifar100,
            other => return Err(CliError::validation(format!("unknown dataset kind {other}"))),
        };
        let default_classes = match kind {
            DatasetKind::Cifar100 => 100,
            DatasetKind::Blobs => 3,
            _ => 10,
        };
        let (dh, dw, dc) = match kind {
            DatasetKind::Mnist | DatasetKind::SynthDigits => (28, 28, 1),
            DatasetKind::Cifar10 | DatasetKind::Cifar100 => (32, 32, 3),
            DatasetKind::Blobs => (6, 6, 1),
        };
        let dataset = DatasetConfig {
            kind,
            root: raw.get("dataset", "root").map(PathBuf::from),
            train_per_class: raw.parse_or("dataset", "train_per_class", 0)?,
            test_per_class: raw.parse_or("dataset", "test_per_class", 0)?,
            classes: raw.parse_or("dataset", "classes", default_classes)?,
            height: raw.parse_or("dataset", "height", dh)?,
            width: raw.parse_or("dataset", "width", dw)?,
            channels: raw.parse_or("dataset", "channels", dc)?,
            separation: raw.parse_or("dataset", "separation", 1.5)?,
        };

        let family = match raw.require("learner", "family")? {
            "tree" => LearnerFamily::Tree,
            "chance" => LearnerFamily::Chance,
            name => LearnerFamily::Net(
                Family::parse(name).map_err(|e| CliError::validation(e.to_string()))?,
            ),
        };
        let widths = match raw.get("learner", "widths") {
            Some(v) => parse_widths(v)?,
            None => match family {
                LearnerFamily::Net(Family::Cnn3) => vec![6, 16, 32],
                LearnerFamily::Net(Family::Mlp2) => vec![128, 128],
                LearnerFamily::Net(Family::Vgg8) => vec![6, 16, 32, 64, 64],
                _ => Vec::new(),
            },
        };
        let objective = match raw.get("learner", "objective").unwrap_or("weighted") {
            "weighted" => SplitObjective::WeightedMass,
            "unweighted" => SplitObjective::UnweightedPeaks,
            other => return Err(CliError::validation(format!("unknown split objective {other}"))),
        };
        let learner = LearnerConfig {
            family,
            leaves: raw.parse_or("learner", "leaves", 64)?,
            filters: raw.parse_or("learner", "filters", 600)?,
            min_rect: raw.parse_or("learner", "min_rect", 4)?,
            objective,
            bank_seed: match raw.get("learner", "bank_seed") {
                Some(v) => Some(
                    v.parse()
                        .map_err(|_| CliError::validation(format!("bad bank_seed {v:?}")))?,
                ),
                None => None,
            },
            widths,
            bias: raw.parse_or("learner", "bias", false)?,
        };

        let algorithm = match raw.get("boosting", "algorithm").unwrap_or("adaboost") {
            "adaboost" => Algorithm::AdaBoost,
            "samme" => Algorithm::Samme,
            "logitboost" => Algorithm::LogitBoost,
            "average" => Algorithm::Average,
            other => return Err(CliError::validation(format!("unknown algorithm {other}"))),
        };
        let alpha_rule = match raw.get("boosting", "alpha").unwrap_or("sigmoid") {
            "sigmoid" => AlphaRule::Sigmoid,
            "schapire_singer" => AlphaRule::SchapireSinger,
            "samme" => AlphaRule::SammeRule,
            other => return Err(CliError::validation(format!("unknown alpha rule {other}"))),
        };
        let reset = match raw.get("boosting", "reset").unwrap_or("reset") {
            "reset" => ResetMode::Reset,
            "no_reset" => ResetMode::NoReset,
            other => return Err(CliError::validation(format!("unknown reset mode {other}"))),
        };
        let boost = BoostSection {
            algorithm,
            alpha_rule,
            rounds: raw.parse_or("boosting", "rounds", 10)?,
            reset,
            shrinkage: raw.parse_or("boosting", "shrinkage", 1.0)?,
            clamp: raw.parse_or("boosting", "clamp", 3.0)?,
        };

        let kind = match raw.get("optimizer", "kind").unwrap_or("sgd") {
            "sgd" => OptimizerKind::Sgd,
            "adam" => OptimizerKind::Adam,
            other => return Err(CliError::validation(format!("unknown optimizer {other}"))),
        };
        let default_lr = match kind {
            OptimizerKind::Sgd => 0.1,
            OptimizerKind::Adam => 1e-4,
        };
        let schedule = match raw.get("optimizer", "schedule") {
            None => Vec::new(),
            Some(v) => parse_schedule(v)?,
        };
        let optimizer = OptimizerConfig {
            kind,
            learning_rate: raw.parse_or("optimizer", "lr", default_lr)?,
            schedule,
            batch_size: raw.parse_or("optimizer", "batch", 128)?,
            epochs: raw.parse_or("optimizer", "epochs", 30)?,
            seed: 0, // set per run from the derived seed
        };

        let out_dir = raw.get("output", "dir").map(PathBuf::from);

        Ok(ExperimentConfig {
            dataset,
            learner,
            boost,
            optimizer,
            out_dir,
            raw,
        })
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        Self::from_raw(RawConfig::load(path)?)
    }
}

fn parse_widths(v: &str) -> Result<Vec<usize>, CliError> {
    v.split(',')
        .map(|t| {
            t.trim()
                .parse()
                .map_err(|_| CliError::validation(format!("bad width {t:?}")))
        })
        .collect()
}

fn parse_schedule(v: &str) -> Result<Vec<(usize, f64)>, CliError> {
    v.split(',')
        .map(|t| {
            let (epoch, factor) = t
                .trim()
                .split_once(':')
                .ok_or_else(|| CliError::validation(format!("schedule entry {t:?} is not epoch:factor")))?;
            Ok((
                epoch
                    .trim()
                    .parse()
                    .map_err(|_| CliError::validation(format!("bad schedule epoch {epoch:?}")))?,
                factor
                    .trim()
                    .parse()
                    .map_err(|_| CliError::validation(format!("bad schedule factor {factor:?}")))?,
            ))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_sections_and_comments() {
        let text = "# comment\n[dataset]\nkind = blobs\nclasses = 4 # inline\n\n[learner]\nfamily = tree\n";
        let raw = RawConfig::parse(text).unwrap();
        assert_eq!(raw.get("dataset", "kind"), Some("blobs"));
        assert_eq!(raw.get("dataset", "classes"), Some("4"));
        let cfg = ExperimentConfig::from_raw(raw).unwrap();
        assert_eq!(cfg.dataset.classes, 4);
        assert!(matches!(cfg.learner.family, LearnerFamily::Tree));
    }

    #[test]
    fn rejects_malformed_lines() {
        assert!(RawConfig::parse("[dataset\nkind = blobs").is_err());
        assert!(RawConfig::parse("kind blobs").is_err());
    }

    #[test]
    fn schedule_and_widths_parse() {
        let text = "[dataset]\nkind = blobs\n[learner]\nfamily = mlp2\nwidths = 64, 64\n[optimizer]\nschedule = 95:0.1, 150:0.5\n";
        let cfg = ExperimentConfig::from_raw(RawConfig::parse(text).unwrap()).unwrap();
        assert_eq!(cfg.learner.widths, vec![64, 64]);
        assert_eq!(cfg.optimizer.schedule, vec![(95, 0.1), (150, 0.5)]);
    }
}

//! Ensemble persistence: a textual manifest referencing member files
//! (tree / network containers) plus the filter bank for tree members.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::haar::{load_bank_file, save_bank_file};
use crate::nn::{load_network_file, save_network_file};
use crate::tree::{load_tree_file, save_tree_file};

use super::learner::WeakClassifier;
use super::{Algorithm, AlphaRule, Ensemble, EnsembleMember, ResetMode};

const MANIFEST: &str = "ensemble.manifest";
const BANK_FILE: &str = "bank.blhb";

/// Writes `ensemble.manifest`, one file per member, and the filter bank.
pub fn save_ensemble(dir: &Path, ensemble: &Ensemble) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir.display().to_string(), e))?;
    let mut manifest = String::new();
    let _ = writeln!(manifest, "BLEN v1");
    let _ = writeln!(manifest, "algorithm {}", ensemble.algorithm.name());
    let _ = writeln!(manifest, "alpha_rule {}", ensemble.alpha_rule.name());
    let _ = writeln!(manifest, "reset {}", ensemble.reset_mode.name());
    let _ = writeln!(manifest, "classes {}", ensemble.num_classes);
    if let Some(bank) = &ensemble.filters {
        save_bank_file(&dir.join(BANK_FILE), bank)?;
        let _ = writeln!(manifest, "bank {BANK_FILE}");
    }
    let _ = writeln!(manifest, "members {}", ensemble.members.len());
    for (i, member) in ensemble.members.iter().enumerate() {
        let clamp = member.clamp.map_or("none".to_string(), |c| c.to_string());
        match &member.classifier {
            WeakClassifier::Tree(tree) => {
                let file = format!("member_{i:03}.bltr");
                save_tree_file(&dir.join(&file), tree)?;
                let _ = writeln!(manifest, "member {} {} tree {}", member.alpha, clamp, file);
            }
            WeakClassifier::Network(spec, params) => {
                let file = format!("member_{i:03}.blnn");
                save_network_file(&dir.join(&file), spec, params, None)?;
                let _ = writeln!(manifest, "member {} {} net {}", member.alpha, clamp, file);
            }
            WeakClassifier::Constant(dist) => {
                let values: Vec<String> = dist.iter().map(|v| v.to_string()).collect();
                let _ = writeln!(
                    manifest,
                    "member {} {} constant {}",
                    member.alpha,
                    clamp,
                    values.join(" ")
                );
            }
        }
    }
    let path = dir.join(MANIFEST);
    std::fs::write(&path, manifest).map_err(|e| Error::io(path.display().to_string(), e))
}

pub fn load_ensemble(dir: &Path) -> Result<Ensemble> {
    let path = dir.join(MANIFEST);
    let text = std::fs::read_to_string(&path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let bad = |reason: String| Error::format("BLEN", reason);
    let mut lines = text.lines();
    if lines.next() != Some("BLEN v1") {
        return Err(bad("missing BLEN v1 header".into()));
    }
    let mut algorithm = None;
    let mut alpha_rule = None;
    let mut reset_mode = None;
    let mut num_classes = 0usize;
    let mut filters = None;
    let mut members = Vec::new();
    for line in lines {
        let mut parts = line.split_whitespace();
        match parts.next() {
            Some("algorithm") => {
                algorithm = Some(match parts.next() {
                    Some("adaboost") => Algorithm::AdaBoost,
                    Some("samme") => Algorithm::Samme,
                    Some("logitboost") => Algorithm::LogitBoost,
                    Some("average") => Algorithm::Average,
                    other => return Err(bad(format!("unknown algorithm {other:?}"))),
                });
            }
            Some("alpha_rule") => {
                alpha_rule = Some(match parts.next() {
                    Some("sigmoid") => AlphaRule::Sigmoid,
                    Some("schapire-singer") => AlphaRule::SchapireSinger,
                    Some("samme") => AlphaRule::SammeRule,
                    other => return Err(bad(format!("unknown alpha rule {other:?}"))),
                });
            }
            Some("reset") => {
                reset_mode = Some(match parts.next() {
                    Some("reset") => ResetMode::Reset,
                    Some("no-reset") => ResetMode::NoReset,
                    other => return Err(bad(format!("unknown reset mode {other:?}"))),
                });
            }
            Some("classes") => {
                num_classes = parts
                    .next()
                    .and_then(|v| v.parse().ok())
                    .ok_or_else(|| bad("bad classes line".into()))?;
            }
            Some("bank") => {
                let file = parts.next().ok_or_else(|| bad("bank line without path".into()))?;
                filters = Some(load_bank_file(&dir.join(file))?);
            }
            Some("members") => {}
            Some("member") => {
                let alpha: f64 = parts
                    .next()
                    .and_then(|v| v.parse().ok())
                    .ok_or_else(|| bad("bad member alpha".into()))?;
                let clamp_tok = parts.next().ok_or_else(|| bad("missing clamp".into()))?;
                let clamp = if clamp_tok == "none" {
                    None
                } else {
                    Some(clamp_tok.parse().map_err(|_| bad("bad clamp".into()))?)
                };
                let kind = parts.next().ok_or_else(|| bad("missing member kind".into()))?;
                let classifier = match kind {
                    "tree" => {
                        let file = parts.next().ok_or_else(|| bad("missing member path".into()))?;
                        WeakClassifier::Tree(load_tree_file(&dir.join(file))?)
                    }
                    "net" => {
                        let file = parts.next().ok_or_else(|| bad("missing member path".into()))?;
                        let (spec, params, _) = load_network_file(&dir.join(file))?;
                        WeakClassifier::Network(spec, params)
                    }
                    "constant" => {
                        let dist: Vec<f64> = parts
                            .map(|v| v.parse().map_err(|_| bad("bad constant value".into())))
                            .collect::<Result<_>>()?;
                        WeakClassifier::Constant(dist)
                    }
                    other => return Err(bad(format!("unknown member kind {other}"))),
                };
                members.push(EnsembleMember {
                    alpha,
                    clamp,
                    classifier,
                });
            }
            None => {}
            Some(other) => return Err(bad(format!("unknown manifest field {other}"))),
        }
    }
    Ok(Ensemble {
        algorithm: algorithm.ok_or_else(|| bad("missing algorithm".into()))?,
        alpha_rule: alpha_rule.ok_or_else(|| bad("missing alpha_rule".into()))?,
        reset_mode: reset_mode.ok_or_else(|| bad("missing reset".into()))?,
        num_classes,
        members,
        filters,
    })
}

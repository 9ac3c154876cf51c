//! Run-directory output: metrics CSV, manifest, config echo.

use std::fmt::Write as _;
use std::path::Path;

use boostlab::boosting::RoundRecord;

use crate::CliError;

/// Fixed per-round CSV schema; columns are never reordered.
pub const METRICS_HEADER: &str = "round,r_t,alpha,weighted_error,train_acc,test_acc,cum_params";

pub fn metrics_csv(records: &[RoundRecord], cum_params: &[usize]) -> String {
    let mut out = String::from(METRICS_HEADER);
    out.push('\n');
    for (r, params) in records.iter().zip(cum_params) {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.round, r.r_t, r.alpha, r.weighted_error, r.train_acc, r.test_acc, params
        );
    }
    out
}

pub fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)
            .map_err(|e| CliError::runtime(format!("cannot create {}: {e}", parent.display())))?;
    }
    std::fs::write(path, contents)
        .map_err(|e| CliError::runtime(format!("cannot write {}: {e}", path.display())))
}

/// Key-value manifest recording everything needed to reproduce a run.
pub struct Manifest {
    entries: Vec<(String, String)>,
}

impl Manifest {
    pub fn new(command: &str, seed: u64) -> Self {
        let mut m = Manifest { entries: Vec::new() };
        m.push("format", "boostlab-run v1");
        m.push("version", env!("CARGO_PKG_VERSION"));
        m.push("command", command);
        m.push("seed", seed.to_string());
        m.push("round_seed_rule", "splitmix64(seed + round * 0x9E3779B97F4A7C15)");
        m
    }

    pub fn push(&mut self, key: &str, value: impl Into<String>) {
        self.entries.push((key.to_string(), value.into()));
    }

    pub fn write(&self, dir: &Path) -> Result<(), CliError> {
        let mut text = String::new();
        for (k, v) in &self.entries {
            let _ = writeln!(text, "{k} = {v}");
        }
        write_file(&dir.join("manifest.txt"), &text)
    }
}

/// Mean/stddev summary over repeated runs, one row per round.
pub fn summary_csv(all_records: &[Vec<RoundRecord>]) -> String {
    let mut out = String::from(
        "round,r_t_mean,r_t_std,alpha_mean,alpha_std,weighted_error_mean,weighted_error_std,train_acc_mean,train_acc_std,test_acc_mean,test_acc_std",
    );
    out.push('\n');
    let rounds = all_records.iter().map(Vec::len).min().unwrap_or(0);
    for i in 0..rounds {
        let column = |f: &dyn Fn(&RoundRecord) -> f64| -> (f64, f64) {
            let vals: Vec<f64> = all_records.iter().map(|r| f(&r[i])).collect();
            mean_std(&vals)
        };
        let (rm, rs) = column(&|r| r.r_t);
        let (am, as_) = column(&|r| r.alpha);
        let (wm, ws) = column(&|r| r.weighted_error);
        let (tm, ts) = column(&|r| r.train_acc);
        let (em, es) = column(&|r| r.test_acc);
        let _ = writeln!(
            out,
            "{},{rm},{rs},{am},{as_},{wm},{ws},{tm},{ts},{em},{es}",
            i + 1
        );
    }
    out
}

fn mean_std(vals: &[f64]) -> (f64, f64) {
    let n = vals.len() as f64;
    let mean = vals.iter().sum::<f64>() / n;
    let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(round: usize, acc: f64) -> RoundRecord {
        RoundRecord {
            round,
            r_t: 0.5,
            alpha: 0.6,
            weighted_error: 0.2,
            train_acc: acc,
            test_acc: acc - 0.1,
        }
    }

    #[test]
    fn metrics_csv_has_exact_header() {
        let csv = metrics_csv(&[record(1, 0.9)], &[829]);
        let mut lines = csv.lines();
        assert_eq!(
            lines.next(),
            Some("round,r_t,alpha,weighted_error,train_acc,test_acc,cum_params")
        );
        assert_eq!(lines.next(), Some("1,0.5,0.6,0.2,0.9,0.8,829"));
    }

    #[test]
    fn summary_aggregates_over_repeats() {
        let a = vec![record(1, 0.8), record(2, 0.9)];
        let b = vec![record(1, 0.6), record(2, 1.0)];
        let csv = summary_csv(&[a, b]);
        let row: Vec<&str> = csv.lines().nth(1).unwrap().split(',').collect();
        assert_eq!(row[0], "1");
        let train_mean: f64 = row[7].parse().unwrap();
        assert!((train_mean - 0.7).abs() < 1e-12);
    }
}

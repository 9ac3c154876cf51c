//! Experiment harness for the boostlab ensemble laboratory.
//!
//! Exit codes: 0 success, 1 validation error, 2 runtime error,
//! 3 verification failure.

mod commands;
mod config;
mod datasets;
mod learners;
mod report;

use std::path::PathBuf;

use config::ExperimentConfig;

#[derive(Debug)]
pub enum CliError {
    Validation(String),
    Runtime(String),
    Verification(String),
}

impl CliError {
    pub fn validation(msg: String) -> Self {
        CliError::Validation(msg)
    }

    pub fn runtime(msg: String) -> Self {
        CliError::Runtime(msg)
    }

    pub fn verification(msg: String) -> Self {
        CliError::Verification(msg)
    }

    pub fn validation_from(e: impl std::fmt::Display) -> Self {
        CliError::Validation(e.to_string())
    }

    pub fn runtime_from(e: impl std::fmt::Display) -> Self {
        CliError::Runtime(e.to_string())
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Runtime(_) => 2,
            CliError::Verification(_) => 3,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Validation(m) => write!(f, "validation error: {m}"),
            CliError::Runtime(m) => write!(f, "runtime error: {m}"),
            CliError::Verification(m) => write!(f, "verification failure: {m}"),
        }
    }
}

const USAGE: &str = "\
boostlab - multi-class boosting laboratory

USAGE:
    boostlab <SUBCOMMAND> [FLAGS]

SUBCOMMANDS:
    budget        width schedules and parameter counts per ensemble size
    boost         run a boosting/averaging experiment from a config
    compare       ensemble vs parameter-matched single models, per round
    merge-verify  compose random networks into one and verify the sum
    train-tree    grow and save a single decision tree
    train-net     train and save a single network
    eval          evaluate a saved model on a dataset

FLAGS:
    --config PATH         experiment config file
    --seed U64            global seed (default 7)
    --out DIR             output directory
    --repeats R           repeated runs with derived seeds (boost)
    --workers W           concurrent repeats (default: available cores)
    --family NAME         cnn3 | mlp2 | vgg8 (budget, merge-verify)
    --classes C           class count (budget, merge-verify; default 10)
    --rounds T            table rows (budget; default 10)
    --sources N           source networks to merge (default 2)
    --inputs N            verification inputs (default 100)
    --tolerance X         max relative error (default 1e-10)
    --model PATH          model to evaluate (eval)
    --csv                 CSV output (budget)
    --verify-paper        check budget tables against the published values
    --corrupt-self-test   corrupt the merge on purpose (expects exit 3)
";

struct Flags {
    config: Option<PathBuf>,
    seed: u64,
    out: Option<PathBuf>,
    repeats: usize,
    workers: usize,
    family: Option<String>,
    classes: usize,
    rounds: usize,
    sources: usize,
    inputs: usize,
    tolerance: f64,
    model: Option<PathBuf>,
    csv: bool,
    verify_paper: bool,
    corrupt_self_test: bool,
}

impl Default for Flags {
    fn default() -> Self {
        Flags {
            config: None,
            seed: 7,
            out: None,
            repeats: 1,
            workers: std::thread::available_parallelism().map_or(1, |n| n.get()),
            family: None,
            classes: 10,
            rounds: 10,
            sources: 2,
            inputs: 100,
            tolerance: 1e-10,
            model: None,
            csv: false,
            verify_paper: false,
            corrupt_self_test: false,
        }
    }
}

fn parse_flags(args: &[String]) -> Result<Flags, CliError> {
    let mut flags = Flags::default();
    let mut it = args.iter();
    while let Some(arg) = it.next() {
        let mut value = |name: &str| -> Result<&String, CliError> {
            it.next()
                .ok_or_else(|| CliError::validation(format!("{name} needs a value")))
        };
        match arg.as_str() {
            "--config" => flags.config = Some(PathBuf::from(value("--config")?)),
            "--seed" => {
                flags.seed = value("--seed")?
                    .parse()
                    .map_err(|_| CliError::validation("--seed needs a u64".into()))?
            }
            "--out" => flags.out = Some(PathBuf::from(value("--out")?)),
            "--repeats" => {
                flags.repeats = value("--repeats")?
                    .parse()
                    .map_err(|_| CliError::validation("--repeats needs an integer".into()))?
            }
            "--workers" => {
                flags.workers = value("--workers")?
                    .parse()
                    .map_err(|_| CliError::validation("--workers needs an integer".into()))?
            }
            "--family" => flags.family = Some(value("--family")?.clone()),
            "--classes" => {
                flags.classes = value("--classes")?
                    .parse()
                    .map_err(|_| CliError::validation("--classes needs an integer".into()))?
            }
            "--rounds" => {
                flags.rounds = value("--rounds")?
                    .parse()
                    .map_err(|_| CliError::validation("--rounds needs an integer".into()))?
            }
            "--sources" => {
                flags.sources = value("--sources")?
                    .parse()
                    .map_err(|_| CliError::validation("--sources needs an integer".into()))?
            }
            "--inputs" => {
                flags.inputs = value("--inputs")?
                    .parse()
                    .map_err(|_| CliError::validation("--inputs needs an integer".into()))?
            }
            "--tolerance" => {
                flags.tolerance = value("--tolerance")?
                    .parse()
                    .map_err(|_| CliError::validation("--tolerance needs a float".into()))?
            }
            "--model" => flags.model = Some(PathBuf::from(value("--model")?)),
            "--csv" => flags.csv = true,
            "--verify-paper" => flags.verify_paper = true,
            "--corrupt-self-test" => flags.corrupt_self_test = true,
            other => return Err(CliError::validation(format!("unknown flag {other}"))),
        }
    }
    Ok(flags)
}

fn load_config(flags: &Flags) -> Result<ExperimentConfig, CliError> {
    let path = flags
        .config
        .as_ref()
        .ok_or_else(|| CliError::validation("--config is required for this subcommand".into()))?;
    ExperimentConfig::load(path)
}

fn dispatch(subcommand: &str, flags: Flags) -> Result<(), CliError> {
    match subcommand {
        "budget" => commands::budget::run(&commands::budget::BudgetArgs {
            family: flags.family.clone(),
            classes: flags.classes,
            rounds: flags.rounds,
            csv: flags.csv,
            verify_paper: flags.verify_paper,
        }),
        "boost" => {
            let cfg = load_config(&flags)?;
            let out = commands::boost::resolve_out_dir(&cfg, &flags.out, "runs/boost");
            commands::boost::run(&cfg, flags.seed, &out, flags.repeats, flags.workers)
        }
        "compare" => {
            let cfg = load_config(&flags)?;
            let out = commands::boost::resolve_out_dir(&cfg, &flags.out, "runs/compare");
            commands::compare::run(&cfg, flags.seed, &out)
        }
        "merge-verify" => {
            let out = flags.out.clone().unwrap_or_else(|| PathBuf::from("runs/merge"));
            commands::merge::run(
                &commands::merge::MergeArgs {
                    family: flags.family.clone().unwrap_or_else(|| "cnn3".into()),
                    classes: flags.classes,
                    sources: flags.sources,
                    inputs: flags.inputs,
                    tolerance: flags.tolerance,
                    corrupt_self_test: flags.corrupt_self_test,
                },
                flags.seed,
                &out,
            )
        }
        "train-tree" => {
            let cfg = load_config(&flags)?;
            let out = commands::boost::resolve_out_dir(&cfg, &flags.out, "runs/tree");
            commands::models::train_tree(&cfg, flags.seed, &out)
        }
        "train-net" => {
            let cfg = load_config(&flags)?;
            let out = commands::boost::resolve_out_dir(&cfg, &flags.out, "runs/net");
            commands::models::train_net(&cfg, flags.seed, &out)
        }
        "eval" => {
            let cfg = load_config(&flags)?;
            let model = flags
                .model
                .clone()
                .ok_or_else(|| CliError::validation("--model is required for eval".into()))?;
            commands::models::eval(&model, &cfg, flags.seed)
        }
        other => Err(CliError::validation(format!("unknown subcommand {other}"))),
    }
}

fn main() {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let Some((subcommand, rest)) = args.split_first() else {
        eprint!("{USAGE}");
        std::process::exit(1);
    };
    if subcommand == "--help" || subcommand == "-h" || subcommand == "help" {
        print!("{USAGE}");
        return;
    }
    let code = match parse_flags(rest).and_then(|flags| dispatch(subcommand, flags)) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{e}");
            e.exit_code()
        }
    };
    std::process::exit(code);
}

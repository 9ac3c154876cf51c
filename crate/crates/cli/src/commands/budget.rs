//! `budget` subcommand: width schedules and parameter counts for matching
//! single models to ensembles, plus verification against the published
//! tables.

use boostlab::budget::{emit_budget_table, verify_published_tables, BudgetRequest, Family};

use crate::CliError;

pub struct BudgetArgs {
    pub family: Option<String>,
    pub classes: usize,
    pub rounds: usize,
    pub csv: bool,
    pub verify_paper: bool,
}

pub fn run(args: &BudgetArgs) -> Result<(), CliError> {
    if args.verify_paper {
        let mismatches = verify_published_tables().map_err(CliError::runtime_from)?;
        for family in ["cnn3", "mlp2", "vgg8"] {
            for classes in [10, 100] {
                let bad = mismatches
                    .iter()
                    .filter(|m| m.starts_with(&format!("{family} C={classes}")))
                    .count();
                println!(
                    "{family} C={classes}: {}",
                    if bad == 0 { "PASS".to_string() } else { format!("FAIL ({bad} rows)") }
                );
            }
        }
        if !mismatches.is_empty() {
            for m in &mismatches {
                eprintln!("mismatch: {m}");
            }
            return Err(CliError::verification(format!(
                "{} rows differ from the published tables",
                mismatches.len()
            )));
        }
        return Ok(());
    }

    let families: Vec<Family> = match args.family.as_deref() {
        None | Some("all") => vec![Family::Cnn3, Family::Mlp2, Family::Vgg8],
        Some(name) => vec![Family::parse(name).map_err(CliError::validation_from)?],
    };
    for family in families {
        let request = BudgetRequest::standard(family, args.classes);
        let rows = emit_budget_table(&request, args.rounds).map_err(CliError::runtime_from)?;
        if args.csv {
            println!("family,classes,round,ensemble_params,single_widths,single_params");
            for row in &rows {
                let widths: Vec<String> = row.single_widths.iter().map(|w| w.to_string()).collect();
                println!(
                    "{},{},{},{},{},{}",
                    family.name(),
                    args.classes,
                    row.round,
                    row.ensemble_params,
                    widths.join("x"),
                    row.single_params
                );
            }
        } else {
            println!("{} (C = {}):", family.name(), args.classes);
            println!("{:>6} {:>16} {:>26} {:>14}", "round", "ensemble params", "single widths", "single params");
            for row in &rows {
                println!(
                    "{:>6} {:>16} {:>26} {:>14}",
                    row.round,
                    row.ensemble_params,
                    format!("{:?}", row.single_widths),
                    row.single_params
                );
            }
            println!();
        }
    }
    Ok(())
}

//! `merge-verify` subcommand: builds seeded source networks of one family,
//! merges them, audits parameter conservation, and verifies numerically.

use std::fmt::Write as _;
use std::path::Path;

use boostlab::budget::Family;
use boostlab::merge::{build_mask, merge_networks, merged_param_audit, verify_merge};
use boostlab::nn::{cnn3_spec, mlp2_spec, save_network_file, vgg8_spec, NetworkParams, NetworkSpec};
use boostlab::rng::mix_seed;

use crate::report::{write_file, Manifest};
use crate::CliError;

pub struct MergeArgs {
    pub family: String,
    pub classes: usize,
    pub sources: usize,
    pub inputs: usize,
    pub tolerance: f64,
    pub corrupt_self_test: bool,
}

/// Source architecture for a merge run. Biases stay on for vgg8 except the
/// logit layer, where a shared bias slot would break exact parameter
/// conservation across summed sources.
pub fn family_spec(family: Family, classes: usize) -> Result<NetworkSpec, CliError> {
    let shape = (32, 32, 3);
    match family {
        Family::Cnn3 => cnn3_spec([6, 16, 32], shape, classes, false),
        Family::Mlp2 => mlp2_spec([128, 128], shape, classes, false),
        Family::Vgg8 => vgg8_spec([6, 16, 32, 64, 64], shape, classes, true, false),
    }
    .map_err(CliError::runtime_from)
}

pub fn run(args: &MergeArgs, seed: u64, dir: &Path) -> Result<(), CliError> {
    if args.sources < 1 {
        return Err(CliError::validation("need at least one source network".into()));
    }
    let family = Family::parse(&args.family).map_err(CliError::validation_from)?;
    let spec = family_spec(family, args.classes)?;
    let nets: Vec<(NetworkSpec, NetworkParams)> = (0..args.sources)
        .map(|i| (spec.clone(), NetworkParams::init(&spec, mix_seed(seed, i as u64))))
        .collect();
    let refs: Vec<(&NetworkSpec, &NetworkParams)> = nets.iter().map(|(s, p)| (s, p)).collect();
    let (plan, mut merged_params) = merge_networks(&refs).map_err(CliError::runtime_from)?;
    if args.corrupt_self_test {
        merged_params.layers[0].weights.data_mut()[0] += 0.5;
    }
    let audit = merged_param_audit(&plan);
    let report = verify_merge(
        &refs,
        &plan.merged,
        &merged_params,
        args.inputs,
        mix_seed(seed, 0xF00),
        args.tolerance,
    )
    .map_err(CliError::runtime_from)?;

    let source_total: usize = nets.iter().map(|(_, p)| p.param_count()).sum();
    let conserved = audit.trainable == source_total;

    let mut text = String::new();
    let _ = writeln!(text, "family = {}", family.name());
    let _ = writeln!(text, "classes = {}", args.classes);
    let _ = writeln!(text, "sources = {}", args.sources);
    let _ = writeln!(text, "source_params_total = {source_total}");
    let _ = writeln!(text, "merged_trainable = {}", audit.trainable);
    let _ = writeln!(text, "merged_structural_zeros = {}", audit.structural_zeros);
    let _ = writeln!(text, "merged_dense = {}", audit.dense);
    let _ = writeln!(text, "param_conservation = {}", if conserved { "pass" } else { "fail" });
    let _ = writeln!(text, "inputs = {}", report.inputs_checked);
    let _ = writeln!(text, "max_rel_error = {:e}", report.max_rel_error);
    let _ = writeln!(text, "tolerance = {:e}", report.tolerance);
    let _ = writeln!(text, "verification = {}", if report.pass { "pass" } else { "fail" });
    print!("{text}");
    write_file(&dir.join("merge_report.txt"), &text)?;
    save_network_file(
        &dir.join("merged.blnn"),
        &plan.merged,
        &merged_params,
        Some(&build_mask(&plan)),
    )
    .map_err(CliError::runtime_from)?;
    let mut manifest = Manifest::new("merge-verify", seed);
    manifest.push("family", family.name());
    manifest.push("corrupt_self_test", args.corrupt_self_test.to_string());
    manifest.write(dir)?;

    if !report.pass || !conserved {
        return Err(CliError::verification(format!(
            "merge verification failed: max rel error {:e}, conservation {}",
            report.max_rel_error, conserved
        )));
    }
    Ok(())
}

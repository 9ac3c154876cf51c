//! wasm-bindgen surface for the browser demo: three interactive operations
//! returning JSON for a static page to render.
//!
//! The heavy lifting stays in the core crate; this layer generates small
//! demo problems, runs them, and serializes the results. Everything is
//! seeded, so the page is fully reproducible.

use serde::Serialize;
use wasm_bindgen::prelude::*;

use boostlab::boosting::{boost, BoostConfig, TreeLearner};
use boostlab::budget::{emit_budget_table, BudgetRequest, Family};
use boostlab::data::{split_train_test, synth_blobs};
use boostlab::haar::{generate_filter_bank, IntegralImage};
use boostlab::merge::{merge_networks, merged_param_audit, verify_merge};
use boostlab::nn::{argmax_class, forward, NetworkParams, NetworkSpec};
use boostlab::rng::{mix_seed, Rng};
use boostlab::tensor::Tensor;
use boostlab::tree::SplitObjective;

#[derive(Serialize)]
struct BlobPoint {
    x: u8,
    y: u8,
    label: usize,
    test: bool,
}

#[derive(Serialize)]
struct BlobRound {
    round: usize,
    alpha: f64,
    r_t: f64,
    weighted_error: f64,
    train_acc: f64,
    test_acc: f64,
    /// D_t over the training points, in point order.
    weights: Vec<f64>,
    /// grid x grid predicted labels of the ensemble after this round,
    /// row-major with y growing downward.
    regions: Vec<u8>,
}

#[derive(Serialize)]
struct BlobDemo {
    classes: usize,
    grid: usize,
    points: Vec<BlobPoint>,
    rounds: Vec<BlobRound>,
    halt: Option<String>,
}

/// Boosts small Haar-filter trees over 2-d "images" (two pixels = a point
/// in [0,255]^2) and reports per-round weights, metrics, and decision
/// regions for drawing.
#[allow(clippy::too_many_arguments)]
pub fn boost_blobs_json(
    classes: usize,
    per_class: usize,
    separation: f64,
    leaves: usize,
    rounds: usize,
    seed: u64,
    grid: usize,
) -> Result<String, String> {
    let classes = classes.clamp(2, 6);
    let per_class = per_class.clamp(4, 400);
    let leaves = leaves.clamp(2, 32);
    let rounds = rounds.clamp(1, 30);
    let grid = grid.clamp(16, 128);

    let all = synth_blobs(classes, per_class + per_class / 2, (1, 2, 1), separation, seed)
        .map_err(|e| e.to_string())?;
    let (train, test) = split_train_test(&all, per_class).map_err(|e| e.to_string())?;

    let bank = generate_filter_bank((1, 2), 1, 1, 24, mix_seed(seed, 0xDE30))
        .map_err(|e| e.to_string())?;
    let learner = TreeLearner::new(&bank, leaves, SplitObjective::WeightedMass);
    let config = BoostConfig::adaboost(rounds, seed);
    let outcome = boost(&learner, &train, Some(&test), &config).map_err(|e| e.to_string())?;

    let mut points: Vec<BlobPoint> = Vec::with_capacity(train.len() + test.len());
    for (data, is_test) in [(&train, false), (&test, true)] {
        for i in 0..data.len() {
            let raw = data.raw_image(i);
            points.push(BlobPoint {
                x: raw[0],
                y: raw[1],
                label: data.label(i),
                test: is_test,
            });
        }
    }

    // decision regions of the growing ensemble, one raster per round
    let filters = outcome
        .ensemble
        .filters
        .as_ref()
        .map(|b| b.filters.clone())
        .unwrap_or_default();
    let cell = 256.0 / grid as f64;
    let mut blob_rounds = Vec::with_capacity(outcome.records.len());
    for (t, record) in outcome.records.iter().enumerate() {
        let mut regions = Vec::with_capacity(grid * grid);
        for gy in 0..grid {
            for gx in 0..grid {
                let px = ((gx as f64 + 0.5) * cell) as u8;
                let py = ((gy as f64 + 0.5) * cell) as u8;
                let ii = IntegralImage::from_raw(&[px, py], 1, 2, 1);
                let mut score = vec![0.0; classes];
                for member in &outcome.ensemble.members[..=t] {
                    if let boostlab::boosting::WeakClassifier::Tree(tree) = &member.classifier {
                        let dist = tree.predict(&filters, &ii).map_err(|e| e.to_string())?;
                        for (s, p) in score.iter_mut().zip(&dist) {
                            *s += member.alpha * p;
                        }
                    }
                }
                regions.push(argmax_class(&score) as u8);
            }
        }
        blob_rounds.push(BlobRound {
            round: record.round,
            alpha: record.alpha,
            r_t: record.r_t,
            weighted_error: record.weighted_error,
            train_acc: record.train_acc,
            test_acc: record.test_acc,
            weights: outcome.weights_per_round[t].clone(),
            regions,
        });
    }

    let demo = BlobDemo {
        classes,
        grid,
        points,
        rounds: blob_rounds,
        halt: outcome.halt.map(|h| h.to_string()),
    };
    serde_json::to_string(&demo).map_err(|e| e.to_string())
}

#[derive(Serialize)]
struct BudgetRowJson {
    round: usize,
    ensemble_params: usize,
    single_widths: Vec<usize>,
    single_params: usize,
}

#[derive(Serialize)]
struct BudgetJson {
    family: String,
    classes: usize,
    c_factor: f64,
    rows: Vec<BudgetRowJson>,
}

/// Emits the width/parameter table pairing ensembles of 1..=rounds members
/// with single models. `c_factor <= 0` selects the published constant.
pub fn budget_table_json(
    family: &str,
    classes: usize,
    rounds: usize,
    c_factor: f64,
) -> Result<String, String> {
    let family = Family::parse(family).map_err(|e| e.to_string())?;
    let mut request = BudgetRequest::standard(family, classes.clamp(2, 1000));
    if c_factor > 0.0 {
        request.c_factor = c_factor;
    }
    let rows = emit_budget_table(&request, rounds.clamp(1, 50)).map_err(|e| e.to_string())?;
    let json = BudgetJson {
        family: family.name().to_string(),
        classes: request.num_classes,
        c_factor: request.c_factor,
        rows: rows
            .into_iter()
            .map(|r| BudgetRowJson {
                round: r.round,
                ensemble_params: r.ensemble_params,
                single_widths: r.single_widths,
                single_params: r.single_params,
            })
            .collect(),
    };
    serde_json::to_string(&json).map_err(|e| e.to_string())
}

#[derive(Serialize)]
struct MergeJson {
    family: String,
    sources: usize,
    source_params_total: usize,
    merged_trainable: usize,
    merged_structural_zeros: usize,
    merged_dense: usize,
    conserved: bool,
    inputs_checked: usize,
    max_rel_error: f64,
    pass: bool,
    /// Logits on one shared random input: per source, their sum, and the
    /// merged network's output.
    sample_source_logits: Vec<Vec<f64>>,
    sample_sum: Vec<f64>,
    sample_merged: Vec<f64>,
}

/// Merges seeded random networks of a small family variant and verifies the
/// construction numerically.
pub fn merge_demo_json(family: &str, sources: usize, inputs: usize, seed: u64) -> Result<String, String> {
    let family = Family::parse(family).map_err(|e| e.to_string())?;
    let sources = sources.clamp(1, 4);
    let inputs = inputs.clamp(1, 200);
    // scaled-down variants keep the demo instant in the browser
    let spec = match family {
        Family::Cnn3 => boostlab::nn::cnn3_spec([4, 8, 12], (22, 22, 3), 10, false),
        Family::Mlp2 => boostlab::nn::mlp2_spec([32, 32], (8, 8, 3), 10, false),
        Family::Vgg8 => boostlab::nn::vgg8_spec([3, 5, 8, 10, 10], (32, 32, 3), 10, true, false),
    }
    .map_err(|e| e.to_string())?;
    let nets: Vec<(NetworkSpec, NetworkParams)> = (0..sources)
        .map(|i| (spec.clone(), NetworkParams::init(&spec, mix_seed(seed, i as u64))))
        .collect();
    let refs: Vec<(&NetworkSpec, &NetworkParams)> = nets.iter().map(|(s, p)| (s, p)).collect();
    let (plan, merged_params) = merge_networks(&refs).map_err(|e| e.to_string())?;
    let audit = merged_param_audit(&plan);
    let report = verify_merge(&refs, &plan.merged, &merged_params, inputs, mix_seed(seed, 0xF00), 1e-10)
        .map_err(|e| e.to_string())?;

    let (h, w, c) = spec.input_shape;
    let mut rng = Rng::new(mix_seed(seed, 0x5A3));
    let mut input = Tensor::zeros(&[h, w, c]);
    for v in input.data_mut() {
        *v = rng.normal();
    }
    let mut sample_source_logits = Vec::with_capacity(sources);
    let mut sample_sum = vec![0.0; spec.num_classes];
    for (s, p) in &refs {
        let logits = forward(s, p, &input).map_err(|e| e.to_string())?;
        for (acc, v) in sample_sum.iter_mut().zip(&logits) {
            *acc += v;
        }
        sample_source_logits.push(logits);
    }
    let sample_merged = forward(&plan.merged, &merged_params, &input).map_err(|e| e.to_string())?;

    let source_params_total: usize = nets.iter().map(|(_, p)| p.param_count()).sum();
    let json = MergeJson {
        family: family.name().to_string(),
        sources,
        source_params_total,
        merged_trainable: audit.trainable,
        merged_structural_zeros: audit.structural_zeros,
        merged_dense: audit.dense,
        conserved: audit.trainable == source_params_total,
        inputs_checked: report.inputs_checked,
        max_rel_error: report.max_rel_error,
        pass: report.pass,
        sample_source_logits,
        sample_sum,
        sample_merged,
    };
    serde_json::to_string(&json).map_err(|e| e.to_string())
}

// wasm-bindgen exports; errors surface as rejected strings

#[wasm_bindgen]
pub fn boost_blobs(
    classes: usize,
    per_class: usize,
    separation: f64,
    leaves: usize,
    rounds: usize,
    seed: u64,
    grid: usize,
) -> Result<String, JsValue> {
    boost_blobs_json(classes, per_class, separation, leaves, rounds, seed, grid)
        .map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn budget_table(family: &str, classes: usize, rounds: usize, c_factor: f64) -> Result<String, JsValue> {
    budget_table_json(family, classes, rounds, c_factor).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn merge_demo(family: &str, sources: usize, inputs: usize, seed: u64) -> Result<String, JsValue> {
    merge_demo_json(family, sources, inputs, seed).map_err(|e| JsValue::from_str(&e))
}

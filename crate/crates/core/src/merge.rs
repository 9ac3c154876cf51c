//! Composition of several networks into one larger network computing their
//! exact output sum, plus the enumeration demo showing that decision-tree
//! sums escape any same-budget single tree.
//!
//! The construction runs the sources "in parallel": the first parametric
//! layer concatenates output channels, deeper layers become block-diagonal
//! with structural zeros (non-connections) between sources, and the final
//! layer concatenates along its input while the outputs add up. Channel-wise
//! layers (ReLU, pooling, global average pooling, reshape) commute with the
//! concatenation.

use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::haar::{HaarFilter, IntegralImage, Rect};
use crate::nn::{forward, ConnectionMask, LayerSpec, MaskLayer, NetworkParams, NetworkSpec};
use crate::rng::Rng;
use crate::tensor::Tensor;
use crate::tree::{DecisionTree, Node};

/// Where a parametric layer sits in the construction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LayerRole {
    /// Consumes the shared input; outputs concatenate.
    First,
    /// Internal: block-diagonal between concatenated activations.
    Middle,
    /// Produces the logits; inputs concatenate, outputs add.
    Final,
}

/// Placement of one source's weights inside a merged parametric layer.
///
/// In channel/unit space the block spans `out_offset..out_offset+out_len`
/// by `in_offset..in_offset+in_len`. When the layer input is a flattened
/// spatial map, the same channel block repeats at `spatial` positions with
/// stride `in_total` (the merged channel count).
#[derive(Debug, Clone)]
pub struct SourceBlock {
    pub source: usize,
    pub out_offset: usize,
    pub out_len: usize,
    pub in_offset: usize,
    pub in_len: usize,
    pub spatial: usize,
    pub in_total: usize,
}

#[derive(Debug, Clone)]
pub struct LayerPlan {
    pub role: LayerRole,
    pub blocks: Vec<SourceBlock>,
}

/// The merged architecture and the per-layer placement map.
#[derive(Debug, Clone)]
pub struct MergePlan {
    pub sources: Vec<NetworkSpec>,
    pub merged: NetworkSpec,
    pub layers: Vec<LayerPlan>,
}

/// Builds one network computing `sum_k forward_k(x)`.
///
/// Sources must share input shape and class count and have positionally
/// compatible layer sequences (kinds, kernels, strides, padding, pooling and
/// bias flags equal; widths free). A biased final layer is rejected for
/// multi-source merges: the summed output leaves one bias slot for several
/// source vectors, so exact parameter conservation would be lost.
pub fn merge_networks(nets: &[(&NetworkSpec, &NetworkParams)]) -> Result<(MergePlan, NetworkParams)> {
    if nets.is_empty() {
        return Err(Error::InvalidArgument("merge of zero networks".into()));
    }
    for (spec, params) in nets {
        params.matches(spec)?;
    }
    let first = nets[0].0;
    for (i, (spec, _)) in nets.iter().enumerate().skip(1) {
        if spec.input_shape != first.input_shape {
            return Err(Error::MergeIncompatible {
                layer: 0,
                reason: format!("source {i} input shape differs"),
            });
        }
        if spec.num_classes != first.num_classes {
            return Err(Error::MergeIncompatible {
                layer: 0,
                reason: format!("source {i} class count differs"),
            });
        }
        if spec.layers.len() != first.layers.len() {
            return Err(Error::MergeIncompatible {
                layer: first.layers.len().min(spec.layers.len()),
                reason: format!(
                    "source {i} has {} layers, source 0 has {}",
                    spec.layers.len(),
                    first.layers.len()
                ),
            });
        }
    }

    let parametric_positions: Vec<usize> = first.parametric_layers();
    if nets.len() > 1 && parametric_positions.len() < 2 {
        return Err(Error::MergeIncompatible {
            layer: 0,
            reason: "need at least two parametric layers to both concatenate and re-sum".into(),
        });
    }
    let last_parametric = *parametric_positions.last().unwrap_or(&0);

    // walk the layer list building the merged spec and the placement map
    let mut merged_layers = Vec::with_capacity(first.layers.len());
    let mut plans = Vec::new();
    // per-source (offset, width) in the current concatenated channel space;
    // None while the value is still the shared input
    let mut segments: Option<Vec<(usize, usize)>> = None;
    // spatial positions per channel when the value is a flattened map
    let mut flat_spatial = 1usize;

    for (pos, layer0) in first.layers.iter().enumerate() {
        let aligned: Vec<&LayerSpec> = nets.iter().map(|(s, _)| &s.layers[pos]).collect();
        let incompatible = |reason: String| Error::MergeIncompatible { layer: pos, reason };

        match layer0 {
            LayerSpec::Conv { kernel, stride, padding, bias, .. } => {
                let mut widths = Vec::with_capacity(nets.len());
                for (i, l) in aligned.iter().enumerate() {
                    match l {
                        LayerSpec::Conv {
                            kernel: k2,
                            stride: s2,
                            padding: p2,
                            bias: b2,
                            out_channels,
                            ..
                        } => {
                            if (k2, s2, p2, b2) != (kernel, stride, padding, bias) {
                                return Err(incompatible(format!(
                                    "source {i} conv geometry differs"
                                )));
                            }
                            widths.push(*out_channels);
                        }
                        other => {
                            return Err(incompatible(format!(
                                "source {i} has {} where source 0 has conv",
                                kind_of(other)
                            )))
                        }
                    }
                }
                let role = role_of(pos, &parametric_positions, last_parametric, nets.len());
                if role == LayerRole::Final && *bias && nets.len() > 1 {
                    return Err(incompatible(
                        "final-layer bias cannot be conserved across summed outputs".into(),
                    ));
                }
                let (in_total, blocks, out_total) =
                    plan_blocks(role, &segments, &widths, first, 1, nets.len())?;
                merged_layers.push(LayerSpec::Conv {
                    kernel: *kernel,
                    in_channels: in_total,
                    out_channels: out_total,
                    stride: *stride,
                    padding: *padding,
                    bias: *bias,
                });
                plans.push(LayerPlan { role, blocks });
                segments = Some(segment_offsets(&widths, role));
            }
            LayerSpec::FullyConnected { bias, .. } => {
                let mut widths = Vec::with_capacity(nets.len());
                for (i, l) in aligned.iter().enumerate() {
                    match l {
                        LayerSpec::FullyConnected { bias: b2, out_dim, .. } => {
                            if b2 != bias {
                                return Err(incompatible(format!("source {i} fc bias flag differs")));
                            }
                            widths.push(*out_dim);
                        }
                        other => {
                            return Err(incompatible(format!(
                                "source {i} has {} where source 0 has fc",
                                kind_of(other)
                            )))
                        }
                    }
                }
                let role = role_of(pos, &parametric_positions, last_parametric, nets.len());
                if role == LayerRole::Final && *bias && nets.len() > 1 {
                    return Err(incompatible(
                        "final-layer bias cannot be conserved across summed outputs".into(),
                    ));
                }
                let (in_total, blocks, out_total) =
                    plan_blocks(role, &segments, &widths, first, flat_spatial, nets.len())?;
                merged_layers.push(LayerSpec::fc(in_total * flat_spatial, out_total, *bias));
                plans.push(LayerPlan { role, blocks });
                segments = Some(segment_offsets(&widths, role));
                flat_spatial = 1;
            }
            LayerSpec::ReLU => {
                require_same_kind(&aligned, pos)?;
                merged_layers.push(LayerSpec::ReLU);
            }
            LayerSpec::MaxPool { window, stride } => {
                for (i, l) in aligned.iter().enumerate() {
                    if !matches!(l, LayerSpec::MaxPool { window: w2, stride: s2 } if w2 == window && s2 == stride)
                    {
                        return Err(incompatible(format!("source {i} pooling geometry differs")));
                    }
                }
                merged_layers.push(LayerSpec::MaxPool {
                    window: *window,
                    stride: *stride,
                });
            }
            LayerSpec::GlobalAvgPool => {
                require_same_kind(&aligned, pos)?;
                merged_layers.push(LayerSpec::GlobalAvgPool);
                flat_spatial = 1;
            }
            LayerSpec::Reshape => {
                require_same_kind(&aligned, pos)?;
                merged_layers.push(LayerSpec::Reshape);
                // flattening a spatial map interleaves the concatenated
                // channels at every position; record the spatial extent
                let flow = sub_spec_flow(first, pos)?;
                flat_spatial = match flow {
                    crate::nn::ValueShape::Spatial { h, w, .. } => h * w,
                    crate::nn::ValueShape::Flat(_) => 1,
                };
            }
        }
    }

    let merged = NetworkSpec::new(merged_layers, first.input_shape, first.num_classes)?;
    let plan = MergePlan {
        sources: nets.iter().map(|(s, _)| (*s).clone()).collect(),
        merged,
        layers: plans,
    };
    let params = place_params(&plan, nets)?;
    Ok((plan, params))
}

fn kind_of(l: &LayerSpec) -> &'static str {
    match l {
        LayerSpec::Conv { .. } => "conv",
        LayerSpec::ReLU => "relu",
        LayerSpec::MaxPool { .. } => "maxpool",
        LayerSpec::GlobalAvgPool => "gap",
        LayerSpec::Reshape => "reshape",
        LayerSpec::FullyConnected { .. } => "fc",
    }
}

fn require_same_kind(aligned: &[&LayerSpec], pos: usize) -> Result<()> {
    let want = std::mem::discriminant(aligned[0]);
    for (i, l) in aligned.iter().enumerate() {
        if std::mem::discriminant(*l) != want {
            return Err(Error::MergeIncompatible {
                layer: pos,
                reason: format!("source {i} has {} where source 0 has {}", kind_of(l), kind_of(aligned[0])),
            });
        }
    }
    Ok(())
}

fn role_of(pos: usize, parametric: &[usize], last: usize, n_sources: usize) -> LayerRole {
    if n_sources == 1 {
        // identity merge: every layer placed one-to-one
        return LayerRole::Middle;
    }
    if pos == parametric[0] {
        LayerRole::First
    } else if pos == last {
        LayerRole::Final
    } else {
        LayerRole::Middle
    }
}

/// Input shape flowing INTO layer `pos` of a spec.
fn sub_spec_flow(spec: &NetworkSpec, pos: usize) -> Result<crate::nn::ValueShape> {
    if pos == 0 {
        let (h, w, c) = spec.input_shape;
        return Ok(crate::nn::ValueShape::Spatial { h, w, c });
    }
    Ok(spec.shape_flow()?[pos - 1])
}

fn segment_offsets(widths: &[usize], role: LayerRole) -> Vec<(usize, usize)> {
    match role {
        LayerRole::Final => widths.iter().map(|&w| (0, w)).collect(),
        _ => {
            let mut offsets = Vec::with_capacity(widths.len());
            let mut at = 0;
            for &w in widths {
                offsets.push((at, w));
                at += w;
            }
            offsets
        }
    }
}

fn plan_blocks(
    role: LayerRole,
    segments: &Option<Vec<(usize, usize)>>,
    out_widths: &[usize],
    first: &NetworkSpec,
    spatial: usize,
    n_sources: usize,
) -> Result<(usize, Vec<SourceBlock>, usize)> {
    let in_segments: Vec<(usize, usize)> = match segments {
        // shared input: every source reads the whole thing. Widths live in
        // channel space; an fc reading a flattened raw input sees
        // channels x spatial positions through its `spatial` field.
        None => {
            let (_, _, c) = first.input_shape;
            vec![(0, c); n_sources]
        }
        Some(segs) => segs.clone(),
    };
    let in_total: usize = match segments {
        None => in_segments[0].1,
        Some(segs) => segs.iter().map(|(_, w)| w).sum(),
    };
    let shared_input = segments.is_none();
    let out_total: usize = match role {
        LayerRole::Final => out_widths[0],
        _ => out_widths.iter().sum(),
    };
    let mut blocks = Vec::with_capacity(n_sources);
    let mut out_at = 0usize;
    for (source, (&(in_off, in_len), &out_len)) in in_segments.iter().zip(out_widths).enumerate() {
        let (out_offset, out_len) = match role {
            LayerRole::Final => (0, out_len),
            _ => {
                let b = (out_at, out_len);
                out_at += out_len;
                b
            }
        };
        blocks.push(SourceBlock {
            source,
            out_offset,
            out_len,
            in_offset: if shared_input { 0 } else { in_off },
            in_len,
            spatial,
            in_total: if shared_input { in_len } else { in_total },
        });
    }
    Ok((in_total, blocks, out_total))
}

/// Copies source weights into a zeroed merged parameter set per the plan.
fn place_params(plan: &MergePlan, nets: &[(&NetworkSpec, &NetworkParams)]) -> Result<NetworkParams> {
    let mut merged = NetworkParams::zeros(&plan.merged);
    let merged_parametric: Vec<&LayerSpec> = plan
        .merged
        .layers
        .iter()
        .filter(|l| l.is_parametric())
        .collect();
    // per-source parametric cursor
    let mut cursors = vec![0usize; nets.len()];
    for (li, (lp, layer_spec)) in plan.layers.iter().zip(merged_parametric).enumerate() {
        for block in &lp.blocks {
            let src_params = &nets[block.source].1.layers[cursors[block.source]];
            let dst = &mut merged.layers[li];
            match layer_spec {
                LayerSpec::Conv { kernel, in_channels, .. } => {
                    let k = *kernel;
                    let in_total = *in_channels;
                    let src_w = src_params.weights.data();
                    let src_in = block.in_len;
                    let dst_w = dst.weights.data_mut();
                    for o in 0..block.out_len {
                        for ky in 0..k {
                            for kx in 0..k {
                                let src_base = ((o * k + ky) * k + kx) * src_in;
                                let dst_base = (((block.out_offset + o) * k + ky) * k + kx) * in_total
                                    + block.in_offset;
                                dst_w[dst_base..dst_base + src_in]
                                    .copy_from_slice(&src_w[src_base..src_base + src_in]);
                            }
                        }
                    }
                }
                LayerSpec::FullyConnected { in_dim, .. } => {
                    let src_w = src_params.weights.data();
                    let src_in = block.in_len;
                    let dst_w = dst.weights.data_mut();
                    let in_total_flat = *in_dim;
                    for o in 0..block.out_len {
                        for s in 0..block.spatial {
                            let src_base = o * (src_in * block.spatial) + s * src_in;
                            let dst_base = (block.out_offset + o) * in_total_flat
                                + s * block.in_total
                                + block.in_offset;
                            dst_w[dst_base..dst_base + src_in]
                                .copy_from_slice(&src_w[src_base..src_base + src_in]);
                        }
                    }
                }
                _ => unreachable!("plan only covers parametric layers"),
            }
            if let (Some(src_b), Some(dst_b)) = (&src_params.bias, &mut dst.bias) {
                let dst_data = dst_b.data_mut();
                for (o, v) in src_b.iter().enumerate() {
                    dst_data[block.out_offset + o] += v;
                }
            }
        }
        for cursor in &mut cursors {
            *cursor += 1;
        }
    }
    Ok(merged)
}

/// Connection mask for the merged parameters: true where a source weight was
/// placed, false on the structural zeros.
pub fn build_mask(plan: &MergePlan) -> ConnectionMask {
    let merged_parametric: Vec<&LayerSpec> = plan
        .merged
        .layers
        .iter()
        .filter(|l| l.is_parametric())
        .collect();
    let mut layers = Vec::with_capacity(plan.layers.len());
    for (lp, layer_spec) in plan.layers.iter().zip(merged_parametric) {
        let (mut weights, bias_len) = match layer_spec {
            LayerSpec::Conv { kernel, in_channels, out_channels, bias, .. } => (
                vec![false; kernel * kernel * in_channels * out_channels],
                bias.then_some(*out_channels),
            ),
            LayerSpec::FullyConnected { in_dim, out_dim, bias } => {
                (vec![false; in_dim * out_dim], bias.then_some(*out_dim))
            }
            _ => unreachable!(),
        };
        let mut bias = bias_len.map(|n| vec![false; n]);
        for block in &lp.blocks {
            match layer_spec {
                LayerSpec::Conv { kernel, in_channels, .. } => {
                    let k = *kernel;
                    for o in 0..block.out_len {
                        for ky in 0..k {
                            for kx in 0..k {
                                let base = (((block.out_offset + o) * k + ky) * k + kx) * in_channels
                                    + block.in_offset;
                                for w in &mut weights[base..base + block.in_len] {
                                    *w = true;
                                }
                            }
                        }
                    }
                }
                LayerSpec::FullyConnected { in_dim, .. } => {
                    for o in 0..block.out_len {
                        for s in 0..block.spatial {
                            let base = (block.out_offset + o) * in_dim
                                + s * block.in_total
                                + block.in_offset;
                            for w in &mut weights[base..base + block.in_len] {
                                *w = true;
                            }
                        }
                    }
                }
                _ => unreachable!(),
            }
            if let Some(b) = &mut bias {
                for o in 0..block.out_len {
                    b[block.out_offset + o] = true;
                }
            }
        }
        layers.push(MaskLayer { weights, bias });
    }
    ConnectionMask { layers }
}

/// Parameter accounting for a merged network.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MergeAudit {
    /// Placed (trainable) scalars: exactly the sum of the source counts.
    pub trainable: usize,
    /// Zeros that encode "no connection".
    pub structural_zeros: usize,
    /// Dense scalar count of the merged parameter tensors.
    pub dense: usize,
}

pub fn merged_param_audit(plan: &MergePlan) -> MergeAudit {
    let mask = build_mask(plan);
    let trainable = mask.trainable();
    let zeros = mask.structural_zeros();
    MergeAudit {
        trainable,
        structural_zeros: zeros,
        dense: trainable + zeros,
    }
}

/// Outcome of numerically verifying a merge.
#[derive(Debug, Clone)]
pub struct MergeReport {
    pub inputs_checked: usize,
    pub max_rel_error: f64,
    pub tolerance: f64,
    pub pass: bool,
}

/// Draws seeded random inputs and compares merged logits against the summed
/// source logits. Relative error is |a - b| / max(|a|, |b|, 1).
pub fn verify_merge(
    nets: &[(&NetworkSpec, &NetworkParams)],
    merged_spec: &NetworkSpec,
    merged_params: &NetworkParams,
    num_inputs: usize,
    seed: u64,
    tolerance: f64,
) -> Result<MergeReport> {
    let (h, w, c) = merged_spec.input_shape;
    let mut rng = Rng::new(seed);
    let mut max_rel: f64 = 0.0;
    for _ in 0..num_inputs {
        let mut input = Tensor::zeros(&[h, w, c]);
        for v in input.data_mut() {
            *v = rng.normal();
        }
        let merged_logits = forward(merged_spec, merged_params, &input)?;
        let mut summed = vec![0.0; merged_spec.num_classes];
        for (spec, params) in nets {
            let logits = forward(spec, params, &input)?;
            for (s, l) in summed.iter_mut().zip(&logits) {
                *s += l;
            }
        }
        for (a, b) in merged_logits.iter().zip(&summed) {
            let rel = (a - b).abs() / a.abs().max(b.abs()).max(1.0);
            max_rel = max_rel.max(rel);
        }
    }
    Ok(MergeReport {
        inputs_checked: num_inputs,
        max_rel_error: max_rel,
        tolerance,
        pass: max_rel <= tolerance,
    })
}

// ---------------------------------------------------------------------------
// Theorem-1 demonstration: distinct outputs of tree sums
// ---------------------------------------------------------------------------

/// An exhaustively enumerable discrete image domain.
#[derive(Debug, Clone)]
pub struct DomainSpec {
    pub height: usize,
    pub width: usize,
    pub channels: usize,
    /// Pixel values each position ranges over.
    pub values: Vec<u8>,
    /// Refuse to enumerate more than this many points.
    pub cap: u128,
}

impl DomainSpec {
    pub fn size(&self) -> u128 {
        let cells = (self.height * self.width * self.channels) as u32;
        (self.values.len() as u128).saturating_pow(cells)
    }
}

#[derive(Debug, Clone)]
pub struct OutputCount {
    /// Distinct values of the summed score vector over the whole domain.
    pub distinct: usize,
    pub per_tree_leaves: Vec<usize>,
    /// Distinct-output ceiling of a single tree with the same total leaves.
    pub single_tree_ceiling: usize,
}

/// Enumerates every point of the domain, evaluates the sum of the trees'
/// score vectors, and counts distinct results.
pub fn tree_output_count(
    trees: &[&DecisionTree],
    filters: &[HaarFilter],
    domain: &DomainSpec,
) -> Result<OutputCount> {
    if trees.is_empty() {
        return Err(Error::InvalidArgument("no trees given".into()));
    }
    let size = domain.size();
    if size > domain.cap {
        return Err(Error::DomainTooLarge {
            size,
            cap: domain.cap,
        });
    }
    let cells = domain.height * domain.width * domain.channels;
    let base = domain.values.len();
    let mut indices = vec![0usize; cells];
    let mut raw = vec![0u8; cells];
    let mut seen: BTreeSet<Vec<u64>> = BTreeSet::new();
    loop {
        for (r, &i) in raw.iter_mut().zip(&indices) {
            *r = domain.values[i];
        }
        let ii = IntegralImage::from_raw(&raw, domain.height, domain.width, domain.channels);
        let mut sum = vec![0.0f64; trees[0].num_classes];
        for tree in trees {
            let dist = tree.predict(filters, &ii)?;
            for (s, p) in sum.iter_mut().zip(&dist) {
                *s += p;
            }
        }
        seen.insert(sum.iter().map(|v| v.to_bits()).collect());

        // odometer increment
        let mut pos = 0;
        loop {
            if pos == cells {
                let per_tree_leaves: Vec<usize> = trees.iter().map(|t| t.num_leaves()).collect();
                let single_tree_ceiling = per_tree_leaves.iter().sum();
                return Ok(OutputCount {
                    distinct: seen.len(),
                    per_tree_leaves,
                    single_tree_ceiling,
                });
            }
            indices[pos] += 1;
            if indices[pos] < base {
                break;
            }
            indices[pos] = 0;
            pos += 1;
        }
    }
}

/// The shipped Theorem-1 witness: a pair of 3-leaf trees over 2x2 images
/// whose summed outputs take more distinct values than any single tree with
/// their combined leaf budget could produce.
pub struct Theorem1Witness {
    pub trees: Vec<DecisionTree>,
    pub filters: Vec<HaarFilter>,
    pub domain: DomainSpec,
}

pub fn theorem1_witness() -> Theorem1Witness {
    let r = |x, y, w, h| Rect { x, y, w, h };
    let filters = vec![
        // left column minus right column
        HaarFilter::new(vec![(r(0, 0, 1, 2), 1), (r(1, 0, 1, 2), -1)], 0, false).unwrap(),
        // top row minus bottom row
        HaarFilter::new(vec![(r(0, 0, 2, 1), 1), (r(0, 1, 2, 1), -1)], 0, false).unwrap(),
    ];
    // three-way split on each filter's value range [-4, 4]
    let three_leaf = |filter: usize, leaves: [[f64; 3]; 3]| DecisionTree {
        num_classes: 3,
        nodes: vec![
            Node::Internal { filter, threshold: -1.5, left: 1, right: 2 },
            Node::Leaf { dist: leaves[0].to_vec(), mass: 1.0 },
            Node::Internal { filter, threshold: 1.5, left: 3, right: 4 },
            Node::Leaf { dist: leaves[1].to_vec(), mass: 1.0 },
            Node::Leaf { dist: leaves[2].to_vec(), mass: 1.0 },
        ],
    };
    let trees = vec![
        three_leaf(0, [[0.70, 0.20, 0.10], [0.10, 0.60, 0.30], [0.25, 0.25, 0.50]]),
        three_leaf(1, [[0.61, 0.29, 0.10], [0.05, 0.55, 0.40], [0.33, 0.17, 0.50]]),
    ];
    Theorem1Witness {
        trees,
        filters,
        domain: DomainSpec {
            height: 2,
            width: 2,
            channels: 1,
            values: vec![0, 1, 2],
            cap: 1 << 20,
        },
    }
}

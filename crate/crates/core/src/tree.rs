//! Weighted multi-class decision trees over Haar filters, grown by the peak
//! criterion: the leaf with the lowest peak is split with the (filter,
//! threshold) pair that maximizes the summed child peaks.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::haar::{eval_filter, HaarFilter, IntegralImage, IntegralSet};

/// `peak = max(dist) - (1 - max(dist)) / (C - 1)`, the probability of the
/// top class minus the average probability of the rest. Lies in [0, 1] for
/// distributions; 1 on a one-hot, 0 on uniform.
pub fn peak(dist: &[f64]) -> Result<f64> {
    if dist.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "peak needs at least 2 classes, got {}",
            dist.len()
        )));
    }
    let max = dist.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    Ok(max - (1.0 - max) / (dist.len() as f64 - 1.0))
}

/// Accounting model P = k*I + c*L for a binary tree: `k` parameters per
/// internal decision, `c` output values per leaf.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TreeParamModel {
    pub k: usize,
    pub c: usize,
}

impl TreeParamModel {
    pub fn count_for_leaves(&self, leaves: usize) -> usize {
        self.k * (leaves - 1) + self.c * leaves
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Internal {
        filter: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        dist: Vec<f64>,
        mass: f64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecisionTree {
    pub nodes: Vec<Node>,
    pub num_classes: usize,
}

impl DecisionTree {
    pub fn num_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf { .. })).count()
    }

    pub fn num_internal(&self) -> usize {
        self.nodes.len() - self.num_leaves()
    }

    pub fn param_count(&self, model: TreeParamModel) -> usize {
        model.k * self.num_internal() + model.c * self.num_leaves()
    }

    /// Routes an image to a leaf (value <= threshold goes left) and returns
    /// that leaf's class distribution.
    pub fn predict(&self, filters: &[HaarFilter], ii: &IntegralImage) -> Result<Vec<f64>> {
        let mut at = 0usize;
        loop {
            match &self.nodes[at] {
                Node::Internal { filter, threshold, left, right } => {
                    let v = eval_filter(ii, &filters[*filter])?;
                    at = if v <= *threshold { *left } else { *right };
                }
                Node::Leaf { dist, .. } => return Ok(dist.clone()),
            }
        }
    }

    /// Index of the leaf an image routes to.
    pub fn leaf_index(&self, filters: &[HaarFilter], ii: &IntegralImage) -> Result<usize> {
        let mut at = 0usize;
        loop {
            match &self.nodes[at] {
                Node::Internal { filter, threshold, left, right } => {
                    let v = eval_filter(ii, &filters[*filter])?;
                    at = if v <= *threshold { *left } else { *right };
                }
                Node::Leaf { .. } => return Ok(at),
            }
        }
    }
}

fn eval_filter_on(filters: &[HaarFilter], filter: usize, ii: &IntegralImage) -> Result<f64> {
    eval_filter(ii, &filters[filter])
}

/// How a split candidate is scored.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SplitObjective {
    /// Sum over children of (weight mass x peak); the parent must be beaten
    /// strictly. This is the default reading.
    #[default]
    WeightedMass,
    /// Plain sum of the two child peaks, compared against the parent's peak.
    UnweightedPeaks,
}

#[derive(Debug, Clone)]
pub struct GrowOptions {
    pub num_leaves: usize,
    pub objective: SplitObjective,
}

impl GrowOptions {
    pub fn new(num_leaves: usize) -> Self {
        GrowOptions {
            num_leaves,
            objective: SplitObjective::WeightedMass,
        }
    }
}

/// Outcome notes from growing: how many leaves were requested vs reached.
#[derive(Debug, Clone)]
pub struct GrowthReport {
    pub requested_leaves: usize,
    pub achieved_leaves: usize,
    pub stopped_early: bool,
}

struct LeafState {
    node: usize,
    examples: Vec<usize>,
    class_mass: Vec<f64>,
    mass: f64,
    peak: f64,
    unsplittable: bool,
}

impl LeafState {
    fn build(node: usize, examples: Vec<usize>, labels: &[usize], weights: &[f64], num_classes: usize) -> Self {
        let mut class_mass = vec![0.0; num_classes];
        for &i in &examples {
            class_mass[labels[i]] += weights[i];
        }
        let mass: f64 = class_mass.iter().sum();
        let dist = normalize_dist(&class_mass, mass);
        let peak = peak(&dist).expect("num_classes >= 2 checked at entry");
        LeafState {
            node,
            examples,
            class_mass,
            mass,
            peak,
            unsplittable: false,
        }
    }

    fn dist(&self) -> Vec<f64> {
        normalize_dist(&self.class_mass, self.mass)
    }
}

fn normalize_dist(class_mass: &[f64], mass: f64) -> Vec<f64> {
    if mass > 0.0 {
        class_mass.iter().map(|m| m / mass).collect()
    } else {
        // zero weight mass in this leaf: fall back to uniform
        vec![1.0 / class_mass.len() as f64; class_mass.len()]
    }
}

/// Grows a tree to `num_leaves` leaves (or fewer if every remaining leaf is
/// unsplittable). `weights` is one non-negative weight per example.
pub fn grow_tree(
    integrals: &IntegralSet,
    labels: &[usize],
    num_classes: usize,
    weights: &[f64],
    filters: &[HaarFilter],
    options: &GrowOptions,
) -> Result<(DecisionTree, GrowthReport)> {
    check_grow_inputs(integrals, labels, num_classes, weights, filters)?;
    if options.num_leaves < 1 {
        return Err(Error::InvalidArgument("num_leaves must be >= 1".into()));
    }
    let root = LeafState::build(0, (0..labels.len()).collect(), labels, weights, num_classes);
    let tree = DecisionTree {
        nodes: vec![Node::Leaf { dist: root.dist(), mass: root.mass }],
        num_classes,
    };
    grow_from_state(tree, vec![root], integrals, labels, weights, filters, options)
}

/// Resumes growth of an existing tree on the same data, bank, and weights.
/// Greedy growth is deterministic, so continuing to N leaves equals having
/// grown to N leaves directly.
pub fn continue_growth(
    tree: &DecisionTree,
    integrals: &IntegralSet,
    labels: &[usize],
    weights: &[f64],
    filters: &[HaarFilter],
    new_num_leaves: usize,
    objective: SplitObjective,
) -> Result<(DecisionTree, GrowthReport)> {
    check_grow_inputs(integrals, labels, tree.num_classes, weights, filters)?;
    let current = tree.num_leaves();
    if new_num_leaves < current {
        return Err(Error::InvalidArgument(format!(
            "cannot shrink a tree: it has {current} leaves, {new_num_leaves} requested"
        )));
    }
    // route every example to its leaf and rebuild the growth state
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); tree.nodes.len()];
    for (i, ii) in integrals.images.iter().enumerate() {
        members[tree.leaf_index(filters, ii)?].push(i);
    }
    let mut leaves = Vec::new();
    let mut refreshed = tree.clone();
    for (node, examples) in members.into_iter().enumerate() {
        if matches!(refreshed.nodes[node], Node::Leaf { .. }) {
            let state = LeafState::build(node, examples, labels, weights, tree.num_classes);
            refreshed.nodes[node] = Node::Leaf { dist: state.dist(), mass: state.mass };
            leaves.push(state);
        }
    }
    let options = GrowOptions {
        num_leaves: new_num_leaves,
        objective,
    };
    grow_from_state(refreshed, leaves, integrals, labels, weights, filters, &options)
}

fn check_grow_inputs(
    integrals: &IntegralSet,
    labels: &[usize],
    num_classes: usize,
    weights: &[f64],
    filters: &[HaarFilter],
) -> Result<()> {
    if integrals.images.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if labels.len() != integrals.images.len() || weights.len() != labels.len() {
        return Err(Error::ShapeMismatch {
            context: "tree training inputs".into(),
            expected: format!("{} labels and weights", integrals.images.len()),
            actual: format!("{} labels, {} weights", labels.len(), weights.len()),
        });
    }
    if num_classes < 2 {
        return Err(Error::InvalidArgument("trees need at least 2 classes".into()));
    }
    if filters.is_empty() {
        return Err(Error::InvalidArgument("empty filter bank".into()));
    }
    if let Some(l) = labels.iter().find(|&&l| l >= num_classes) {
        return Err(Error::InvalidArgument(format!("label {l} out of range")));
    }
    Ok(())
}

fn grow_from_state(
    mut tree: DecisionTree,
    mut leaves: Vec<LeafState>,
    integrals: &IntegralSet,
    labels: &[usize],
    weights: &[f64],
    filters: &[HaarFilter],
    options: &GrowOptions,
) -> Result<(DecisionTree, GrowthReport)> {
    let requested = options.num_leaves;
    while leaves.len() < requested {
        // minimum-peak leaf; ties to larger mass, then lower node index
        let candidate = leaves
            .iter()
            .enumerate()
            .filter(|(_, l)| !l.unsplittable)
            .min_by(|(_, a), (_, b)| {
                a.peak
                    .total_cmp(&b.peak)
                    .then(b.mass.total_cmp(&a.mass))
                    .then(a.node.cmp(&b.node))
            })
            .map(|(i, _)| i);
        let Some(li) = candidate else { break };
        if leaves[li].peak >= 1.0 - 1e-12 {
            leaves[li].unsplittable = true;
            continue;
        }
        match best_split(&leaves[li], integrals, labels, weights, filters, options.objective)? {
            Some(split) => {
                let state = leaves.swap_remove(li);
                let (left_ex, right_ex): (Vec<usize>, Vec<usize>) = state
                    .examples
                    .iter()
                    .partition(|&&i| split.values[&i] <= split.threshold);
                let left_node = tree.nodes.len();
                let right_node = left_node + 1;
                let left = LeafState::build(left_node, left_ex, labels, weights, tree.num_classes);
                let right = LeafState::build(right_node, right_ex, labels, weights, tree.num_classes);
                tree.nodes.push(Node::Leaf { dist: left.dist(), mass: left.mass });
                tree.nodes.push(Node::Leaf { dist: right.dist(), mass: right.mass });
                tree.nodes[state.node] = Node::Internal {
                    filter: split.filter,
                    threshold: split.threshold,
                    left: left_node,
                    right: right_node,
                };
                leaves.push(left);
                leaves.push(right);
            }
            None => leaves[li].unsplittable = true,
        }
    }
    let achieved = leaves.len();
    debug_assert_eq!(achieved, tree.num_leaves());
    debug_assert_eq!(tree.num_leaves(), tree.num_internal() + 1);
    Ok((
        tree,
        GrowthReport {
            requested_leaves: requested,
            achieved_leaves: achieved,
            stopped_early: achieved < requested,
        },
    ))
}

struct ChosenSplit {
    filter: usize,
    threshold: f64,
    /// filter value per example index, for partitioning
    values: std::collections::HashMap<usize, f64>,
}

/// Scans every (filter, threshold) candidate for one leaf. Thresholds sit at
/// midpoints of consecutive distinct sorted values. Returns None when no
/// candidate strictly beats the parent's contribution.
fn best_split(
    leaf: &LeafState,
    integrals: &IntegralSet,
    labels: &[usize],
    weights: &[f64],
    filters: &[HaarFilter],
    objective: SplitObjective,
) -> Result<Option<ChosenSplit>> {
    let c = leaf.class_mass.len();
    let parent_score = match objective {
        SplitObjective::WeightedMass => leaf.mass * leaf.peak,
        SplitObjective::UnweightedPeaks => leaf.peak,
    };
    let mut best: Option<(f64, usize, f64)> = None; // (score, filter, threshold)
    let mut values: Vec<(f64, usize)> = Vec::with_capacity(leaf.examples.len());
    let mut left_mass = vec![0.0f64; c];

    if leaf.examples.len() < 2 {
        return Ok(None);
    }
    for (fi, _) in filters.iter().enumerate() {
        values.clear();
        for &ex in &leaf.examples {
            values.push((eval_filter_on(filters, fi, &integrals.images[ex])?, ex));
        }
        values.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));

        left_mass.fill(0.0);
        let mut left_total = 0.0;
        for w in 0..values.len() - 1 {
            let (v, ex) = values[w];
            left_mass[labels[ex]] += weights[ex];
            left_total += weights[ex];
            let next = values[w + 1].0;
            if next == v {
                continue;
            }
            let threshold = 0.5 * (v + next);
            let score = split_score(
                &left_mass,
                left_total,
                &leaf.class_mass,
                leaf.mass,
                objective,
            );
            let better = match best {
                None => score > parent_score,
                Some((bs, _, _)) => score > parent_score && score > bs,
            };
            if better {
                best = Some((score, fi, threshold));
            }
        }
    }

    Ok(best.map(|(_, filter, threshold)| {
        let mut map = std::collections::HashMap::with_capacity(leaf.examples.len());
        for &ex in &leaf.examples {
            let v = eval_filter_on(filters, filter, &integrals.images[ex])
                .expect("filter already evaluated during the scan");
            map.insert(ex, v);
        }
        ChosenSplit { filter, threshold, values: map }
    }))
}

fn split_score(
    left_mass: &[f64],
    left_total: f64,
    parent_mass: &[f64],
    parent_total: f64,
    objective: SplitObjective,
) -> f64 {
    let c = left_mass.len() as f64;
    let mut left_max = 0.0f64;
    let mut right_max = 0.0f64;
    for (l, p) in left_mass.iter().zip(parent_mass) {
        left_max = left_max.max(*l);
        right_max = right_max.max(p - l);
    }
    let right_total = parent_total - left_total;
    match objective {
        SplitObjective::WeightedMass => {
            // mass * peak = (C * max_class_mass - mass) / (C - 1), per child
            let left = if left_total > 0.0 { (c * left_max - left_total) / (c - 1.0) } else { 0.0 };
            let right = if right_total > 0.0 { (c * right_max - right_total) / (c - 1.0) } else { 0.0 };
            left + right
        }
        SplitObjective::UnweightedPeaks => {
            let left = if left_total > 0.0 { (c * (left_max / left_total) - 1.0) / (c - 1.0) } else { 0.0 };
            let right = if right_total > 0.0 { (c * (right_max / right_total) - 1.0) / (c - 1.0) } else { 0.0 };
            left + right
        }
    }
}

/// Brute-force reference for split finding: enumerates every (filter,
/// threshold) candidate and recomputes child masses from scratch, instead of
/// the incremental sweep `grow_tree` uses. Masses accumulate in sorted-value
/// order and the score uses the objective's defining formula, so a correct
/// sweep must agree exactly.
pub fn exhaustive_best_split(
    integrals: &IntegralSet,
    labels: &[usize],
    num_classes: usize,
    weights: &[f64],
    filters: &[HaarFilter],
    examples: &[usize],
    objective: SplitObjective,
) -> Result<Option<(usize, f64)>> {
    if examples.len() < 2 {
        return Ok(None);
    }
    let mut class_mass = vec![0.0f64; num_classes];
    for &ex in examples {
        class_mass[labels[ex]] += weights[ex];
    }
    let mass: f64 = class_mass.iter().sum();
    let dist = normalize_dist(&class_mass, mass);
    let parent_peak = peak(&dist)?;
    if parent_peak >= 1.0 - 1e-12 {
        return Ok(None);
    }
    let parent_score = match objective {
        SplitObjective::WeightedMass => mass * parent_peak,
        SplitObjective::UnweightedPeaks => parent_peak,
    };

    let mut best: Option<(f64, usize, f64)> = None;
    for (fi, filter) in filters.iter().enumerate() {
        let mut values: Vec<(f64, usize)> = examples
            .iter()
            .map(|&ex| Ok((eval_filter(&integrals.images[ex], filter)?, ex)))
            .collect::<Result<_>>()?;
        values.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        for cut in 0..values.len() - 1 {
            let v = values[cut].0;
            let next = values[cut + 1].0;
            if next == v {
                continue;
            }
            let threshold = 0.5 * (v + next);
            let mut left = vec![0.0f64; num_classes];
            let mut left_total = 0.0;
            for (_, ex) in &values[..=cut] {
                left[labels[*ex]] += weights[*ex];
                left_total += weights[*ex];
            }
            let score = split_score(&left, left_total, &class_mass, mass, objective);
            let better = match best {
                None => score > parent_score,
                Some((bs, _, _)) => score > parent_score && score > bs,
            };
            if better {
                best = Some((score, fi, threshold));
            }
        }
    }
    Ok(best.map(|(_, f, t)| (f, t)))
}

/// Example subsets per node: every example routed through the tree, recorded
/// at every node it passes.
pub fn node_example_subsets(
    tree: &DecisionTree,
    integrals: &IntegralSet,
    filters: &[HaarFilter],
) -> Result<Vec<Vec<usize>>> {
    let mut subsets = vec![Vec::new(); tree.nodes.len()];
    for (i, ii) in integrals.images.iter().enumerate() {
        let mut at = 0usize;
        loop {
            subsets[at].push(i);
            match &tree.nodes[at] {
                Node::Internal { filter, threshold, left, right } => {
                    let v = eval_filter(ii, &filters[*filter])?;
                    at = if v <= *threshold { *left } else { *right };
                }
                Node::Leaf { .. } => break,
            }
        }
    }
    Ok(subsets)
}

// ---------------------------------------------------------------------------
// Textual serialization (see docs/formats.md)
// ---------------------------------------------------------------------------

pub fn tree_to_string(tree: &DecisionTree) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "BLTR v1");
    let _ = writeln!(s, "classes {}", tree.num_classes);
    let _ = writeln!(s, "nodes {}", tree.nodes.len());
    for node in &tree.nodes {
        match node {
            Node::Internal { filter, threshold, left, right } => {
                let _ = writeln!(s, "internal {filter} {threshold} {left} {right}");
            }
            Node::Leaf { dist, mass } => {
                let _ = write!(s, "leaf {mass}");
                for p in dist {
                    let _ = write!(s, " {p}");
                }
                let _ = writeln!(s);
            }
        }
    }
    s
}

pub fn tree_from_string(text: &str) -> Result<DecisionTree> {
    let bad = |reason: String| Error::format("BLTR", reason);
    let mut lines = text.lines();
    if lines.next() != Some("BLTR v1") {
        return Err(bad("missing BLTR v1 header".into()));
    }
    let classes_line = lines.next().ok_or_else(|| bad("missing classes line".into()))?;
    let num_classes: usize = classes_line
        .strip_prefix("classes ")
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| bad("unparseable classes line".into()))?;
    let nodes_line = lines.next().ok_or_else(|| bad("missing nodes line".into()))?;
    let count: usize = nodes_line
        .strip_prefix("nodes ")
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| bad("unparseable nodes line".into()))?;
    let mut nodes = Vec::with_capacity(count);
    for line in lines {
        if line.trim().is_empty() {
            continue;
        }
        let mut parts = line.split_whitespace();
        match parts.next() {
            Some("internal") => {
                let vals: Vec<&str> = parts.collect();
                if vals.len() != 4 {
                    return Err(bad(format!("internal node needs 4 fields: {line}")));
                }
                nodes.push(Node::Internal {
                    filter: vals[0].parse().map_err(|_| bad("bad filter index".into()))?,
                    threshold: vals[1].parse().map_err(|_| bad("bad threshold".into()))?,
                    left: vals[2].parse().map_err(|_| bad("bad left index".into()))?,
                    right: vals[3].parse().map_err(|_| bad("bad right index".into()))?,
                });
            }
            Some("leaf") => {
                let vals: Vec<f64> = parts
                    .map(|v| v.parse().map_err(|_| bad("bad leaf value".into())))
                    .collect::<Result<_>>()?;
                if vals.len() != num_classes + 1 {
                    return Err(bad(format!("leaf needs mass + {num_classes} probabilities")));
                }
                nodes.push(Node::Leaf {
                    mass: vals[0],
                    dist: vals[1..].to_vec(),
                });
            }
            other => return Err(bad(format!("unknown node kind {other:?}"))),
        }
    }
    if nodes.len() != count {
        return Err(bad(format!("header says {count} nodes, found {}", nodes.len())));
    }
    let tree = DecisionTree { nodes, num_classes };
    if tree.num_leaves() != tree.num_internal() + 1 {
        return Err(bad("node list is not a binary tree (L != I + 1)".into()));
    }
    Ok(tree)
}

pub fn save_tree_file(path: &Path, tree: &DecisionTree) -> Result<()> {
    std::fs::write(path, tree_to_string(tree)).map_err(|e| Error::io(path.display().to_string(), e))
}

pub fn load_tree_file(path: &Path) -> Result<DecisionTree> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    tree_from_string(&text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{synth_blobs, Dataset, Split};
    use crate::haar::generate_filter_bank;

    fn uniform_weights(n: usize) -> Vec<f64> {
        vec![1.0 / n as f64; n]
    }

    #[test]
    fn peak_examples() {
        let mut onehot = vec![0.0; 10];
        onehot[3] = 1.0;
        assert_eq!(peak(&onehot).unwrap(), 1.0);
        assert!(peak(&vec![0.1; 10]).unwrap().abs() < 1e-12);
        assert!((peak(&[0.5, 0.3, 0.2]).unwrap() - 0.25).abs() < 1e-12);
        assert!(peak(&[1.0]).is_err());
    }

    #[test]
    fn param_model_closed_forms() {
        let model = TreeParamModel { k: 3, c: 10 };
        assert_eq!(model.count_for_leaves(1), 10);
        assert_eq!(model.count_for_leaves(64), 3 * 63 + 640);
        // doubling leaves doubles the count plus one extra internal node
        let p = 64;
        assert_eq!(
            model.count_for_leaves(2 * p),
            2 * model.count_for_leaves(p) + model.k
        );
    }

    fn tiny_dataset(labels: &[usize], pixel_rows: &[[u8; 4]]) -> Dataset {
        let mut raw = Vec::new();
        for row in pixel_rows {
            raw.extend_from_slice(row);
        }
        Dataset::new(
            "tiny",
            Split::Train,
            2,
            (2, 2, 1),
            raw,
            labels.iter().map(|&l| l as u16).collect(),
            None,
        )
        .unwrap()
    }

    #[test]
    fn single_class_dataset_returns_one_pure_leaf() {
        let data = tiny_dataset(&[0, 0, 0, 0], &[[1, 2, 3, 4], [5, 6, 7, 8], [9, 1, 2, 3], [4, 5, 6, 7]]);
        let integrals = IntegralSet::from_dataset(&data);
        let bank = generate_filter_bank((2, 2), 1, 1, 10, 1).unwrap();
        let (tree, report) = grow_tree(
            &integrals,
            &[0, 0, 0, 0],
            2,
            &uniform_weights(4),
            &bank.filters,
            &GrowOptions::new(4),
        )
        .unwrap();
        assert_eq!(tree.num_leaves(), 1);
        assert!(report.stopped_early);
        match &tree.nodes[0] {
            Node::Leaf { dist, .. } => assert_eq!(dist, &vec![1.0, 0.0]),
            other => panic!("expected a leaf, got {other:?}"),
        }
    }

    #[test]
    fn perfectly_separable_pair_is_split_in_one_step() {
        // left-bright vs right-bright 2x2 images; the bank holds one
        // separating +left/-right filter among uninformative ones
        let data = tiny_dataset(
            &[0, 0, 1, 1],
            &[[200, 10, 200, 10], [180, 30, 190, 20], [10, 200, 10, 200], [20, 190, 25, 185]],
        );
        let integrals = IntegralSet::from_dataset(&data);
        let r = |x, y, w, h| crate::haar::Rect { x, y, w, h };
        let filters = vec![
            // full image vs itself: constant zero
            HaarFilter::new(vec![(r(0, 0, 2, 2), 1), (r(0, 0, 2, 2), -1)], 0, false).unwrap(),
            // top row minus bottom row: near zero for both classes
            HaarFilter::new(vec![(r(0, 0, 2, 1), 1), (r(0, 1, 2, 1), -1)], 0, false).unwrap(),
            // left column minus right column: separates the classes
            HaarFilter::new(vec![(r(0, 0, 1, 2), 1), (r(1, 0, 1, 2), -1)], 0, false).unwrap(),
        ];
        let (tree, _) = grow_tree(
            &integrals,
            &[0, 0, 1, 1],
            2,
            &uniform_weights(4),
            &filters,
            &GrowOptions::new(2),
        )
        .unwrap();
        assert_eq!(tree.num_leaves(), 2);
        match &tree.nodes[0] {
            Node::Internal { filter, .. } => assert_eq!(*filter, 2),
            other => panic!("expected an internal root, got {other:?}"),
        }
        for (i, ii) in integrals.images.iter().enumerate() {
            let dist = tree.predict(&filters, ii).unwrap();
            assert_eq!(crate::nn::argmax_class(&dist), data.label(i));
            let sum: f64 = dist.iter().sum();
            assert!((sum - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn tree_prediction_distributions_are_normalized() {
        let data = synth_blobs(3, 30, (6, 6, 1), 2.0, 5).unwrap();
        let integrals = IntegralSet::from_dataset(&data);
        let bank = generate_filter_bank((6, 6), 2, 1, 60, 3).unwrap();
        let labels = data.labels_usize();
        let (tree, _) = grow_tree(
            &integrals,
            &labels,
            3,
            &uniform_weights(labels.len()),
            &bank.filters,
            &GrowOptions::new(8),
        )
        .unwrap();
        for ii in &integrals.images {
            let dist = tree.predict(&bank.filters, ii).unwrap();
            let sum: f64 = dist.iter().sum();
            assert!((sum - 1.0).abs() < 1e-9);
            assert!(dist.iter().all(|&p| p >= 0.0));
        }
        assert_eq!(tree.num_leaves(), tree.num_internal() + 1);
    }

    #[test]
    fn uniform_weights_match_explicit_equal_weights_node_for_node() {
        let data = synth_blobs(3, 25, (5, 5, 1), 1.5, 9).unwrap();
        let integrals = IntegralSet::from_dataset(&data);
        let bank = generate_filter_bank((5, 5), 2, 1, 40, 7).unwrap();
        let labels = data.labels_usize();
        let n = labels.len();
        let opts = GrowOptions::new(6);
        let uniform: Vec<f64> = vec![1.0 / n as f64; n];
        let explicit: Vec<f64> = (0..n).map(|_| 1.0 / n as f64).collect();
        let (a, _) = grow_tree(&integrals, &labels, 3, &uniform, &bank.filters, &opts).unwrap();
        let (b, _) = grow_tree(&integrals, &labels, 3, &explicit, &bank.filters, &opts).unwrap();
        assert_eq!(a.nodes.len(), b.nodes.len());
        for (na, nb) in a.nodes.iter().zip(&b.nodes) {
            match (na, nb) {
                (
                    Node::Internal { filter: fa, threshold: ta, left: la, right: ra },
                    Node::Internal { filter: fb, threshold: tb, left: lb, right: rb },
                ) => {
                    assert_eq!((fa, la, ra), (fb, lb, rb));
                    assert!((ta - tb).abs() < 1e-12);
                }
                (Node::Leaf { dist: da, .. }, Node::Leaf { dist: db, .. }) => {
                    for (x, y) in da.iter().zip(db) {
                        assert!((x - y).abs() < 1e-12);
                    }
                }
                _ => panic!("structural mismatch"),
            }
        }
    }

    #[test]
    fn continue_growth_equals_direct_growth() {
        let data = synth_blobs(3, 40, (6, 6, 1), 1.2, 13).unwrap();
        let integrals = IntegralSet::from_dataset(&data);
        let bank = generate_filter_bank((6, 6), 2, 1, 50, 11).unwrap();
        let labels = data.labels_usize();
        let w = uniform_weights(labels.len());

        let (direct, _) = grow_tree(&integrals, &labels, 3, &w, &bank.filters, &GrowOptions::new(12)).unwrap();
        let (small, _) = grow_tree(&integrals, &labels, 3, &w, &bank.filters, &GrowOptions::new(6)).unwrap();
        let (resumed, _) = continue_growth(
            &small,
            &integrals,
            &labels,
            &w,
            &bank.filters,
            12,
            SplitObjective::WeightedMass,
        )
        .unwrap();
        assert_eq!(direct, resumed);

        // continuing to the current size is a no-op
        let (same, report) = continue_growth(
            &small,
            &integrals,
            &labels,
            &w,
            &bank.filters,
            6,
            SplitObjective::WeightedMass,
        )
        .unwrap();
        assert_eq!(small, same);
        assert!(!report.stopped_early);

        // shrink requests are rejected
        assert!(continue_growth(
            &small,
            &integrals,
            &labels,
            &w,
            &bank.filters,
            2,
            SplitObjective::WeightedMass,
        )
        .is_err());
    }

    #[test]
    fn growth_on_pure_tree_is_a_no_op() {
        let data = tiny_dataset(&[0, 1], &[[250, 0, 250, 0], [0, 250, 0, 250]]);
        let integrals = IntegralSet::from_dataset(&data);
        let bank = generate_filter_bank((2, 2), 1, 1, 20, 4).unwrap();
        let (tree, _) = grow_tree(
            &integrals,
            &[0, 1],
            2,
            &uniform_weights(2),
            &bank.filters,
            &GrowOptions::new(2),
        )
        .unwrap();
        assert_eq!(tree.num_leaves(), 2);
        let (grown, report) = continue_growth(
            &tree,
            &integrals,
            &[0, 1],
            &uniform_weights(2),
            &bank.filters,
            8,
            SplitObjective::WeightedMass,
        )
        .unwrap();
        assert_eq!(grown.num_leaves(), 2);
        assert!(report.stopped_early);
        assert_eq!(tree, grown);
    }

    #[test]
    fn serialization_round_trips_exactly() {
        let data = synth_blobs(3, 20, (5, 5, 1), 2.0, 21).unwrap();
        let integrals = IntegralSet::from_dataset(&data);
        let bank = generate_filter_bank((5, 5), 2, 1, 30, 19).unwrap();
        let labels = data.labels_usize();
        let (tree, _) = grow_tree(
            &integrals,
            &labels,
            3,
            &uniform_weights(labels.len()),
            &bank.filters,
            &GrowOptions::new(5),
        )
        .unwrap();
        let text = tree_to_string(&tree);
        let loaded = tree_from_string(&text).unwrap();
        assert_eq!(tree, loaded);
    }

    #[test]
    fn empty_dataset_is_rejected() {
        let bank = generate_filter_bank((2, 2), 1, 1, 10, 1).unwrap();
        let integrals = IntegralSet { images: vec![] };
        assert!(matches!(
            grow_tree(&integrals, &[], 2, &[], &bank.filters, &GrowOptions::new(2)),
            Err(Error::EmptyDataset)
        ));
    }
}

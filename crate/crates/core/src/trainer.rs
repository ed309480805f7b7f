//! Recursive tree growth, parameterized by a split-finding strategy.

use serde::{Deserialize, Serialize};

use crate::dataset::{BinnedDataset, Task};
use crate::error::{Error, Result};
use crate::gain::{find_best_split, GainKind, NodeStats};
use crate::histogram::construct_histograms;
use crate::tree::{SplitCandidate, TreeModel, TreeNode};

/// Stopping criteria and gain configuration for one tree.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TreeConfig {
    /// Maximum root-to-leaf path length, counted in nodes; 1 grows a single leaf.
    pub max_depth: usize,
    /// Minimum sample count of each child of a split.
    pub min_leaf: u64,
    /// Splits with smaller gain become leaves.
    pub min_gain: f64,
    pub gain_kind: GainKind,
}

impl TreeConfig {
    pub fn new(gain_kind: GainKind) -> Self {
        TreeConfig { max_depth: 6, min_leaf: 1, min_gain: 1e-12, gain_kind }
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_depth < 1 {
            return Err(Error::invalid("max_depth must be at least 1"));
        }
        if self.min_leaf < 1 {
            return Err(Error::invalid("min_leaf must be at least 1"));
        }
        if self.min_gain < 0.0 {
            return Err(Error::invalid("min_gain must be nonnegative"));
        }
        Ok(())
    }
}

/// A node handed to a split finder: which samples it holds and its depth
/// (root = 1). Sample order is canonical and identical for every strategy.
pub struct NodeContext<'a> {
    pub samples: &'a [usize],
    pub depth: usize,
}

/// Split-finding strategy. Must behave as a pure function of the node:
/// identical inputs produce identical candidates.
pub trait SplitFinder {
    fn find_split(&mut self, node: &NodeContext<'_>) -> Result<Option<SplitCandidate>>;

    /// Cumulative communication bytes metered so far (0 for local finders).
    fn comm_bytes(&self) -> f64 {
        0.0
    }
}

/// Single-machine exact split finder.
pub struct SequentialFinder<'a> {
    data: &'a BinnedDataset,
    kind: GainKind,
    min_leaf: u64,
}

impl<'a> SequentialFinder<'a> {
    pub fn new(data: &'a BinnedDataset, kind: GainKind, min_leaf: u64) -> Self {
        Self { data, kind, min_leaf }
    }
}

impl SplitFinder for SequentialFinder<'_> {
    fn find_split(&mut self, node: &NodeContext<'_>) -> Result<Option<SplitCandidate>> {
        let hists = construct_histograms(self.data, node.samples);
        let stats = NodeStats::from_histogram(&hists[0], self.data.n_samples() as u64);
        find_best_split(&hists, &stats, self.kind, self.min_leaf)
    }
}

/// A grown tree plus the communication bytes metered at each splitting level
/// (level 0 is the root's split search).
pub struct GrownTree {
    pub model: TreeModel,
    pub comm_bytes_by_level: Vec<f64>,
}

/// Grows a tree depth-first (left child first) with deterministic child
/// order. A node becomes a leaf when its depth reaches `max_depth`, it has
/// fewer than `2 * min_leaf` samples, or the finder produces no candidate
/// with gain at least `min_gain`.
pub fn grow_tree(
    data: &BinnedDataset,
    config: &TreeConfig,
    finder: &mut dyn SplitFinder,
) -> Result<GrownTree> {
    config.validate()?;
    if data.n_samples() == 0 {
        return Err(Error::invalid("cannot grow a tree on an empty dataset"));
    }
    match (config.gain_kind, data.task()) {
        (GainKind::VarianceGain, Task::Regression) => {}
        (GainKind::InformationGain, Task::Classification { .. }) => {}
        _ => return Err(Error::invalid("gain kind does not match the dataset task")),
    }
    let samples: Vec<usize> = (0..data.n_samples()).collect();
    let mut nodes = Vec::new();
    let mut level_bytes = vec![0.0; config.max_depth.saturating_sub(1)];
    grow(data, config, finder, samples, 1, &mut nodes, &mut level_bytes)?;
    Ok(GrownTree { model: TreeModel { nodes, max_depth: config.max_depth }, comm_bytes_by_level: level_bytes })
}

/// Convenience wrapper returning only the model.
pub fn build_tree(
    data: &BinnedDataset,
    config: &TreeConfig,
    finder: &mut dyn SplitFinder,
) -> Result<TreeModel> {
    Ok(grow_tree(data, config, finder)?.model)
}

fn grow(
    data: &BinnedDataset,
    config: &TreeConfig,
    finder: &mut dyn SplitFinder,
    samples: Vec<usize>,
    depth: usize,
    nodes: &mut Vec<TreeNode>,
    level_bytes: &mut [f64],
) -> Result<usize> {
    let splittable = depth < config.max_depth && samples.len() as u64 >= 2 * config.min_leaf;
    let candidate = if splittable {
        let before = finder.comm_bytes();
        let cand = finder.find_split(&NodeContext { samples: &samples, depth })?;
        level_bytes[depth - 1] += finder.comm_bytes() - before;
        cand.filter(|c| c.gain >= config.min_gain)
    } else {
        None
    };

    match candidate {
        None => {
            nodes.push(TreeNode::Leaf { output: leaf_output(data, &samples) });
            Ok(nodes.len() - 1)
        }
        Some(split) => {
            // Exact partition, preserving canonical sample order.
            let (mut left, mut right) = (Vec::new(), Vec::new());
            for &i in &samples {
                if data.bin(i, split.attribute) <= split.threshold_bin {
                    left.push(i);
                } else {
                    right.push(i);
                }
            }
            debug_assert!(!left.is_empty() && !right.is_empty(), "split must separate samples");
            let idx = nodes.len();
            nodes.push(TreeNode::Leaf { output: 0.0 }); // placeholder
            let l = grow(data, config, finder, left, depth + 1, nodes, level_bytes)?;
            let r = grow(data, config, finder, right, depth + 1, nodes, level_bytes)?;
            nodes[idx] = TreeNode::Internal { split, left: l, right: r };
            Ok(idx)
        }
    }
}

/// Mean label for regression; majority class id (ties to the lower class)
/// for classification.
fn leaf_output(data: &BinnedDataset, samples: &[usize]) -> f64 {
    let labels = data.labels();
    match data.task() {
        Task::Regression => {
            if samples.is_empty() {
                return 0.0;
            }
            let sum: f64 = samples.iter().map(|&i| labels[i]).sum();
            sum / samples.len() as f64
        }
        Task::Classification { classes } => {
            let mut counts = vec![0u64; classes];
            for &i in samples {
                counts[labels[i] as usize] += 1;
            }
            let mut best = 0;
            for (c, &n) in counts.iter().enumerate() {
                if n > counts[best] {
                    best = c;
                }
            }
            best as f64
        }
    }
}

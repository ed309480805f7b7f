//! Decision tree model and prediction.

use serde::{Deserialize, Serialize};

use crate::dataset::BinnedDataset;
use crate::error::{Error, Result};

/// A split point: samples with `bin <= threshold_bin` on `attribute` go left.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitCandidate {
    pub attribute: usize,
    pub threshold_bin: usize,
    pub gain: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TreeNode {
    Internal { split: SplitCandidate, left: usize, right: usize },
    Leaf { output: f64 },
}

/// Binary decision tree over binned attributes. Node 0 is the root.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TreeModel {
    pub nodes: Vec<TreeNode>,
    /// Maximum root-to-leaf path length, counted in nodes.
    pub max_depth: usize,
}

impl TreeModel {
    pub fn leaf(output: f64) -> Self {
        TreeModel { nodes: vec![TreeNode::Leaf { output }], max_depth: 1 }
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, TreeNode::Leaf { .. })).count()
    }

    pub fn n_internal(&self) -> usize {
        self.nodes.len() - self.n_leaves()
    }

    /// Routes one sample root-to-leaf and returns the leaf output.
    pub fn predict_sample(&self, data: &BinnedDataset, sample: usize) -> Result<f64> {
        let mut idx = 0;
        loop {
            match &self.nodes[idx] {
                TreeNode::Leaf { output } => return Ok(*output),
                TreeNode::Internal { split, left, right } => {
                    if split.attribute >= data.n_attributes() {
                        return Err(Error::ModelMismatch(format!(
                            "model splits on attribute {} but data has {}",
                            split.attribute,
                            data.n_attributes()
                        )));
                    }
                    idx = if data.bin(sample, split.attribute) <= split.threshold_bin {
                        *left
                    } else {
                        *right
                    };
                }
            }
        }
    }

    /// Predicts every sample of the dataset.
    pub fn predict(&self, data: &BinnedDataset) -> Result<Vec<f64>> {
        (0..data.n_samples()).map(|i| self.predict_sample(data, i)).collect()
    }
}

/// Routes every sample of `data` through `model`.
pub fn predict(model: &TreeModel, data: &BinnedDataset) -> Result<Vec<f64>> {
    model.predict(data)
}

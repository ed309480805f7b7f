//! Gradient boosting driver.
//!
//! Every iteration fits one regression tree (variance gain) to the negative
//! gradients of the loss at the current predictions, using the configured
//! split-finding strategy, and steps predictions by the learning rate. This
//! is the platform on which the parallel strategies are exercised; a
//! standalone single-tree mode covers information-gain classification.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::cluster::{MeterRow, SimulatedCluster};
use crate::dataset::{BinMapper, BinnedDataset, RawDataset, Task};
use crate::error::{Error, Result};
use crate::gain::GainKind;
use crate::metrics::{auc, mse};
use crate::strategies::{
    AttributeParallelFinder, DataParallelFullFinder, DataParallelQuantizedFinder, PVTreeConfig,
    PvTreeFinder, QuantizeConfig, Strategy,
};
use crate::trainer::{grow_tree, SequentialFinder, SplitFinder, TreeConfig};
use crate::tree::TreeModel;

pub const MODEL_SCHEMA_VERSION: u32 = 1;
pub const REPORT_SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Loss {
    SquaredError,
    Logistic,
}

impl Loss {
    pub fn validate_labels(&self, labels: &[f64]) -> Result<()> {
        match self {
            Loss::SquaredError => Ok(()),
            Loss::Logistic => {
                if labels.iter().any(|&y| y != 0.0 && y != 1.0) {
                    Err(Error::invalid("logistic loss requires binary labels in {0, 1}"))
                } else {
                    Ok(())
                }
            }
        }
    }

    /// Mean loss of raw predictions.
    pub fn value(&self, predictions: &[f64], labels: &[f64]) -> f64 {
        let n = labels.len() as f64;
        match self {
            Loss::SquaredError => {
                predictions.iter().zip(labels).map(|(p, y)| (p - y) * (p - y)).sum::<f64>() / n
            }
            Loss::Logistic => {
                // ln(1 + e^s) - y s, evaluated stably.
                predictions
                    .iter()
                    .zip(labels)
                    .map(|(&s, &y)| s.max(0.0) - y * s + (-s.abs()).exp().ln_1p())
                    .sum::<f64>()
                    / n
            }
        }
    }

    /// Negative gradient of the mean-free per-sample loss at each prediction.
    pub fn negative_gradients(&self, predictions: &[f64], labels: &[f64]) -> Vec<f64> {
        match self {
            Loss::SquaredError => {
                predictions.iter().zip(labels).map(|(p, y)| y - p).collect()
            }
            Loss::Logistic => predictions
                .iter()
                .zip(labels)
                .map(|(&s, &y)| y - 1.0 / (1.0 + (-s).exp()))
                .collect(),
        }
    }
}

/// Full boosting configuration, including the strategy selection.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoostConfig {
    pub n_trees: usize,
    pub learning_rate: f64,
    pub loss: Loss,
    pub tree: TreeConfig,
    pub strategy: Strategy,
}

impl BoostConfig {
    pub fn new(loss: Loss) -> Self {
        BoostConfig {
            n_trees: 20,
            learning_rate: 0.1,
            loss,
            tree: TreeConfig::new(GainKind::VarianceGain),
            strategy: Strategy::Sequential,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_trees < 1 {
            return Err(Error::invalid("n_trees must be at least 1"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return Err(Error::invalid("learning rate must be in (0, 1]"));
        }
        self.tree.validate()
    }
}

/// Trained gradient-boosted ensemble.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GbdtModel {
    pub schema_version: u32,
    pub loss: Loss,
    pub learning_rate: f64,
    pub mapper: BinMapper,
    pub trees: Vec<TreeModel>,
}

impl GbdtModel {
    /// Raw-score predictions (margins for logistic loss).
    pub fn predict_binned(&self, data: &BinnedDataset) -> Result<Vec<f64>> {
        let mut preds = vec![0.0; data.n_samples()];
        for tree in &self.trees {
            let out = tree.predict(data)?;
            for (p, o) in preds.iter_mut().zip(out) {
                *p += self.learning_rate * o;
            }
        }
        Ok(preds)
    }

    pub fn predict_raw(&self, data: &RawDataset) -> Result<Vec<f64>> {
        let binned = crate::dataset::bin_dataset(data, &self.mapper)?;
        self.predict_binned(&binned)
    }
}

/// Single decision tree with its binning, the classification counterpart.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SingleTreeModel {
    pub schema_version: u32,
    pub task: Task,
    pub mapper: BinMapper,
    pub tree: TreeModel,
}

impl SingleTreeModel {
    pub fn predict_raw(&self, data: &RawDataset) -> Result<Vec<f64>> {
        let binned = crate::dataset::bin_dataset(data, &self.mapper)?;
        self.tree.predict(&binned)
    }
}

/// Any model the toolkit can persist.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SavedModel {
    Gbdt(GbdtModel),
    SingleTree(SingleTreeModel),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub train_loss: f64,
    pub valid_metric: Option<f64>,
    /// Total communication bytes metered up to the end of this iteration.
    pub cumulative_comm_bytes: f64,
}

/// Everything a training run produced. The `timing` field is the only
/// nondeterministic part and is kept separate so reports can be compared.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub schema_version: u32,
    pub valid_metric_name: Option<String>,
    pub iterations: Vec<IterationRecord>,
    pub comm_by_phase: Vec<MeterRow>,
    /// Bytes metered at each splitting level, summed over all trees.
    pub comm_by_level: Vec<f64>,
    pub model: GbdtModel,
    /// Wall-clock seconds per iteration.
    pub timing: Vec<f64>,
}

/// Builds the configured strategy's split finder over `data`.
pub fn make_finder<'a>(
    strategy: &Strategy,
    data: &'a BinnedDataset,
    kind: GainKind,
    min_leaf: u64,
    cluster: Option<&'a mut SimulatedCluster>,
) -> Result<Box<dyn SplitFinder + 'a>> {
    match (strategy, cluster) {
        (Strategy::Sequential, _) => Ok(Box::new(SequentialFinder::new(data, kind, min_leaf))),
        (Strategy::DataParallelFull, Some(c)) => {
            Ok(Box::new(DataParallelFullFinder::new(data, c, kind, min_leaf)))
        }
        (Strategy::DataParallelQuantized { b }, Some(c)) => Ok(Box::new(
            DataParallelQuantizedFinder::new(data, c, QuantizeConfig { b: *b }, kind, min_leaf)?,
        )),
        (Strategy::PvTree { k, beta }, Some(c)) => Ok(Box::new(PvTreeFinder::new(
            data,
            c,
            PVTreeConfig { k: *k, beta: *beta },
            kind,
            min_leaf,
        )?)),
        (Strategy::AttributeParallel, Some(c)) => {
            Ok(Box::new(AttributeParallelFinder::new(data, c, kind, min_leaf)))
        }
        (_, None) => Err(Error::invalid("the selected strategy requires a simulated cluster")),
    }
}

/// Trains a GBDT ensemble. `data` must be a regression-task dataset; for
/// logistic loss its labels must be binary. When `valid` is given, MSE
/// (squared error) or AUC (logistic) is recorded per iteration.
pub fn train_gbdt(
    data: &BinnedDataset,
    valid: Option<&BinnedDataset>,
    config: &BoostConfig,
    mut cluster: Option<&mut SimulatedCluster>,
) -> Result<TrainReport> {
    config.validate()?;
    if data.task() != Task::Regression {
        return Err(Error::invalid("boosting expects a regression-task dataset"));
    }
    config.loss.validate_labels(data.labels())?;
    if config.strategy.needs_cluster() && cluster.is_none() {
        return Err(Error::invalid("the selected strategy requires a simulated cluster"));
    }
    if let Some(v) = valid {
        config.loss.validate_labels(v.labels())?;
    }
    // Boosted trees always regress on gradients.
    let tree_cfg = TreeConfig { gain_kind: GainKind::VarianceGain, ..config.tree };

    let labels = data.labels().to_vec();
    let mut preds = vec![0.0; data.n_samples()];
    let mut valid_preds = valid.map(|v| vec![0.0; v.n_samples()]);
    let mut iterations = Vec::with_capacity(config.n_trees);
    let mut comm_by_level = vec![0.0; tree_cfg.max_depth.saturating_sub(1)];
    let mut trees = Vec::with_capacity(config.n_trees);
    let mut timing = Vec::with_capacity(config.n_trees);

    let valid_metric_name = valid.map(|_| match config.loss {
        Loss::SquaredError => "MSE".to_string(),
        Loss::Logistic => "AUC".to_string(),
    });

    for _ in 0..config.n_trees {
        let started = Instant::now();
        let gradients = config.loss.negative_gradients(&preds, &labels);
        let tree_data = data.with_labels(gradients, Task::Regression)?;
        let grown = {
            let mut finder = make_finder(
                &config.strategy,
                &tree_data,
                GainKind::VarianceGain,
                tree_cfg.min_leaf,
                cluster.as_deref_mut(),
            )?;
            grow_tree(&tree_data, &tree_cfg, finder.as_mut())?
        };
        for (lvl, bytes) in grown.comm_bytes_by_level.iter().enumerate() {
            comm_by_level[lvl] += bytes;
        }
        let outputs = grown.model.predict(&tree_data)?;
        for (p, o) in preds.iter_mut().zip(&outputs) {
            *p += config.learning_rate * o;
        }
        let valid_metric = match (valid, valid_preds.as_mut()) {
            (Some(v), Some(vp)) => {
                let out = grown.model.predict(v)?;
                for (p, o) in vp.iter_mut().zip(&out) {
                    *p += config.learning_rate * o;
                }
                Some(match config.loss {
                    Loss::SquaredError => mse(vp, v.labels())?,
                    Loss::Logistic => auc(vp, v.labels())?,
                })
            }
            _ => None,
        };
        trees.push(grown.model);
        iterations.push(IterationRecord {
            train_loss: config.loss.value(&preds, &labels),
            valid_metric,
            cumulative_comm_bytes: cluster
                .as_ref()
                .map_or(0.0, |c| c.meter().total_bytes()),
        });
        timing.push(started.elapsed().as_secs_f64());
    }

    let model = GbdtModel {
        schema_version: MODEL_SCHEMA_VERSION,
        loss: config.loss,
        learning_rate: config.learning_rate,
        mapper: data.mapper().clone(),
        trees,
    };
    Ok(TrainReport {
        schema_version: REPORT_SCHEMA_VERSION,
        valid_metric_name,
        iterations,
        comm_by_phase: cluster.as_ref().map_or_else(Vec::new, |c| c.meter().rows()),
        comm_by_level,
        model,
        timing,
    })
}

/// Grows one tree with the configured strategy; the information-gain path
/// for classification tasks runs through here.
pub fn train_single_tree(
    data: &BinnedDataset,
    tree: &TreeConfig,
    strategy: &Strategy,
    mut cluster: Option<&mut SimulatedCluster>,
) -> Result<(TreeModel, Vec<MeterRow>)> {
    if strategy.needs_cluster() && cluster.is_none() {
        return Err(Error::invalid("the selected strategy requires a simulated cluster"));
    }
    let model = {
        let mut finder =
            make_finder(strategy, data, tree.gain_kind, tree.min_leaf, cluster.as_deref_mut())?;
        grow_tree(data, tree, finder.as_mut())?.model
    };
    let rows = cluster.as_ref().map_or_else(Vec::new, |c| c.meter().rows());
    Ok((model, rows))
}

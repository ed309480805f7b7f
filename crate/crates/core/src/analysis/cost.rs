//! Closed-form communication cost per tree, mirroring the live byte meter.
//!
//! The model assumes a full binary tree with `depth` splitting levels
//! (`2^depth - 1` split searches) over `total_samples` samples per level,
//! which is exactly what the meter records on a fully split tree. All
//! formulas carry the same `(M - 1)` total-traffic factor as the collectives;
//! evaluating at M = 2 gives the per-copy payload numbers.

use serde::{Deserialize, Serialize};

use crate::cluster::{WireSize, COUNT_BYTES};
use crate::error::{Error, Result};
use crate::strategies::{PVTreeConfig, Strategy};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CostModelInput {
    /// Total training samples N.
    pub total_samples: u64,
    /// Attribute count d.
    pub attributes: usize,
    pub machines: usize,
    /// Splitting levels of the tree (a depth-6 tree splits 2^6 - 1 nodes).
    pub depth: u32,
    /// Histogram bins per attribute.
    pub bins: usize,
    /// Local voting size.
    pub k: usize,
    /// Global voting multiplier.
    pub beta: f64,
    pub wire: WireSize,
}

impl CostModelInput {
    pub fn validate(&self) -> Result<()> {
        if self.total_samples == 0
            || self.attributes == 0
            || self.machines == 0
            || self.depth == 0
            || self.bins == 0
            || self.k == 0
        {
            return Err(Error::invalid("cost model inputs must be positive"));
        }
        if self.depth > 50 {
            return Err(Error::invalid("depth is limited to 50 levels"));
        }
        if !(self.beta > 1.0) {
            return Err(Error::invalid("beta must exceed 1"));
        }
        self.wire.validate()
    }

    fn split_nodes(&self) -> f64 {
        ((1u64 << self.depth) - 1) as f64
    }
}

/// Predicted communication bytes to train one tree with the given strategy.
pub fn communication_cost_model(input: &CostModelInput, strategy: &Strategy) -> Result<f64> {
    input.validate()?;
    let m = input.machines as f64;
    let peers = m - 1.0;
    let nodes = input.split_nodes();
    let d = input.attributes as f64;
    let bins = input.bins as f64;
    let cand = input.wire.candidate_bytes();
    let bytes = match strategy {
        Strategy::Sequential => 0.0,
        // Per node: every worker ships its d full histograms to the
        // coordinator, which broadcasts back the winning split.
        Strategy::DataParallelFull => {
            nodes * peers * (d * bins * input.wire.bytes_per_histogram_bin + cand)
        }
        // Per node: one fine-grained count exchange to agree on group
        // boundaries, then the gather shrinks to b coarse bins.
        Strategy::DataParallelQuantized { b } => {
            if *b < 2 {
                return Err(Error::invalid("quantized bin count b must be at least 2"));
            }
            let b = (*b).min(input.bins) as f64;
            nodes
                * peers
                * (d * bins * COUNT_BYTES + d * b * input.wire.bytes_per_histogram_bin + cand)
        }
        // Per node: each worker nominates k candidates, the shortlist's
        // histograms are merged, the result is broadcast. Independent of
        // both N and d (once d covers the shortlist).
        Strategy::PvTree { k, beta } => {
            let pv = PVTreeConfig { k: *k, beta: *beta };
            pv.validate()?;
            let shortlist = pv.global_size(input.attributes) as f64;
            let k = (*k).min(input.attributes) as f64;
            nodes
                * peers
                * (m * k * cand + shortlist * bins * input.wire.bytes_per_histogram_bin + cand)
        }
        // Per level: one split-flag bit per sample from the winning worker;
        // per node: one candidate from each attribute owner.
        Strategy::AttributeParallel => {
            let owners = input.machines.min(input.attributes) as f64;
            input.depth as f64
                * input.total_samples as f64
                * input.wire.bytes_per_sample_flag
                * peers
                + nodes * peers * owners * cand
        }
    };
    Ok(bytes)
}

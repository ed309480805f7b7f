//! Per-attribute, per-bin label statistics at a tree node.
//!
//! Regression bins keep their label sums in [`ExactSum`] form so that merging
//! per-worker histograms is exact: the merged histogram equals the
//! single-machine histogram bit for bit, for any worker count and partition.
//! Classification bins are integer class counts and need no such care.

use rayon::prelude::*;

use crate::dataset::{BinnedDataset, Task};
use crate::error::{Error, Result};
use crate::exact::ExactSum;

/// Finalized statistics of one bin (or any aggregate of bins).
#[derive(Clone, Debug, PartialEq)]
pub enum BinStats {
    Regression { count: u64, label_sum: f64, label_sq_sum: f64 },
    Classification { count: u64, class_counts: Vec<u64> },
}

impl BinStats {
    pub fn count(&self) -> u64 {
        match self {
            BinStats::Regression { count, .. } => *count,
            BinStats::Classification { count, .. } => *count,
        }
    }
}

#[derive(Clone, Debug)]
enum BinAcc {
    Regression { count: u64, sum: ExactSum, sq_sum: ExactSum },
    Classification { counts: Vec<u64> },
}

impl BinAcc {
    fn for_task(task: Task) -> Self {
        match task {
            Task::Regression => BinAcc::Regression {
                count: 0,
                sum: ExactSum::new(),
                sq_sum: ExactSum::new(),
            },
            Task::Classification { classes } => {
                BinAcc::Classification { counts: vec![0; classes] }
            }
        }
    }

    fn put(&mut self, label: f64) {
        match self {
            BinAcc::Regression { count, sum, sq_sum } => {
                *count += 1;
                sum.add(label);
                sq_sum.add(label * label);
            }
            BinAcc::Classification { counts } => {
                counts[label as usize] += 1;
            }
        }
    }

    fn merge(&mut self, other: &BinAcc) -> Result<()> {
        match (self, other) {
            (
                BinAcc::Regression { count, sum, sq_sum },
                BinAcc::Regression { count: oc, sum: os, sq_sum: oq },
            ) => {
                *count += oc;
                sum.merge(os);
                sq_sum.merge(oq);
                Ok(())
            }
            (BinAcc::Classification { counts }, BinAcc::Classification { counts: oc }) => {
                if counts.len() != oc.len() {
                    return Err(Error::Protocol("class count mismatch in histogram merge".into()));
                }
                for (a, b) in counts.iter_mut().zip(oc) {
                    *a += b;
                }
                Ok(())
            }
            _ => Err(Error::Protocol("task mismatch in histogram merge".into())),
        }
    }

    fn count(&self) -> u64 {
        match self {
            BinAcc::Regression { count, .. } => *count,
            BinAcc::Classification { counts } => counts.iter().sum(),
        }
    }

    fn stats(&self) -> BinStats {
        match self {
            BinAcc::Regression { count, sum, sq_sum } => BinStats::Regression {
                count: *count,
                label_sum: sum.value(),
                label_sq_sum: sq_sum.value(),
            },
            BinAcc::Classification { counts } => BinStats::Classification {
                count: counts.iter().sum(),
                class_counts: counts.clone(),
            },
        }
    }
}

/// Label statistics of one attribute at one node, one accumulator per bin.
#[derive(Clone, Debug)]
pub struct Histogram {
    attribute: usize,
    task: Task,
    bins: Vec<BinAcc>,
}

impl Histogram {
    pub fn empty(attribute: usize, task: Task, bin_count: usize) -> Self {
        Self {
            attribute,
            task,
            bins: vec![BinAcc::for_task(task); bin_count],
        }
    }

    pub fn attribute(&self) -> usize {
        self.attribute
    }

    pub fn task(&self) -> Task {
        self.task
    }

    pub fn bin_count(&self) -> usize {
        self.bins.len()
    }

    pub fn put(&mut self, bin: usize, label: f64) {
        self.bins[bin].put(label);
    }

    /// Per-bin sample counts.
    pub fn counts(&self) -> Vec<u64> {
        self.bins.iter().map(|b| b.count()).collect()
    }

    /// Finalized statistics of one bin.
    pub fn bin_stats(&self, bin: usize) -> BinStats {
        self.bins[bin].stats()
    }

    /// Finalized statistics of every bin, in bin order.
    pub fn all_bin_stats(&self) -> Vec<BinStats> {
        self.bins.iter().map(|b| b.stats()).collect()
    }

    /// Node totals: the exact bin-wise aggregate, finalized once.
    pub fn total(&self) -> BinStats {
        let mut acc = BinAcc::for_task(self.task);
        for b in &self.bins {
            acc.merge(b).expect("self-merge cannot mismatch");
        }
        acc.stats()
    }

    /// Bin-wise sum with another histogram of the same attribute. Exact.
    pub fn merge(&mut self, other: &Histogram) -> Result<()> {
        if self.attribute != other.attribute || self.bins.len() != other.bins.len() {
            return Err(Error::Protocol(format!(
                "cannot merge histogram of attribute {} ({} bins) with attribute {} ({} bins)",
                self.attribute,
                self.bins.len(),
                other.attribute,
                other.bins.len()
            )));
        }
        for (a, b) in self.bins.iter_mut().zip(&other.bins) {
            a.merge(b)?;
        }
        Ok(())
    }

    /// Merges adjacent fine bins into groups; `group_uppers[g]` is the last
    /// fine bin of group `g`. Statistics are exact sums of the member bins.
    pub fn grouped(&self, group_uppers: &[usize]) -> Result<Histogram> {
        if group_uppers.is_empty() || *group_uppers.last().unwrap() != self.bins.len() - 1 {
            return Err(Error::invalid("bin groups must cover the histogram"));
        }
        let mut out = Histogram::empty(self.attribute, self.task, group_uppers.len());
        let mut lo = 0;
        for (g, &hi) in group_uppers.iter().enumerate() {
            if hi >= self.bins.len() || (g > 0 && hi <= group_uppers[g - 1]) {
                return Err(Error::invalid("bin groups must be increasing and in range"));
            }
            for b in lo..=hi {
                out.bins[g].merge(&self.bins[b])?;
            }
            lo = hi + 1;
        }
        Ok(out)
    }
}

/// Builds one histogram per attribute over exactly `node_samples`.
///
/// Empty `node_samples` yields all-zero histograms. Parallelized over
/// attributes; each attribute is tallied in sample order, and the exact bin
/// accumulators make the result independent of any ordering anyway.
pub fn construct_histograms(data: &BinnedDataset, node_samples: &[usize]) -> Vec<Histogram> {
    construct_histograms_for(data, node_samples, &(0..data.n_attributes()).collect::<Vec<_>>())
}

/// Same as [`construct_histograms`], restricted to the given attributes.
pub fn construct_histograms_for(
    data: &BinnedDataset,
    node_samples: &[usize],
    attributes: &[usize],
) -> Vec<Histogram> {
    let labels = data.labels();
    let build = |&a: &usize| {
        let mut hist = Histogram::empty(a, data.task(), data.bin_count(a));
        let bins = data.attribute_bins(a);
        for &i in node_samples {
            hist.put(bins[i] as usize, labels[i]);
        }
        hist
    };
    if attributes.len() * node_samples.len() >= 1 << 14 {
        attributes.par_iter().map(build).collect()
    } else {
        attributes.iter().map(build).collect()
    }
}

//! Deterministic in-process cluster simulation with exact byte metering.
//!
//! Workers hold horizontal partitions of the sample ids; everything a
//! strategy exchanges across workers goes through one of the collectives
//! below, each of which records the payload bytes that would cross machine
//! boundaries. The metering convention is total cross-machine traffic:
//! gather- and broadcast-style collectives move `(M - 1)` copies of their
//! payload, so every collective meters zero when `M = 1`.

use std::collections::BTreeMap;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::BinnedDataset;
use crate::error::{Error, Result};
use crate::histogram::Histogram;
use crate::tree::SplitCandidate;

/// Bytes each value kind occupies on the simulated wire.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WireSize {
    pub bytes_per_attribute_index: f64,
    pub bytes_per_histogram_bin: f64,
    /// One bit per sample, accounted fractionally.
    pub bytes_per_sample_flag: f64,
    pub bytes_per_gain: f64,
}

impl Default for WireSize {
    fn default() -> Self {
        WireSize {
            bytes_per_attribute_index: 4.0,
            bytes_per_histogram_bin: 16.0,
            bytes_per_sample_flag: 1.0 / 8.0,
            bytes_per_gain: 8.0,
        }
    }
}

impl WireSize {
    pub fn validate(&self) -> Result<()> {
        let all = [
            self.bytes_per_attribute_index,
            self.bytes_per_histogram_bin,
            self.bytes_per_sample_flag,
            self.bytes_per_gain,
        ];
        if all.iter().any(|&b| !(b > 0.0)) {
            return Err(Error::invalid("wire sizes must be strictly positive"));
        }
        Ok(())
    }

    /// A split candidate on the wire: attribute index, threshold bin, gain.
    pub fn candidate_bytes(&self) -> f64 {
        2.0 * self.bytes_per_attribute_index + self.bytes_per_gain
    }
}

/// Per-bin count payload of the quantized strategy's count exchange.
pub const COUNT_BYTES: f64 = 8.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MessageKind {
    Candidates,
    Histograms,
    BinCounts,
    Flags,
    Split,
}

/// One row of the exported byte-accounting table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeterRow {
    pub phase: String,
    pub kind: MessageKind,
    pub bytes: f64,
    pub calls: u64,
}

/// Cumulative bytes by (phase label, message kind). Never decreases.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ByteMeter {
    cells: BTreeMap<(String, MessageKind), (f64, u64)>,
}

impl ByteMeter {
    fn record(&mut self, phase: &str, kind: MessageKind, bytes: f64) {
        debug_assert!(bytes >= 0.0);
        let cell = self.cells.entry((phase.to_string(), kind)).or_insert((0.0, 0));
        cell.0 += bytes;
        cell.1 += 1;
    }

    pub fn total_bytes(&self) -> f64 {
        self.cells.values().map(|(b, _)| b).sum()
    }

    pub fn bytes_for_kind(&self, kind: MessageKind) -> f64 {
        self.cells.iter().filter(|((_, k), _)| *k == kind).map(|(_, (b, _))| b).sum()
    }

    /// JSON-serializable table, deterministically ordered.
    pub fn rows(&self) -> Vec<MeterRow> {
        self.cells
            .iter()
            .map(|((phase, kind), (bytes, calls))| MeterRow {
                phase: phase.clone(),
                kind: *kind,
                bytes: *bytes,
                calls: *calls,
            })
            .collect()
    }
}

/// One collective call in the ordered trace.
#[derive(Clone, Debug, PartialEq)]
pub struct TraceEvent {
    pub phase: String,
    pub kind: MessageKind,
    pub bytes: f64,
}

/// M workers over a horizontal partition of the samples, with metered
/// collectives. Execution is sequential round-robin over workers, which is
/// the reference schedule; every collective is a barrier.
#[derive(Clone, Debug)]
pub struct SimulatedCluster {
    machines: usize,
    partitions: Vec<Vec<usize>>,
    owner: Vec<u32>,
    wire: WireSize,
    meter: ByteMeter,
    trace: Vec<TraceEvent>,
}

/// Shuffles sample ids by `seed` and deals them into `machines` near-equal
/// contiguous blocks (sizes differ by at most one).
pub fn partition(data: &BinnedDataset, machines: usize, seed: u64) -> Result<SimulatedCluster> {
    SimulatedCluster::partition(data, machines, seed)
}

impl SimulatedCluster {
    pub fn partition(data: &BinnedDataset, machines: usize, seed: u64) -> Result<Self> {
        Self::partition_n(data.n_samples(), machines, seed)
    }

    pub fn partition_n(n_samples: usize, machines: usize, seed: u64) -> Result<Self> {
        if machines == 0 {
            return Err(Error::invalid("cluster needs at least one machine"));
        }
        if machines > n_samples {
            return Err(Error::invalid(format!(
                "cannot spread {n_samples} samples over {machines} machines"
            )));
        }
        let mut ids: Vec<usize> = (0..n_samples).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        ids.shuffle(&mut rng);

        let base = n_samples / machines;
        let extra = n_samples % machines;
        let mut partitions = Vec::with_capacity(machines);
        let mut start = 0;
        for w in 0..machines {
            let len = base + usize::from(w < extra);
            partitions.push(ids[start..start + len].to_vec());
            start += len;
        }
        let mut owner = vec![0u32; n_samples];
        for (w, part) in partitions.iter().enumerate() {
            for &i in part {
                owner[i] = w as u32;
            }
        }
        Ok(SimulatedCluster {
            machines,
            partitions,
            owner,
            wire: WireSize::default(),
            meter: ByteMeter::default(),
            trace: Vec::new(),
        })
    }

    pub fn with_wire(mut self, wire: WireSize) -> Result<Self> {
        wire.validate()?;
        self.wire = wire;
        Ok(self)
    }

    pub fn machines(&self) -> usize {
        self.machines
    }

    pub fn wire(&self) -> &WireSize {
        &self.wire
    }

    pub fn partitions(&self) -> &[Vec<usize>] {
        &self.partitions
    }

    /// Restricts a node's canonical sample list to per-worker lists,
    /// preserving the canonical order within each worker.
    pub fn split_node_samples(&self, node_samples: &[usize]) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.machines];
        for &i in node_samples {
            out[self.owner[i] as usize].push(i);
        }
        out
    }

    pub fn meter(&self) -> &ByteMeter {
        &self.meter
    }

    pub fn trace(&self) -> &[TraceEvent] {
        &self.trace
    }

    fn note(&mut self, phase: &str, kind: MessageKind, bytes: f64) {
        self.meter.record(phase, kind, bytes);
        self.trace.push(TraceEvent { phase: phase.to_string(), kind, bytes });
    }

    /// Every worker contributes a list; afterwards every worker sees all of
    /// them. Meters `(M - 1)` times the total item payload.
    pub fn allgather<T: Clone>(
        &mut self,
        phase: &str,
        kind: MessageKind,
        per_worker: Vec<Vec<T>>,
        size_of: impl Fn(&T) -> f64,
    ) -> Result<Vec<Vec<T>>> {
        if per_worker.len() != self.machines {
            return Err(Error::Protocol(format!(
                "allgather expects {} worker lists, got {}",
                self.machines,
                per_worker.len()
            )));
        }
        let payload: f64 = per_worker.iter().flatten().map(&size_of).sum();
        self.note(phase, kind, (self.machines as f64 - 1.0) * payload);
        Ok(per_worker)
    }

    /// Bin-wise sums of per-worker histograms, one merged histogram per
    /// requested attribute. Meters `(M - 1) * bins * bytes_per_histogram_bin`
    /// per attribute. Every worker must supply the same attributes with the
    /// same bin layout.
    pub fn gather_histograms(
        &mut self,
        phase: &str,
        per_worker: Vec<Vec<Histogram>>,
    ) -> Result<Vec<Histogram>> {
        if per_worker.len() != self.machines {
            return Err(Error::Protocol(format!(
                "gather expects {} worker lists, got {}",
                self.machines,
                per_worker.len()
            )));
        }
        let mut workers = per_worker.into_iter();
        let mut merged = workers.next().expect("at least one machine");
        let mut payload_bins = 0.0;
        for hist in &merged {
            payload_bins += hist.bin_count() as f64;
        }
        for worker in workers {
            if worker.len() != merged.len() {
                return Err(Error::Protocol("workers gathered different attribute sets".into()));
            }
            for (acc, h) in merged.iter_mut().zip(&worker) {
                payload_bins += h.bin_count() as f64;
                acc.merge(h)?;
            }
        }
        // Each non-coordinator worker ships its local copy of every bin.
        let per_copy = payload_bins / self.machines as f64;
        let bytes = (self.machines as f64 - 1.0) * per_copy * self.wire.bytes_per_histogram_bin;
        self.note(phase, MessageKind::Histograms, bytes);
        Ok(merged)
    }

    /// Element-wise sums of per-worker per-attribute bin counts, used by the
    /// quantized strategy to agree on group boundaries.
    pub fn gather_bin_counts(
        &mut self,
        phase: &str,
        per_worker: Vec<Vec<Vec<u64>>>,
    ) -> Result<Vec<Vec<u64>>> {
        if per_worker.len() != self.machines {
            return Err(Error::Protocol("bin-count gather worker mismatch".into()));
        }
        let mut workers = per_worker.into_iter();
        let mut merged = workers.next().expect("at least one machine");
        let mut bins = merged.iter().map(|c| c.len()).sum::<usize>() as f64;
        for worker in workers {
            if worker.len() != merged.len() {
                return Err(Error::Protocol("bin-count gather attribute mismatch".into()));
            }
            for (acc, counts) in merged.iter_mut().zip(&worker) {
                if acc.len() != counts.len() {
                    return Err(Error::Protocol("bin-count gather shape mismatch".into()));
                }
                bins += counts.len() as f64;
                for (a, b) in acc.iter_mut().zip(counts) {
                    *a += b;
                }
            }
        }
        let per_copy = bins / self.machines as f64;
        let bytes = (self.machines as f64 - 1.0) * per_copy * COUNT_BYTES;
        self.note(phase, MessageKind::BinCounts, bytes);
        Ok(merged)
    }

    /// Coordinator shares the chosen split with every other worker.
    pub fn broadcast_split(&mut self, phase: &str, _split: &SplitCandidate) {
        let bytes = (self.machines as f64 - 1.0) * self.wire.candidate_bytes();
        self.note(phase, MessageKind::Split, bytes);
    }

    /// The split owner ships a 1-bit left/right indicator per node sample to
    /// every other worker.
    pub fn exchange_partition_flags(&mut self, phase: &str, n_node_samples: usize) {
        let bytes =
            (self.machines as f64 - 1.0) * n_node_samples as f64 * self.wire.bytes_per_sample_flag;
        self.note(phase, MessageKind::Flags, bytes);
    }
}

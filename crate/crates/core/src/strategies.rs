//! Parallel split-finding strategies over the simulated cluster.
//!
//! Four strategies implement the [`SplitFinder`] contract:
//!
//! * voting (PV-Tree): each worker nominates its top-k attributes from local
//!   data, a majority vote shortlists the global top `ceil(beta * k)`, and
//!   only the shortlisted attributes' histograms are merged for the exact
//!   final search. Communication is independent of the attribute count and
//!   the sample count.
//! * data-parallel full: merge every attribute's histogram, search once.
//! * data-parallel quantized: exchange coarse `b`-bin histograms instead;
//!   cheaper, but the split search only sees coarse thresholds.
//! * attribute-parallel: each worker owns a slice of the attributes and all
//!   samples; the winner ships per-sample split flags.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::cluster::{MessageKind, SimulatedCluster};
use crate::dataset::BinnedDataset;
use crate::error::{Error, Result};
use crate::gain::{find_best_split, find_best_split_for_attribute, GainKind, NodeStats};
use crate::histogram::{construct_histograms, construct_histograms_for, Histogram};
use crate::trainer::{NodeContext, SplitFinder};
use crate::tree::SplitCandidate;

/// Strategy selection plus parameters, as it appears in config files.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "kebab-case")]
pub enum Strategy {
    Sequential,
    DataParallelFull,
    DataParallelQuantized { b: usize },
    PvTree { k: usize, beta: f64 },
    AttributeParallel,
}

impl Strategy {
    pub fn needs_cluster(&self) -> bool {
        !matches!(self, Strategy::Sequential)
    }
}

/// Voting sizes: local top-k, global top-`ceil(beta * k)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PVTreeConfig {
    pub k: usize,
    pub beta: f64,
}

impl PVTreeConfig {
    pub fn new(k: usize) -> Self {
        PVTreeConfig { k, beta: 2.0 }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k < 1 {
            return Err(Error::invalid("local voting size k must be at least 1"));
        }
        if !(self.beta > 1.0) {
            return Err(Error::invalid("global voting multiplier beta must exceed 1"));
        }
        Ok(())
    }

    /// Global shortlist size for a dataset with `d` attributes.
    pub fn global_size(&self, d: usize) -> usize {
        ((self.beta * self.k.min(d) as f64).ceil() as usize).min(d)
    }
}

/// Target bin count for quantized histogram exchange.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuantizeConfig {
    pub b: usize,
}

impl QuantizeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.b < 2 {
            return Err(Error::invalid("quantized bin count b must be at least 2"));
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Voting
// ---------------------------------------------------------------------------

/// Per-attribute vote counts over the workers, with the best local gain seen
/// riding along for tie-breaking.
#[derive(Clone, Debug, Default)]
pub struct VoteTally {
    entries: BTreeMap<usize, (u64, f64)>,
}

impl VoteTally {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds one worker's nominations; a worker contributes at most one vote
    /// per attribute.
    pub fn add_worker_votes(&mut self, candidates: &[SplitCandidate]) {
        debug_assert!(
            {
                let mut attrs: Vec<usize> = candidates.iter().map(|c| c.attribute).collect();
                attrs.sort_unstable();
                attrs.windows(2).all(|w| w[0] != w[1])
            },
            "a worker votes each attribute at most once"
        );
        for cand in candidates {
            let entry = self.entries.entry(cand.attribute).or_insert((0, f64::NEG_INFINITY));
            entry.0 += 1;
            if cand.gain > entry.1 {
                entry.1 = cand.gain;
            }
        }
    }

    pub fn votes(&self, attribute: usize) -> u64 {
        self.entries.get(&attribute).map_or(0, |e| e.0)
    }

    pub fn max_votes(&self) -> u64 {
        self.entries.values().map(|e| e.0).max().unwrap_or(0)
    }

    /// Voted attributes ranked by vote count, then larger best local gain,
    /// then lower attribute id; truncated to `size`.
    pub fn top(&self, size: usize) -> Vec<usize> {
        let mut ranked: Vec<(usize, u64, f64)> =
            self.entries.iter().map(|(&a, &(v, g))| (a, v, g)).collect();
        ranked.sort_by(|x, y| {
            y.1.cmp(&x.1)
                .then(y.2.partial_cmp(&x.2).expect("gains are never NaN"))
                .then(x.0.cmp(&y.0))
        });
        ranked.truncate(size);
        ranked.into_iter().map(|(a, _, _)| a).collect()
    }
}

/// One worker's local vote: the `k` attribute-best candidates with the
/// largest local gains, sorted descending (ties to the lower attribute id).
/// Attributes without a valid split are not nominated, so fewer than `k`
/// candidates may come back.
pub fn local_vote(
    hists: &[Histogram],
    node: &NodeStats,
    kind: GainKind,
    k: usize,
) -> Result<Vec<SplitCandidate>> {
    if k < 1 {
        return Err(Error::invalid("local voting size k must be at least 1"));
    }
    let mut candidates = Vec::new();
    for hist in hists {
        if let Some(c) = find_best_split_for_attribute(hist, node, kind, 1)? {
            candidates.push(c);
        }
    }
    candidates.sort_by(|x, y| {
        y.gain.partial_cmp(&x.gain).expect("gains are never NaN").then(x.attribute.cmp(&y.attribute))
    });
    candidates.truncate(k);
    Ok(candidates)
}

/// Majority voting over all workers' nominations; returns at most
/// `global_size` attribute ids, best-ranked first.
pub fn global_vote(per_worker: &[Vec<SplitCandidate>], global_size: usize) -> Vec<usize> {
    let mut tally = VoteTally::new();
    for worker in per_worker {
        tally.add_worker_votes(worker);
    }
    tally.top(global_size)
}

// ---------------------------------------------------------------------------
// Histogram quantization
// ---------------------------------------------------------------------------

/// Rank-based grouping of `counts.len()` fine bins into at most `b` adjacent
/// groups of near-equal total count. Returns the last fine bin of each group.
pub fn quantize_boundaries(counts: &[u64], b: usize) -> Vec<usize> {
    let fine = counts.len();
    let b = b.min(fine).max(1);
    let total: u64 = counts.iter().sum();
    let mut uppers = Vec::with_capacity(b);
    let mut cum = 0u64;
    for bin in 0..fine {
        let group = uppers.len() + 1;
        if group == b {
            break;
        }
        cum += counts[bin];
        let bins_left = fine - bin - 1;
        let groups_left = b - group;
        let reached = cum as f64 >= group as f64 * total as f64 / b as f64;
        if (reached && bins_left >= groups_left) || bins_left == groups_left {
            uppers.push(bin);
        }
    }
    uppers.push(fine - 1);
    uppers
}

/// Merges a histogram down to at most `config.b` bins using its own counts
/// for the rank-based grouping. Totals are preserved exactly.
pub fn quantize_histogram(hist: &Histogram, config: &QuantizeConfig) -> Result<Histogram> {
    config.validate()?;
    hist.grouped(&quantize_boundaries(&hist.counts(), config.b))
}

// ---------------------------------------------------------------------------
// Per-node strategy drivers
// ---------------------------------------------------------------------------

/// What PV-Tree did at one node, for experiment instrumentation.
#[derive(Clone, Debug)]
pub struct PvTreeNodeOutcome {
    /// Each worker's local nominations, in worker order.
    pub local_tops: Vec<Vec<SplitCandidate>>,
    /// Globally shortlisted attributes, best-ranked first.
    pub shortlist: Vec<usize>,
    pub best: Option<SplitCandidate>,
}

/// Two-stage voting split search at one node: local vote, candidate
/// allgather, global vote, merged histograms of the shortlist, exact search.
/// The final gain always comes from the merged (global) histograms.
pub fn pv_tree_find_best_split(
    data: &BinnedDataset,
    cluster: &mut SimulatedCluster,
    node_samples: &[usize],
    config: &PVTreeConfig,
    kind: GainKind,
    min_leaf: u64,
) -> Result<PvTreeNodeOutcome> {
    config.validate()?;
    let d = data.n_attributes();
    let per_worker = cluster.split_node_samples(node_samples);

    let mut local_hists: Vec<Vec<Option<Histogram>>> = Vec::with_capacity(cluster.machines());
    let mut local_tops: Vec<Vec<SplitCandidate>> = Vec::with_capacity(cluster.machines());
    for (w, samples) in per_worker.iter().enumerate() {
        let hists = construct_histograms(data, samples);
        let local_stats =
            NodeStats::from_histogram(&hists[0], cluster.partitions()[w].len() as u64);
        local_tops.push(local_vote(&hists, &local_stats, kind, config.k)?);
        local_hists.push(hists.into_iter().map(Some).collect());
    }

    let candidate_bytes = cluster.wire().candidate_bytes();
    let all_candidates = cluster.allgather(
        "local-voting",
        MessageKind::Candidates,
        local_tops.clone(),
        |_| candidate_bytes,
    )?;
    let shortlist = global_vote(&all_candidates, config.global_size(d));
    if shortlist.is_empty() {
        return Ok(PvTreeNodeOutcome { local_tops, shortlist, best: None });
    }

    let per_worker_short: Vec<Vec<Histogram>> = local_hists
        .iter_mut()
        .map(|hists| {
            shortlist
                .iter()
                .map(|&a| hists[a].take().expect("shortlist attributes are unique"))
                .collect()
        })
        .collect();
    let merged = cluster.gather_histograms("histogram-gather", per_worker_short)?;
    let stats = NodeStats::from_histogram(&merged[0], data.n_samples() as u64);
    let best = find_best_split(&merged, &stats, kind, min_leaf)?;
    if let Some(split) = &best {
        cluster.broadcast_split("split-broadcast", split);
    }
    Ok(PvTreeNodeOutcome { local_tops, shortlist, best })
}

/// Merges every attribute's histogram across workers, then searches. Output
/// is identical to the sequential finder on the same node.
pub fn data_parallel_full_find_best_split(
    data: &BinnedDataset,
    cluster: &mut SimulatedCluster,
    node_samples: &[usize],
    kind: GainKind,
    min_leaf: u64,
) -> Result<Option<SplitCandidate>> {
    let per_worker = cluster.split_node_samples(node_samples);
    let locals: Vec<Vec<Histogram>> =
        per_worker.iter().map(|samples| construct_histograms(data, samples)).collect();
    let merged = cluster.gather_histograms("histogram-gather", locals)?;
    let stats = NodeStats::from_histogram(&merged[0], data.n_samples() as u64);
    let best = find_best_split(&merged, &stats, kind, min_leaf)?;
    if let Some(split) = &best {
        cluster.broadcast_split("split-broadcast", split);
    }
    Ok(best)
}

/// Exchanges one round of global bin counts to agree on rank-based group
/// boundaries, then gathers `b`-bin quantized histograms and searches over
/// the coarse thresholds only. The returned candidate's `threshold_bin` is
/// the fine-grained upper bin of the chosen coarse group, so the tree
/// partitions samples in fine bin space.
pub fn data_parallel_quantized_find_best_split(
    data: &BinnedDataset,
    cluster: &mut SimulatedCluster,
    node_samples: &[usize],
    qconfig: &QuantizeConfig,
    kind: GainKind,
    min_leaf: u64,
) -> Result<Option<SplitCandidate>> {
    qconfig.validate()?;
    let per_worker = cluster.split_node_samples(node_samples);
    let locals: Vec<Vec<Histogram>> =
        per_worker.iter().map(|samples| construct_histograms(data, samples)).collect();

    let per_worker_counts: Vec<Vec<Vec<u64>>> =
        locals.iter().map(|hists| hists.iter().map(|h| h.counts()).collect()).collect();
    let global_counts = cluster.gather_bin_counts("count-exchange", per_worker_counts)?;
    let groups: Vec<Vec<usize>> =
        global_counts.iter().map(|counts| quantize_boundaries(counts, qconfig.b)).collect();

    let quantized: Vec<Vec<Histogram>> = locals
        .iter()
        .map(|hists| {
            hists
                .iter()
                .zip(&groups)
                .map(|(h, g)| h.grouped(g))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let merged = cluster.gather_histograms("histogram-gather", quantized)?;
    let stats = NodeStats::from_histogram(&merged[0], data.n_samples() as u64);
    let coarse = find_best_split(&merged, &stats, kind, min_leaf)?;
    let best = coarse.map(|c| SplitCandidate {
        attribute: c.attribute,
        threshold_bin: groups[c.attribute][c.threshold_bin],
        gain: c.gain,
    });
    if let Some(split) = &best {
        cluster.broadcast_split("split-broadcast", split);
    }
    Ok(best)
}

/// Near-even contiguous attribute ranges for vertical partitioning.
pub fn attribute_ranges(n_attributes: usize, machines: usize) -> Vec<std::ops::Range<usize>> {
    let base = n_attributes / machines;
    let extra = n_attributes % machines;
    let mut ranges = Vec::with_capacity(machines);
    let mut start = 0;
    for w in 0..machines {
        let len = base + usize::from(w < extra);
        ranges.push(start..start + len);
        start += len;
    }
    ranges
}

/// Vertical partitioning: each worker searches its own attributes exactly
/// over all samples; the candidates are exchanged and the winner's owner
/// ships per-sample split flags. Output equals the sequential finder.
pub fn attribute_parallel_find_best_split(
    data: &BinnedDataset,
    cluster: &mut SimulatedCluster,
    node_samples: &[usize],
    kind: GainKind,
    min_leaf: u64,
) -> Result<Option<SplitCandidate>> {
    let ranges = attribute_ranges(data.n_attributes(), cluster.machines());
    let locals: Vec<Vec<SplitCandidate>> = ranges
        .iter()
        .map(|range| {
            let attrs: Vec<usize> = range.clone().collect();
            if attrs.is_empty() {
                return Ok(Vec::new());
            }
            let hists = construct_histograms_for(data, node_samples, &attrs);
            let stats = NodeStats::from_histogram(&hists[0], data.n_samples() as u64);
            Ok(find_best_split(&hists, &stats, kind, min_leaf)?.into_iter().collect())
        })
        .collect::<Result<Vec<_>>>()?;

    let candidate_bytes = cluster.wire().candidate_bytes();
    let all =
        cluster.allgather("candidate-exchange", MessageKind::Candidates, locals, |_| {
            candidate_bytes
        })?;
    let best = all.into_iter().flatten().fold(None::<SplitCandidate>, |best, cand| match best {
        None => Some(cand),
        Some(b) => {
            if cand.gain > b.gain
                || (cand.gain == b.gain
                    && (cand.attribute, cand.threshold_bin) < (b.attribute, b.threshold_bin))
            {
                Some(cand)
            } else {
                Some(b)
            }
        }
    });
    if best.is_some() {
        cluster.exchange_partition_flags("flag-exchange", node_samples.len());
    }
    Ok(best)
}

// ---------------------------------------------------------------------------
// SplitFinder adapters
// ---------------------------------------------------------------------------

pub struct PvTreeFinder<'a> {
    data: &'a BinnedDataset,
    cluster: &'a mut SimulatedCluster,
    config: PVTreeConfig,
    kind: GainKind,
    min_leaf: u64,
}

impl<'a> PvTreeFinder<'a> {
    pub fn new(
        data: &'a BinnedDataset,
        cluster: &'a mut SimulatedCluster,
        config: PVTreeConfig,
        kind: GainKind,
        min_leaf: u64,
    ) -> Result<Self> {
        config.validate()?;
        Ok(Self { data, cluster, config, kind, min_leaf })
    }
}

impl SplitFinder for PvTreeFinder<'_> {
    fn find_split(&mut self, node: &NodeContext<'_>) -> Result<Option<SplitCandidate>> {
        Ok(pv_tree_find_best_split(
            self.data,
            self.cluster,
            node.samples,
            &self.config,
            self.kind,
            self.min_leaf,
        )?
        .best)
    }

    fn comm_bytes(&self) -> f64 {
        self.cluster.meter().total_bytes()
    }
}

pub struct DataParallelFullFinder<'a> {
    data: &'a BinnedDataset,
    cluster: &'a mut SimulatedCluster,
    kind: GainKind,
    min_leaf: u64,
}

impl<'a> DataParallelFullFinder<'a> {
    pub fn new(
        data: &'a BinnedDataset,
        cluster: &'a mut SimulatedCluster,
        kind: GainKind,
        min_leaf: u64,
    ) -> Self {
        Self { data, cluster, kind, min_leaf }
    }
}

impl SplitFinder for DataParallelFullFinder<'_> {
    fn find_split(&mut self, node: &NodeContext<'_>) -> Result<Option<SplitCandidate>> {
        data_parallel_full_find_best_split(
            self.data,
            self.cluster,
            node.samples,
            self.kind,
            self.min_leaf,
        )
    }

    fn comm_bytes(&self) -> f64 {
        self.cluster.meter().total_bytes()
    }
}

pub struct DataParallelQuantizedFinder<'a> {
    data: &'a BinnedDataset,
    cluster: &'a mut SimulatedCluster,
    qconfig: QuantizeConfig,
    kind: GainKind,
    min_leaf: u64,
}

impl<'a> DataParallelQuantizedFinder<'a> {
    pub fn new(
        data: &'a BinnedDataset,
        cluster: &'a mut SimulatedCluster,
        qconfig: QuantizeConfig,
        kind: GainKind,
        min_leaf: u64,
    ) -> Result<Self> {
        qconfig.validate()?;
        Ok(Self { data, cluster, qconfig, kind, min_leaf })
    }
}

impl SplitFinder for DataParallelQuantizedFinder<'_> {
    fn find_split(&mut self, node: &NodeContext<'_>) -> Result<Option<SplitCandidate>> {
        data_parallel_quantized_find_best_split(
            self.data,
            self.cluster,
            node.samples,
            &self.qconfig,
            self.kind,
            self.min_leaf,
        )
    }

    fn comm_bytes(&self) -> f64 {
        self.cluster.meter().total_bytes()
    }
}

pub struct AttributeParallelFinder<'a> {
    data: &'a BinnedDataset,
    cluster: &'a mut SimulatedCluster,
    kind: GainKind,
    min_leaf: u64,
}

impl<'a> AttributeParallelFinder<'a> {
    pub fn new(
        data: &'a BinnedDataset,
        cluster: &'a mut SimulatedCluster,
        kind: GainKind,
        min_leaf: u64,
    ) -> Self {
        Self { data, cluster, kind, min_leaf }
    }
}

impl SplitFinder for AttributeParallelFinder<'_> {
    fn find_split(&mut self, node: &NodeContext<'_>) -> Result<Option<SplitCandidate>> {
        attribute_parallel_find_best_split(
            self.data,
            self.cluster,
            node.samples,
            self.kind,
            self.min_leaf,
        )
    }

    fn comm_bytes(&self) -> f64 {
        self.cluster.meter().total_bytes()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{bin_dataset, compute_bin_mapper, RawDataset, Task};
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn cand(attribute: usize, gain: f64) -> SplitCandidate {
        SplitCandidate { attribute, threshold_bin: 0, gain }
    }

    fn random_regression(n: usize, d: usize, seed: u64) -> BinnedDataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rows: Vec<Vec<f64>> =
            (0..n).map(|_| (0..d).map(|_| rng.random_range(0.0..1.0)).collect()).collect();
        let labels: Vec<f64> =
            rows.iter().map(|r| r[0] * 2.0 + rng.random_range(-0.5..0.5)).collect();
        let data = RawDataset::from_rows(&rows, labels, Task::Regression).unwrap();
        let mapper = compute_bin_mapper(&data, 32).unwrap();
        bin_dataset(&data, &mapper).unwrap()
    }

    #[test]
    fn local_vote_sorts_and_truncates() {
        let data = random_regression(128, 5, 1);
        let all: Vec<usize> = (0..128).collect();
        let hists = construct_histograms(&data, &all);
        let node = NodeStats::from_histogram(&hists[0], 128);
        let top2 = local_vote(&hists, &node, GainKind::VarianceGain, 2).unwrap();
        assert_eq!(top2.len(), 2);
        assert!(top2[0].gain >= top2[1].gain);
        let top_all = local_vote(&hists, &node, GainKind::VarianceGain, 99).unwrap();
        assert!(top_all.len() <= 5);
        assert_eq!(top_all[0].attribute, top2[0].attribute);
    }

    #[test]
    fn global_vote_counts_majority() {
        // Five workers, k = 2: votes a:4, b:3, c:2, d:1.
        let (a, b, c, d) = (0usize, 1usize, 2usize, 3usize);
        let per_worker = vec![
            vec![cand(a, 0.5), cand(b, 0.4)],
            vec![cand(a, 0.5), cand(c, 0.3)],
            vec![cand(a, 0.5), cand(d, 0.2)],
            vec![cand(a, 0.5), cand(b, 0.4)],
            vec![cand(b, 0.4), cand(c, 0.3)],
        ];
        assert_eq!(global_vote(&per_worker, 4), vec![a, b, c, d]);
        assert_eq!(global_vote(&per_worker, 2), vec![a, b]);
    }

    #[test]
    fn global_vote_single_worker_is_its_local_top() {
        let per_worker = vec![vec![cand(3, 0.9), cand(1, 0.7)]];
        assert_eq!(global_vote(&per_worker, 4), vec![3, 1]);
    }

    #[test]
    fn global_vote_tie_breaks_by_gain_then_id() {
        let per_worker = vec![vec![cand(2, 0.9)], vec![cand(5, 0.9)], vec![cand(7, 0.95)]];
        // All have one vote; 7 has the largest gain, then 2 and 5 tie on
        // votes with gains 0.9 each -> lower id first.
        assert_eq!(global_vote(&per_worker, 3), vec![7, 2, 5]);
    }

    #[test]
    fn vote_counts_bounded_by_machines() {
        let per_worker: Vec<Vec<SplitCandidate>> = (0..6).map(|_| vec![cand(0, 1.0)]).collect();
        let mut tally = VoteTally::new();
        for w in &per_worker {
            tally.add_worker_votes(w);
        }
        assert_eq!(tally.max_votes(), 6);
        assert_eq!(tally.votes(0), 6);
        assert_eq!(tally.votes(9), 0);
    }

    #[test]
    fn quantize_boundaries_equal_counts() {
        assert_eq!(quantize_boundaries(&[1, 1, 1, 1], 2), vec![1, 3]);
        assert_eq!(quantize_boundaries(&[1, 1, 1, 1], 4), vec![0, 1, 2, 3]);
        assert_eq!(quantize_boundaries(&[100, 0, 0, 0], 2), vec![0, 3]);
        assert_eq!(quantize_boundaries(&[5, 5], 8), vec![0, 1]);
    }

    #[test]
    fn quantize_identity_at_full_resolution() {
        let data = random_regression(64, 1, 3);
        let all: Vec<usize> = (0..64).collect();
        let hist = &construct_histograms(&data, &all)[0];
        let q = quantize_histogram(hist, &QuantizeConfig { b: hist.bin_count() }).unwrap();
        assert_eq!(q.all_bin_stats(), hist.all_bin_stats());
    }

    #[test]
    fn quantize_preserves_totals() {
        let data = random_regression(96, 1, 4);
        let all: Vec<usize> = (0..96).collect();
        let hist = &construct_histograms(&data, &all)[0];
        let q = quantize_histogram(hist, &QuantizeConfig { b: 4 }).unwrap();
        assert_eq!(q.bin_count(), 4);
        assert_eq!(q.total(), hist.total());
    }

    #[test]
    fn quantize_rejects_tiny_b() {
        let data = random_regression(16, 1, 5);
        let hist = &construct_histograms(&data, &(0..16).collect::<Vec<_>>())[0];
        assert!(quantize_histogram(hist, &QuantizeConfig { b: 1 }).is_err());
    }

    fn sequential_best(data: &BinnedDataset, node: &[usize]) -> Option<SplitCandidate> {
        let hists = construct_histograms(data, node);
        let stats = NodeStats::from_histogram(&hists[0], data.n_samples() as u64);
        find_best_split(&hists, &stats, GainKind::VarianceGain, 1).unwrap()
    }

    #[test]
    fn data_parallel_full_equals_sequential() {
        let data = random_regression(200, 6, 7);
        let all: Vec<usize> = (0..200).collect();
        let expected = sequential_best(&data, &all);
        for machines in [1, 2, 4, 8] {
            for seed in [0u64, 13] {
                let mut cluster = SimulatedCluster::partition(&data, machines, seed).unwrap();
                let got = data_parallel_full_find_best_split(
                    &data,
                    &mut cluster,
                    &all,
                    GainKind::VarianceGain,
                    1,
                )
                .unwrap();
                assert_eq!(got, expected, "M={machines} seed={seed}");
            }
        }
    }

    #[test]
    fn attribute_parallel_equals_sequential() {
        let data = random_regression(150, 7, 8);
        let all: Vec<usize> = (0..150).collect();
        let expected = sequential_best(&data, &all);
        for machines in [1, 2, 3, 4] {
            let mut cluster = SimulatedCluster::partition(&data, machines, 5).unwrap();
            let got = attribute_parallel_find_best_split(
                &data,
                &mut cluster,
                &all,
                GainKind::VarianceGain,
                1,
            )
            .unwrap();
            assert_eq!(got, expected, "M={machines}");
        }
    }

    #[test]
    fn pv_tree_with_full_voting_equals_sequential() {
        let data = random_regression(240, 5, 9);
        let all: Vec<usize> = (0..240).collect();
        let expected = sequential_best(&data, &all);
        for machines in [1, 2, 4] {
            let mut cluster = SimulatedCluster::partition(&data, machines, 3).unwrap();
            let outcome = pv_tree_find_best_split(
                &data,
                &mut cluster,
                &all,
                &PVTreeConfig::new(5),
                GainKind::VarianceGain,
                1,
            )
            .unwrap();
            assert_eq!(outcome.best, expected, "M={machines}");
            // The winner always comes from the shortlist.
            let winner = outcome.best.unwrap().attribute;
            assert!(outcome.shortlist.contains(&winner));
        }
    }

    #[test]
    fn quantized_at_full_resolution_equals_full() {
        let data = random_regression(180, 4, 10);
        let all: Vec<usize> = (0..180).collect();
        let mut c1 = SimulatedCluster::partition(&data, 4, 2).unwrap();
        let full =
            data_parallel_full_find_best_split(&data, &mut c1, &all, GainKind::VarianceGain, 1)
                .unwrap();
        let b = (0..4).map(|a| data.bin_count(a)).max().unwrap();
        let mut c2 = SimulatedCluster::partition(&data, 4, 2).unwrap();
        let quant = data_parallel_quantized_find_best_split(
            &data,
            &mut c2,
            &all,
            &QuantizeConfig { b },
            GainKind::VarianceGain,
            1,
        )
        .unwrap();
        assert_eq!(quant, full);
    }

    #[test]
    fn quantized_bytes_scale_with_b() {
        let data = random_regression(256, 4, 11);
        let all: Vec<usize> = (0..256).collect();
        let run = |b: usize| {
            let mut cluster = SimulatedCluster::partition(&data, 4, 2).unwrap();
            data_parallel_quantized_find_best_split(
                &data,
                &mut cluster,
                &all,
                &QuantizeConfig { b },
                GainKind::VarianceGain,
                1,
            )
            .unwrap();
            cluster.meter().bytes_for_kind(MessageKind::Histograms)
        };
        // 8 coarse bins ship half the histogram bytes of 16.
        assert_eq!(run(8) * 2.0, run(16));
    }

    #[test]
    fn pv_tree_bytes_independent_of_attribute_count() {
        let all: Vec<usize> = (0..256).collect();
        let bytes_for = |d: usize| {
            let mut rng = ChaCha8Rng::seed_from_u64(17);
            let rows: Vec<Vec<f64>> = (0..256)
                .map(|_| (0..d).map(|_| rng.random_range(0.0..1.0)).collect())
                .collect();
            let labels: Vec<f64> = (0..256).map(|_| rng.random_range(0.0..1.0)).collect();
            let raw = RawDataset::from_rows(&rows, labels, Task::Regression).unwrap();
            let mapper = compute_bin_mapper(&raw, 17).unwrap();
            let data = bin_dataset(&raw, &mapper).unwrap();
            let mut cluster = SimulatedCluster::partition(&data, 4, 2).unwrap();
            pv_tree_find_best_split(
                &data,
                &mut cluster,
                &all,
                &PVTreeConfig::new(3),
                GainKind::VarianceGain,
                1,
            )
            .unwrap();
            cluster.meter().total_bytes()
        };
        // Uniform values: every attribute has the full 16 bins, so gathered
        // shortlists have identical shapes across d.
        assert_eq!(bytes_for(12), bytes_for(48));
    }
}

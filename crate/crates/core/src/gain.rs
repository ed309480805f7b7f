//! Informativeness measures and the threshold scan.
//!
//! Information gain is the weighted entropy reduction of the labels from a
//! split, variance gain the weighted variance reduction. Weights are
//! empirical probabilities relative to the tree root, so parent terms stay
//! comparable across depths. Entropy is in nats; the log base only rescales
//! gains and never changes which split wins.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::histogram::{BinStats, Histogram};
use crate::tree::SplitCandidate;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GainKind {
    /// Entropy reduction; classification only.
    InformationGain,
    /// Variance reduction; regression only.
    VarianceGain,
}

/// Node-level aggregate used by the threshold scan.
#[derive(Clone, Debug, PartialEq)]
pub struct NodeStats {
    /// Fraction of root samples at this node (empirical P of reaching it).
    pub weight: f64,
    pub total: BinStats,
}

impl NodeStats {
    /// Derives node totals from any attribute's histogram; `root_count` is
    /// the sample count at the tree root.
    pub fn from_histogram(hist: &Histogram, root_count: u64) -> Self {
        let total = hist.total();
        let weight = if root_count == 0 { 0.0 } else { total.count() as f64 / root_count as f64 };
        NodeStats { weight, total }
    }

    pub fn count(&self) -> u64 {
        self.total.count()
    }
}

/// Entropy in nats of a class-count vector, with 0 * ln 0 = 0.
fn entropy(class_counts: &[u64], count: u64) -> f64 {
    if count == 0 {
        return 0.0;
    }
    let n = count as f64;
    let mut weighted = 0.0;
    for &c in class_counts {
        if c > 0 {
            let c = c as f64;
            weighted += c * c.ln();
        }
    }
    n.ln() - weighted / n
}

/// Variance from single-pass aggregates, clamped at zero against
/// floating-point cancellation.
fn variance(count: u64, sum: f64, sq_sum: f64) -> f64 {
    if count == 0 {
        return 0.0;
    }
    let n = count as f64;
    let mean = sum / n;
    (sq_sum / n - mean * mean).max(0.0)
}

fn impurity(kind: GainKind, stats: &BinStats) -> Result<f64> {
    match (kind, stats) {
        (GainKind::InformationGain, BinStats::Classification { count, class_counts }) => {
            Ok(entropy(class_counts, *count))
        }
        (GainKind::VarianceGain, BinStats::Regression { count, label_sum, label_sq_sum }) => {
            Ok(variance(*count, *label_sum, *label_sq_sum))
        }
        _ => Err(Error::invalid("gain kind does not match the task's statistics")),
    }
}

fn combine(left: &BinStats, right: &BinStats) -> Result<BinStats> {
    match (left, right) {
        (
            BinStats::Regression { count: lc, label_sum: ls, label_sq_sum: lq },
            BinStats::Regression { count: rc, label_sum: rs, label_sq_sum: rq },
        ) => Ok(BinStats::Regression {
            count: lc + rc,
            label_sum: ls + rs,
            label_sq_sum: lq + rq,
        }),
        (
            BinStats::Classification { count: lc, class_counts: lcc },
            BinStats::Classification { count: rc, class_counts: rcc },
        ) => {
            if lcc.len() != rcc.len() {
                return Err(Error::invalid("class count mismatch"));
            }
            Ok(BinStats::Classification {
                count: lc + rc,
                class_counts: lcc.iter().zip(rcc).map(|(a, b)| a + b).collect(),
            })
        }
        _ => Err(Error::invalid("cannot combine statistics of different tasks")),
    }
}

/// Weighted impurity reduction of splitting a node (given by `left + right`)
/// into the two sides. `node_weight` is the node's empirical probability
/// relative to the root. Clamped to be nonnegative.
pub fn split_gain(
    kind: GainKind,
    left: &BinStats,
    right: &BinStats,
    node_weight: f64,
) -> Result<f64> {
    let parent = combine(left, right)?;
    let pc = parent.count();
    if pc == 0 {
        return Ok(0.0);
    }
    let w_left = node_weight * left.count() as f64 / pc as f64;
    let w_right = node_weight * right.count() as f64 / pc as f64;
    let gain = node_weight * impurity(kind, &parent)?
        - w_left * impurity(kind, left)?
        - w_right * impurity(kind, right)?;
    debug_assert!(gain > -1e-9 * (1.0 + gain.abs()), "gain fell below tolerance: {gain}");
    Ok(gain.max(0.0))
}

// Running left-hand aggregate of the threshold scan. This is plain f64
// accumulation in fixed bin order, so it is identical no matter how the
// histogram was assembled (the per-bin values themselves are exact).
enum Running {
    Regression { count: u64, sum: f64, sq_sum: f64 },
    Classification { counts: Vec<u64> },
}

impl Running {
    fn new(template: &BinStats) -> Self {
        match template {
            BinStats::Regression { .. } => Running::Regression { count: 0, sum: 0.0, sq_sum: 0.0 },
            BinStats::Classification { class_counts, .. } => {
                Running::Classification { counts: vec![0; class_counts.len()] }
            }
        }
    }

    fn push(&mut self, bin: &BinStats) {
        match (self, bin) {
            (
                Running::Regression { count, sum, sq_sum },
                BinStats::Regression { count: c, label_sum: s, label_sq_sum: q },
            ) => {
                *count += c;
                *sum += s;
                *sq_sum += q;
            }
            (Running::Classification { counts }, BinStats::Classification { class_counts, .. }) => {
                for (a, b) in counts.iter_mut().zip(class_counts) {
                    *a += b;
                }
            }
            _ => unreachable!("histogram bins share one task"),
        }
    }

    fn left_stats(&self) -> BinStats {
        match self {
            Running::Regression { count, sum, sq_sum } => BinStats::Regression {
                count: *count,
                label_sum: *sum,
                label_sq_sum: *sq_sum,
            },
            Running::Classification { counts } => BinStats::Classification {
                count: counts.iter().sum(),
                class_counts: counts.clone(),
            },
        }
    }

    /// total - left, the right-hand side of the threshold.
    fn right_stats(&self, total: &BinStats) -> BinStats {
        match (self, total) {
            (
                Running::Regression { count, sum, sq_sum },
                BinStats::Regression { count: tc, label_sum: ts, label_sq_sum: tq },
            ) => BinStats::Regression {
                count: tc - count,
                label_sum: ts - sum,
                label_sq_sum: tq - sq_sum,
            },
            (
                Running::Classification { counts },
                BinStats::Classification { class_counts, .. },
            ) => {
                let rem: Vec<u64> =
                    class_counts.iter().zip(counts).map(|(t, l)| t - l).collect();
                BinStats::Classification { count: rem.iter().sum(), class_counts: rem }
            }
            _ => unreachable!(),
        }
    }
}

/// Scans thresholds left to right and returns the best split of one
/// attribute, or `None` when no threshold leaves `min_leaf` samples on both
/// sides or every gain is zero. Ties keep the lower threshold.
pub fn find_best_split_for_attribute(
    hist: &Histogram,
    node: &NodeStats,
    kind: GainKind,
    min_leaf: u64,
) -> Result<Option<SplitCandidate>> {
    let bins = hist.all_bin_stats();
    if bins.len() < 2 {
        return Ok(None);
    }
    let total = &node.total;
    let mut left = Running::new(total);
    let mut best: Option<SplitCandidate> = None;
    for t in 0..bins.len() - 1 {
        left.push(&bins[t]);
        let left_stats = left.left_stats();
        if left_stats.count() < min_leaf {
            continue;
        }
        let right_stats = left.right_stats(total);
        if right_stats.count() < min_leaf {
            break; // left only grows from here
        }
        let gain = split_gain(kind, &left_stats, &right_stats, node.weight)?;
        if best.as_ref().map_or(true, |b| gain > b.gain) {
            best = Some(SplitCandidate { attribute: hist.attribute(), threshold_bin: t, gain });
        }
    }
    Ok(best.filter(|b| b.gain > 0.0))
}

/// Best split over all attributes; ties broken by lower attribute id, then
/// lower threshold bin (the per-attribute scan already keeps the lower bin).
pub fn find_best_split(
    hists: &[Histogram],
    node: &NodeStats,
    kind: GainKind,
    min_leaf: u64,
) -> Result<Option<SplitCandidate>> {
    let mut best: Option<SplitCandidate> = None;
    for hist in hists {
        if let Some(cand) = find_best_split_for_attribute(hist, node, kind, min_leaf)? {
            let better = match &best {
                None => true,
                Some(b) => {
                    cand.gain > b.gain
                        || (cand.gain == b.gain
                            && (cand.attribute, cand.threshold_bin) < (b.attribute, b.threshold_bin))
                }
            };
            if better {
                best = Some(cand);
            }
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{bin_dataset, compute_bin_mapper, RawDataset, Task};
    use crate::histogram::construct_histograms;
    use proptest::prelude::*;

    fn node_of(hist: &Histogram, root: u64) -> NodeStats {
        NodeStats::from_histogram(hist, root)
    }

    fn setup(rows: Vec<Vec<f64>>, labels: Vec<f64>, task: Task) -> (Vec<Histogram>, NodeStats) {
        let n = rows.len();
        let data = RawDataset::from_rows(&rows, labels, task).unwrap();
        let mapper = compute_bin_mapper(&data, 255).unwrap();
        let binned = bin_dataset(&data, &mapper).unwrap();
        let all: Vec<usize> = (0..n).collect();
        let hists = construct_histograms(&binned, &all);
        let node = node_of(&hists[0], n as u64);
        (hists, node)
    }

    #[test]
    fn pure_node_has_zero_gain_everywhere() {
        let (hists, node) = setup(
            vec![vec![0.0], vec![1.0], vec![2.0], vec![3.0]],
            vec![1.0, 1.0, 1.0, 1.0],
            Task::Classification { classes: 2 },
        );
        assert!(find_best_split(&hists, &node, GainKind::InformationGain, 1)
            .unwrap()
            .is_none());
    }

    #[test]
    fn perfect_binary_split_gains_ln_two() {
        let (hists, node) = setup(
            vec![vec![0.0], vec![0.0], vec![1.0], vec![1.0]],
            vec![0.0, 0.0, 1.0, 1.0],
            Task::Classification { classes: 2 },
        );
        let best = find_best_split(&hists, &node, GainKind::InformationGain, 1)
            .unwrap()
            .unwrap();
        assert_eq!(best.threshold_bin, 0);
        assert!((best.gain - std::f64::consts::LN_2).abs() < 1e-12);
    }

    #[test]
    fn perfect_regression_split_gains_variance() {
        let (hists, node) = setup(
            vec![vec![0.0], vec![0.0], vec![1.0], vec![1.0]],
            vec![0.0, 0.0, 2.0, 2.0],
            Task::Regression,
        );
        let best = find_best_split(&hists, &node, GainKind::VarianceGain, 1).unwrap().unwrap();
        assert!((best.gain - 1.0).abs() < 1e-12);
    }

    #[test]
    fn single_bin_attribute_yields_none() {
        let (hists, node) = setup(
            vec![vec![7.0], vec![7.0], vec![7.0]],
            vec![0.0, 1.0, 2.0],
            Task::Regression,
        );
        assert!(find_best_split_for_attribute(&hists[0], &node, GainKind::VarianceGain, 1)
            .unwrap()
            .is_none());
    }

    #[test]
    fn kind_task_mismatch_is_error() {
        let (hists, node) = setup(
            vec![vec![0.0], vec![1.0]],
            vec![0.0, 1.0],
            Task::Regression,
        );
        assert!(find_best_split(&hists, &node, GainKind::InformationGain, 1).is_err());
    }

    #[test]
    fn lower_attribute_wins_ties() {
        // Two identical attributes: identical gains, attribute 0 must win.
        let (hists, node) = setup(
            vec![vec![0.0, 0.0], vec![0.0, 0.0], vec![1.0, 1.0], vec![1.0, 1.0]],
            vec![0.0, 0.0, 2.0, 2.0],
            Task::Regression,
        );
        let best = find_best_split(&hists, &node, GainKind::VarianceGain, 1).unwrap().unwrap();
        assert_eq!(best.attribute, 0);
    }

    #[test]
    fn min_leaf_restricts_thresholds() {
        let (hists, node) = setup(
            vec![vec![0.0], vec![1.0], vec![2.0], vec![3.0]],
            vec![0.0, 0.0, 0.0, 10.0],
            Task::Regression,
        );
        let best = find_best_split(&hists, &node, GainKind::VarianceGain, 2).unwrap().unwrap();
        // Thresholds leaving fewer than 2 on a side are skipped.
        assert_eq!(best.threshold_bin, 1);
    }

    // Brute-force oracle evaluating the definition directly on raw samples.
    fn oracle_best(
        values: &[Vec<f64>],
        labels: &[f64],
        node_weight: f64,
    ) -> Option<(usize, usize, f64)> {
        let d = values[0].len();
        let n = labels.len();
        let mut best: Option<(usize, usize, f64)> = None;
        for a in 0..d {
            let mut uniq: Vec<f64> = values.iter().map(|r| r[a]).collect();
            uniq.sort_by(|x, y| x.partial_cmp(y).unwrap());
            uniq.dedup();
            for (t, &cut) in uniq.iter().enumerate().take(uniq.len().saturating_sub(1)) {
                let (mut l, mut r) = (Vec::new(), Vec::new());
                for i in 0..n {
                    if values[i][a] <= cut {
                        l.push(labels[i]);
                    } else {
                        r.push(labels[i]);
                    }
                }
                let var = |v: &[f64]| {
                    let m = v.iter().sum::<f64>() / v.len() as f64;
                    v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / v.len() as f64
                };
                let all: Vec<f64> = labels.to_vec();
                let g = node_weight
                    * (var(&all)
                        - (l.len() as f64 / n as f64) * var(&l)
                        - (r.len() as f64 / n as f64) * var(&r));
                if g > 0.0 && best.map_or(true, |(_, _, bg)| g > bg) {
                    best = Some((a, t, g));
                }
            }
        }
        best
    }

    proptest! {
        // Exhaustive agreement with the direct definition on raw samples.
        #[test]
        fn matches_brute_force_definition(
            seed in 0u64..500,
            n in 4usize..48,
            d in 1usize..4,
        ) {
            use rand::prelude::*;
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let rows: Vec<Vec<f64>> = (0..n)
                .map(|_| (0..d).map(|_| rng.random_range(0i32..6) as f64).collect())
                .collect();
            // Continuous labels: exact gain ties across cut points would
            // round differently in the two routes and make argmax ambiguous.
            let labels: Vec<f64> = (0..n).map(|_| rng.random_range(-4.0..4.0)).collect();
            let (hists, node) = setup(rows.clone(), labels.clone(), Task::Regression);
            let fast = find_best_split(&hists, &node, GainKind::VarianceGain, 1).unwrap();
            let slow = oracle_best(&rows, &labels, node.weight);
            match (fast, slow) {
                (None, None) => {}
                (Some(f), Some((a, t, g))) => {
                    prop_assert_eq!(f.attribute, a);
                    prop_assert_eq!(f.threshold_bin, t);
                    prop_assert!((f.gain - g).abs() <= 1e-9 * (1.0 + g.abs()));
                }
                (f, s) => prop_assert!(false, "disagree: {:?} vs {:?}", f, s),
            }
        }

        // Scaling labels by c scales every variance gain by c^2 and keeps the winner.
        #[test]
        fn variance_gain_scales_quadratically(seed in 0u64..200, c in 1.0f64..16.0) {
            use rand::prelude::*;
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let rows: Vec<Vec<f64>> = (0..24)
                .map(|_| vec![rng.random_range(0i32..5) as f64, rng.random_range(0i32..5) as f64])
                .collect();
            let labels: Vec<f64> = (0..24).map(|_| rng.random_range(-8.0..8.0)).collect();
            let scaled: Vec<f64> = labels.iter().map(|&l| l * c).collect();
            let (h1, n1) = setup(rows.clone(), labels, Task::Regression);
            let (h2, n2) = setup(rows, scaled, Task::Regression);
            let a = find_best_split(&h1, &n1, GainKind::VarianceGain, 1).unwrap();
            let b = find_best_split(&h2, &n2, GainKind::VarianceGain, 1).unwrap();
            match (a, b) {
                (None, None) => {}
                (Some(a), Some(b)) => {
                    prop_assert_eq!((a.attribute, a.threshold_bin), (b.attribute, b.threshold_bin));
                    prop_assert!((b.gain - c * c * a.gain).abs() <= 1e-9 * (1.0 + b.gain.abs()));
                }
                other => prop_assert!(false, "disagree: {:?}", other),
            }
        }

        // Gains are never negative.
        #[test]
        fn gains_nonnegative(seed in 0u64..200) {
            use rand::prelude::*;
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let rows: Vec<Vec<f64>> = (0..16)
                .map(|_| vec![rng.random_range(0i32..4) as f64])
                .collect();
            let labels: Vec<f64> = (0..16).map(|_| rng.random_range(0i32..3) as f64).collect();
            let (hists, node) = setup(rows, labels, Task::Classification { classes: 3 });
            if let Some(c) = find_best_split(&hists, &node, GainKind::InformationGain, 1).unwrap() {
                prop_assert!(c.gain >= 0.0);
            }
        }
    }
}

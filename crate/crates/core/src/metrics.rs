//! Evaluation metrics: MSE, AUC, and NDCG@T.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_NDCG_TRUNCATION: usize = 10;
pub const MAX_RELEVANCE: f64 = 31.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricKind {
    Mse,
    Auc,
    Ndcg { truncation: usize },
}

impl MetricKind {
    pub fn name(&self) -> String {
        match self {
            MetricKind::Mse => "MSE".to_string(),
            MetricKind::Auc => "AUC".to_string(),
            MetricKind::Ndcg { truncation } => format!("NDCG@{truncation}"),
        }
    }
}

/// A computed metric with the number of samples (or queries) behind it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub metric: String,
    pub value: f64,
    pub count: u64,
}

pub fn mse(predictions: &[f64], labels: &[f64]) -> Result<f64> {
    if predictions.len() != labels.len() || predictions.is_empty() {
        return Err(Error::Shape("predictions and labels must have equal nonzero length".into()));
    }
    let n = predictions.len() as f64;
    Ok(predictions.iter().zip(labels).map(|(p, y)| (p - y) * (p - y)).sum::<f64>() / n)
}

/// Fraction of (positive, negative) pairs ordered correctly by score, ties
/// counted 1/2. Computed from average ranks, which is equivalent.
pub fn auc(scores: &[f64], labels: &[f64]) -> Result<f64> {
    if scores.len() != labels.len() || scores.is_empty() {
        return Err(Error::Shape("scores and labels must have equal nonzero length".into()));
    }
    if labels.iter().any(|&l| l != 0.0 && l != 1.0) {
        return Err(Error::invalid("AUC requires binary labels in {0, 1}"));
    }
    let n_pos = labels.iter().filter(|&&l| l == 1.0).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::UndefinedMetric(
            "AUC is undefined when only one class is present".into(),
        ));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].partial_cmp(&scores[b]).unwrap().then(a.cmp(&b)));

    // Average rank within each tied-score group.
    let mut rank_sum_pos = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j < order.len() && scores[order[j]] == scores[order[i]] {
            j += 1;
        }
        let avg_rank = (i + 1 + j) as f64 / 2.0; // mean of ranks i+1 ..= j
        for &idx in &order[i..j] {
            if labels[idx] == 1.0 {
                rank_sum_pos += avg_rank;
            }
        }
        i = j;
    }
    let n_pos = n_pos as f64;
    Ok((rank_sum_pos - n_pos * (n_pos + 1.0) / 2.0) / (n_pos * n_neg as f64))
}

fn dcg(relevances: &[f64], truncation: usize) -> f64 {
    relevances
        .iter()
        .take(truncation)
        .enumerate()
        .map(|(i, &rel)| (2f64.powf(rel) - 1.0) / ((i + 2) as f64).log2())
        .sum()
}

/// Mean over queries of DCG@T / ideal DCG@T, with gain `2^rel - 1` and
/// `log2(rank + 1)` discount. Queries whose ideal DCG is zero (all-zero
/// relevance) are skipped; score ties keep the original document order.
pub fn ndcg(
    scores: &[f64],
    relevances: &[f64],
    query_ids: &[u64],
    truncation: usize,
) -> Result<f64> {
    if scores.len() != relevances.len() || scores.len() != query_ids.len() || scores.is_empty() {
        return Err(Error::Shape("scores, relevances and query ids must align".into()));
    }
    if truncation == 0 {
        return Err(Error::invalid("NDCG truncation must be positive"));
    }
    for &r in relevances {
        if r.fract() != 0.0 || !(0.0..=MAX_RELEVANCE).contains(&r) {
            return Err(Error::invalid(format!(
                "relevance {r} is not an integer in 0..={MAX_RELEVANCE}"
            )));
        }
    }
    let mut queries: BTreeMap<u64, Vec<usize>> = BTreeMap::new();
    for (i, &q) in query_ids.iter().enumerate() {
        queries.entry(q).or_default().push(i);
    }
    let mut total = 0.0;
    let mut counted = 0u64;
    for docs in queries.values() {
        let mut by_score = docs.clone();
        by_score.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).unwrap().then(a.cmp(&b)));
        let ranked: Vec<f64> = by_score.iter().map(|&i| relevances[i]).collect();
        let mut ideal: Vec<f64> = ranked.clone();
        ideal.sort_by(|a, b| b.partial_cmp(a).unwrap());
        let ideal_dcg = dcg(&ideal, truncation);
        if ideal_dcg > 0.0 {
            total += dcg(&ranked, truncation) / ideal_dcg;
            counted += 1;
        }
    }
    if counted == 0 {
        return Err(Error::UndefinedMetric("every query has all-zero relevance".into()));
    }
    Ok(total / counted as f64)
}

/// Evaluates predictions against labels; NDCG additionally needs query ids
/// and integer relevance labels.
pub fn evaluate(
    predictions: &[f64],
    labels: &[f64],
    metric: MetricKind,
    query_ids: Option<&[u64]>,
) -> Result<EvalResult> {
    let (value, count) = match metric {
        MetricKind::Mse => (mse(predictions, labels)?, predictions.len() as u64),
        MetricKind::Auc => (auc(predictions, labels)?, predictions.len() as u64),
        MetricKind::Ndcg { truncation } => {
            let qids = query_ids
                .ok_or_else(|| Error::invalid("NDCG requires query ids"))?;
            let value = ndcg(predictions, labels, qids, truncation)?;
            let mut distinct: Vec<u64> = qids.to_vec();
            distinct.sort_unstable();
            distinct.dedup();
            (value, distinct.len() as u64)
        }
    };
    Ok(EvalResult { metric: metric.name(), value, count })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn mse_zero_for_exact_predictions() {
        assert_eq!(mse(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
    }

    #[test]
    fn auc_half_for_one_concordant_one_discordant() {
        let value = auc(&[0.9, 0.8, 0.3], &[1.0, 0.0, 1.0]).unwrap();
        assert_eq!(value, 0.5);
    }

    #[test]
    fn auc_ties_count_half() {
        let value = auc(&[0.5, 0.5], &[1.0, 0.0]).unwrap();
        assert_eq!(value, 0.5);
    }

    #[test]
    fn auc_single_class_undefined() {
        assert!(matches!(
            auc(&[0.1, 0.2], &[1.0, 1.0]),
            Err(Error::UndefinedMetric(_))
        ));
    }

    #[test]
    fn ndcg_perfect_ranking_is_one() {
        let value = ndcg(&[0.9, 0.1], &[2.0, 0.0], &[1, 1], 2).unwrap();
        assert_eq!(value, 1.0);
    }

    #[test]
    fn ndcg_requires_nonzero_relevance_somewhere() {
        assert!(matches!(
            ndcg(&[0.9, 0.1], &[0.0, 0.0], &[1, 1], 10),
            Err(Error::UndefinedMetric(_))
        ));
    }

    #[test]
    fn ndcg_matches_hand_computation() {
        // One query, reversed ranking of relevances [0, 2].
        let value = ndcg(&[0.9, 0.1], &[0.0, 2.0], &[7, 7], 10).unwrap();
        let got_dcg = 0.0 + 3.0 / 3f64.log2();
        let ideal = 3.0 / 2f64.log2();
        assert!((value - got_dcg / ideal).abs() < 1e-15);
    }

    // O(n^2) pairwise oracle with half-credit ties.
    fn auc_pairwise(scores: &[f64], labels: &[f64]) -> f64 {
        let mut num = 0.0;
        let mut den = 0.0;
        for i in 0..scores.len() {
            for j in 0..scores.len() {
                if labels[i] == 1.0 && labels[j] == 0.0 {
                    den += 1.0;
                    if scores[i] > scores[j] {
                        num += 1.0;
                    } else if scores[i] == scores[j] {
                        num += 0.5;
                    }
                }
            }
        }
        num / den
    }

    proptest! {
        #[test]
        fn auc_matches_pairwise_oracle(
            scores in proptest::collection::vec(0u8..12, 2..120),
            labels_seed in any::<u64>(),
        ) {
            use rand::prelude::*;
            let scores: Vec<f64> = scores.into_iter().map(|s| s as f64 / 4.0).collect();
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(labels_seed);
            let labels: Vec<f64> =
                (0..scores.len()).map(|_| if rng.random_bool(0.5) { 1.0 } else { 0.0 }).collect();
            prop_assume!(labels.iter().any(|&l| l == 1.0) && labels.iter().any(|&l| l == 0.0));
            let fast = auc(&scores, &labels).unwrap();
            let slow = auc_pairwise(&scores, &labels);
            prop_assert!((fast - slow).abs() < 1e-12);
        }

        #[test]
        fn ndcg_in_unit_interval(
            rels in proptest::collection::vec(0u8..5, 2..60),
            seed in any::<u64>(),
        ) {
            use rand::prelude::*;
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let rels: Vec<f64> = rels.into_iter().map(f64::from).collect();
            prop_assume!(rels.iter().any(|&r| r > 0.0));
            let scores: Vec<f64> = (0..rels.len()).map(|_| rng.random_range(0.0..1.0)).collect();
            let qids: Vec<u64> = (0..rels.len()).map(|i| (i % 3) as u64).collect();
            let value = ndcg(&scores, &rels, &qids, 10).unwrap();
            prop_assert!((0.0..=1.0 + 1e-12).contains(&value));
        }
    }
}

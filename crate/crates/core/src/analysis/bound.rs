//! Selection-probability lower bound: the binomial tail of majority voting.
//!
//! With M workers each locally nominating the best attribute with
//! probability p, the best attribute survives global voting whenever at
//! least `floor(M / beta) + 1` workers nominate it, so the selection
//! probability is bounded below by the binomial upper tail from that
//! threshold. The per-worker failure masses the theory provides are not
//! computable from data (they carry proof-level constants), so the
//! calculator takes either p directly or the failure masses as opaque
//! numbers.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Per-worker success probability, given directly or as failure masses.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SuccessProb {
    /// Probability that one worker's local top-k contains the best attribute.
    PerWorker(f64),
    /// Failure masses of the k+1-th through d-th ranked attributes;
    /// p = 1 - sum(deltas).
    FailureMasses { k: usize, d: usize, deltas: Vec<f64> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TheoremParams {
    pub machines: usize,
    /// Global voting multiplier; the majority threshold is floor(M/beta) + 1.
    pub beta: f64,
    pub success: SuccessProb,
}

impl TheoremParams {
    pub fn with_probability(machines: usize, p: f64) -> Self {
        TheoremParams { machines, beta: 2.0, success: SuccessProb::PerWorker(p) }
    }

    pub fn success_probability(&self) -> Result<f64> {
        let p = match &self.success {
            SuccessProb::PerWorker(p) => *p,
            SuccessProb::FailureMasses { k, d, deltas } => {
                if *k >= *d {
                    return Err(Error::invalid("failure masses require k < d"));
                }
                if deltas.len() != d - k {
                    return Err(Error::invalid(format!(
                        "expected {} failure masses for ranks {}..={}, got {}",
                        d - k,
                        k + 1,
                        d,
                        deltas.len()
                    )));
                }
                if deltas.iter().any(|&x| !(x >= 0.0)) {
                    return Err(Error::invalid("failure masses must be nonnegative"));
                }
                1.0 - deltas.iter().sum::<f64>()
            }
        };
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::invalid(format!("success probability {p} is outside [0, 1]")));
        }
        Ok(p)
    }

    pub fn majority_threshold(&self) -> Result<usize> {
        if self.machines < 1 {
            return Err(Error::invalid("at least one machine required"));
        }
        if !(self.beta > 1.0) {
            return Err(Error::invalid("beta must exceed 1"));
        }
        Ok((self.machines as f64 / self.beta).floor() as usize + 1)
    }
}

/// Lower bound on the probability that voting selects the best attribute.
pub fn theorem1_bound(params: &TheoremParams) -> Result<f64> {
    let p = params.success_probability()?;
    let threshold = params.majority_threshold()?;
    Ok(binomial_upper_tail(params.machines, threshold, p))
}

/// P(X >= threshold) for X ~ Binomial(m, p). Exact summation for small m,
/// log-space otherwise.
pub fn binomial_upper_tail(m: usize, threshold: usize, p: f64) -> f64 {
    if m <= 30 {
        binomial_tail_exact(m, threshold, p)
    } else {
        binomial_tail_log(m, threshold, p)
    }
}

/// Direct summation with exactly representable binomial coefficients.
/// Intended for m <= 30 (coefficients stay far below 2^53).
pub fn binomial_tail_exact(m: usize, threshold: usize, p: f64) -> f64 {
    if threshold > m {
        return 0.0;
    }
    if p == 0.0 {
        return if threshold == 0 { 1.0 } else { 0.0 };
    }
    if p == 1.0 {
        return 1.0;
    }
    let q = 1.0 - p;
    // Pascal row m: integer-exact additions.
    let mut row = vec![1.0f64];
    for _ in 0..m {
        let mut next = vec![1.0; row.len() + 1];
        for i in 1..row.len() {
            next[i] = row[i - 1] + row[i];
        }
        row = next;
    }
    let mut tail = 0.0;
    for k in threshold..=m {
        tail += row[k] * p.powi(k as i32) * q.powi((m - k) as i32);
    }
    tail.min(1.0)
}

/// Log-space summation, numerically stable up to very large m.
pub fn binomial_tail_log(m: usize, threshold: usize, p: f64) -> f64 {
    if threshold > m {
        return 0.0;
    }
    if p == 0.0 {
        return if threshold == 0 { 1.0 } else { 0.0 };
    }
    if p == 1.0 {
        return 1.0;
    }
    let lf = ln_factorials(m);
    let ln_p = p.ln();
    let ln_q = (-p).ln_1p();
    let ln_terms: Vec<f64> = (threshold..=m)
        .map(|k| {
            lf[m] - lf[k] - lf[m - k] + k as f64 * ln_p + (m - k) as f64 * ln_q
        })
        .collect();
    let max = ln_terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return 0.0;
    }
    let sum: f64 = ln_terms.iter().map(|&t| (t - max).exp()).sum();
    (max + sum.ln()).exp().min(1.0)
}

// Cumulative ln(k!) via compensated summation; the table value error stays
// near one ulp of ln(m!) even for m in the tens of thousands.
fn ln_factorials(m: usize) -> Vec<f64> {
    let mut table = Vec::with_capacity(m + 1);
    table.push(0.0);
    let mut sum = 0.0;
    let mut comp = 0.0;
    for k in 1..=m {
        let x = (k as f64).ln();
        let t = sum + x;
        comp += if sum.abs() >= x.abs() { (sum - t) + x } else { (x - t) + sum };
        sum = t;
        table.push(sum + comp);
    }
    table
}

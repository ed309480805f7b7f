//! Monte-Carlo experiments: voting reliability, the machine-count tradeoff,
//! and the quantized-histogram selection bias.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::analysis::bound::{theorem1_bound, TheoremParams};
use crate::cluster::SimulatedCluster;
use crate::dataset::{bin_dataset, compute_bin_mapper, RawDataset, Task};
use crate::error::{Error, Result};
use crate::gain::GainKind;
use crate::strategies::{
    data_parallel_full_find_best_split, data_parallel_quantized_find_best_split,
    pv_tree_find_best_split, quantize_boundaries, PVTreeConfig, QuantizeConfig,
};
use crate::synth::StepGenerator;

/// 95% Wilson score interval for a binomial frequency.
pub fn wilson_interval(successes: u64, trials: u64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let z = 1.959963984540054_f64; // 97.5% normal quantile
    let n = trials as f64;
    let phat = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (phat + z2 / (2.0 * n)) / denom;
    let half = (z / denom) * (phat * (1.0 - phat) / n + z2 / (4.0 * n * n)).sqrt();
    ((center - half).max(0.0), (center + half).min(1.0))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VoteProbConfig {
    /// Training samples per worker (n in the bound).
    pub per_worker_n: usize,
    pub machines: usize,
    pub k: usize,
    pub beta: f64,
    pub trials: usize,
    pub seed: u64,
    pub bins: usize,
}

impl VoteProbConfig {
    pub fn new(per_worker_n: usize, machines: usize, k: usize, trials: usize, seed: u64) -> Self {
        VoteProbConfig { per_worker_n, machines, k, beta: 2.0, trials, seed, bins: 64 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VoteProbResult {
    pub trials: u64,
    pub successes: u64,
    /// Empirical probability that a root split selects the best attribute.
    pub frequency: f64,
    pub ci: (f64, f64),
    /// Per-worker local top-k hit rate (the plug-in p for the bound).
    pub worker_hit_rate: f64,
    pub worker_hits: u64,
    pub worker_trials: u64,
    /// Theorem lower bound evaluated at the plug-in hit rate.
    pub bound_at_hit_rate: f64,
}

/// Repeatedly draws fresh data, runs one voting split at the root, and
/// records how often the population-best attribute is selected. Also records
/// the per-worker local top-k hit rate that feeds the bound calculator.
pub fn voting_probability_experiment(
    generator: &StepGenerator,
    config: &VoteProbConfig,
) -> Result<VoteProbResult> {
    if config.trials < 100 {
        return Err(Error::invalid("at least 100 trials required"));
    }
    if config.per_worker_n < 1 || config.machines < 1 {
        return Err(Error::invalid("per-worker sample count and machines must be positive"));
    }
    let best = generator.best_attribute()?;
    let pv = PVTreeConfig { k: config.k, beta: config.beta };
    pv.validate()?;

    let total_n = config.per_worker_n * config.machines;
    let mut successes = 0u64;
    let mut worker_hits = 0u64;
    let mut worker_trials = 0u64;
    for trial in 0..config.trials {
        let data = generator.sample_seeded(total_n, config.seed, trial as u64 + 1);
        let mapper = compute_bin_mapper(&data, config.bins)?;
        let binned = bin_dataset(&data, &mapper)?;
        let mut cluster = SimulatedCluster::partition(
            &binned,
            config.machines,
            config.seed.wrapping_add(trial as u64),
        )?;
        let all: Vec<usize> = (0..total_n).collect();
        let outcome = pv_tree_find_best_split(
            &binned,
            &mut cluster,
            &all,
            &pv,
            GainKind::VarianceGain,
            1,
        )?;
        if outcome.best.as_ref().is_some_and(|c| c.attribute == best) {
            successes += 1;
        }
        for top in &outcome.local_tops {
            worker_trials += 1;
            if top.iter().any(|c| c.attribute == best) {
                worker_hits += 1;
            }
        }
    }
    let trials = config.trials as u64;
    let worker_hit_rate =
        if worker_trials == 0 { 0.0 } else { worker_hits as f64 / worker_trials as f64 };
    let bound_at_hit_rate = theorem1_bound(&TheoremParams {
        machines: config.machines,
        beta: config.beta,
        success: crate::analysis::bound::SuccessProb::PerWorker(worker_hit_rate),
    })?;
    Ok(VoteProbResult {
        trials,
        successes,
        frequency: successes as f64 / trials as f64,
        ci: wilson_interval(successes, trials),
        worker_hit_rate,
        worker_hits,
        worker_trials,
        bound_at_hit_rate,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MachinesSweepRow {
    pub machines: usize,
    pub per_worker_n: usize,
    pub result: VoteProbResult,
}

/// Fixes the total sample budget and sweeps the worker count; per-worker
/// data shrinks as machines grow, exposing the dual effect of M.
pub fn machines_tradeoff_experiment(
    generator: &StepGenerator,
    total_n: usize,
    machines: &[usize],
    k: usize,
    trials: usize,
    seed: u64,
) -> Result<Vec<MachinesSweepRow>> {
    machines
        .iter()
        .map(|&m| {
            if m == 0 || m > total_n {
                return Err(Error::invalid(format!("cannot run {m} machines on {total_n} samples")));
            }
            let per_worker_n = total_n / m;
            let config = VoteProbConfig {
                per_worker_n,
                machines: m,
                k,
                beta: 2.0,
                trials,
                seed: seed.wrapping_add(m as u64),
                bins: 64,
            };
            Ok(MachinesSweepRow {
                machines: m,
                per_worker_n,
                result: voting_probability_experiment(generator, &config)?,
            })
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Quantization bias
// ---------------------------------------------------------------------------

/// Two-attribute regression population built so that coarse-histogram split
/// search prefers the wrong attribute no matter how much data arrives.
///
/// Attribute 0 steps at a value strictly inside a coarse group, so
/// quantization clips its measurable gain; attribute 1 steps exactly at a
/// coarse group boundary and keeps its full gain. Heights are chosen so the
/// fine-grained ordering (0 first) inverts under quantization.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuantBiasInstance {
    /// Integer attribute values are uniform on 0..fine_values.
    pub fine_values: usize,
    /// Label jumps by strong_height where attribute 0 >= strong_step.
    pub strong_step: usize,
    pub strong_height: f64,
    /// Label jumps by weak_height where attribute 1 >= weak_step.
    pub weak_step: usize,
    pub weak_height: f64,
    pub noise_sigma: f64,
}

impl Default for QuantBiasInstance {
    fn default() -> Self {
        QuantBiasInstance {
            fine_values: 16,
            strong_step: 6,
            strong_height: 1.0,
            weak_step: 8,
            weak_height: 0.85,
            noise_sigma: 0.25,
        }
    }
}

/// Population variance gains of the instance, fine-grained and restricted to
/// the coarse group boundaries.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuantBiasGains {
    pub fine_strong: f64,
    pub fine_weak: f64,
    pub coarse_strong: f64,
    pub coarse_weak: f64,
}

impl QuantBiasInstance {
    /// Population variance gain of a step attribute (height h, step s) split
    /// at threshold t (left side holds values 0..=t), under the uniform
    /// distribution on 0..f.
    fn step_vg(&self, h: f64, s: usize, t: usize) -> f64 {
        let f = self.fine_values as f64;
        let (s, t) = (s as f64, t as f64 + 1.0); // t counts left values
        let p_left = t / f;
        let p_right = 1.0 - p_left;
        if p_right == 0.0 {
            return 0.0;
        }
        let high_left = (t - s).max(0.0) / t;
        let high_right = (f - s.max(t)) / (f - t);
        let delta = h * (high_right - high_left);
        p_left * p_right * delta * delta
    }

    fn best_vg_over(&self, h: f64, s: usize, thresholds: &[usize]) -> f64 {
        thresholds
            .iter()
            .map(|&t| self.step_vg(h, s, t))
            .fold(0.0, f64::max)
    }

    /// Checks the construction for quantization to `b` bins and returns the
    /// population gains. The required ordering is
    /// fine_strong > fine_weak > coarse_strong, with the weak attribute's
    /// gain unharmed by quantization.
    pub fn validate(&self, b: usize) -> Result<QuantBiasGains> {
        if self.fine_values < 4
            || self.strong_step == 0
            || self.strong_step >= self.fine_values
            || self.weak_step == 0
            || self.weak_step >= self.fine_values
        {
            return Err(Error::Construction("step positions must be interior".into()));
        }
        let all: Vec<usize> = (0..self.fine_values - 1).collect();
        // Ideal coarse boundaries under the uniform distribution.
        let uniform = vec![1u64; self.fine_values];
        let coarse: Vec<usize> = quantize_boundaries(&uniform, b);
        let coarse_thresholds: Vec<usize> = coarse[..coarse.len() - 1].to_vec();

        let gains = QuantBiasGains {
            fine_strong: self.best_vg_over(self.strong_height, self.strong_step, &all),
            fine_weak: self.best_vg_over(self.weak_height, self.weak_step, &all),
            coarse_strong: self.best_vg_over(
                self.strong_height,
                self.strong_step,
                &coarse_thresholds,
            ),
            coarse_weak: self.best_vg_over(self.weak_height, self.weak_step, &coarse_thresholds),
        };
        if !(gains.fine_strong > gains.fine_weak) {
            return Err(Error::Construction(format!(
                "strong attribute must dominate at fine resolution: {gains:?}"
            )));
        }
        if !(gains.fine_weak > gains.coarse_strong) {
            return Err(Error::Construction(format!(
                "quantization must clip the strong attribute below the weak one: {gains:?}"
            )));
        }
        if (gains.coarse_weak - gains.fine_weak).abs() > 1e-12 {
            return Err(Error::Construction(format!(
                "weak attribute's step must align with a coarse boundary: {gains:?}"
            )));
        }
        Ok(gains)
    }

    pub fn sample(&self, n: usize, rng: &mut impl Rng) -> RawDataset {
        let f = self.fine_values;
        let normal = Normal::new(0.0, 1.0).expect("valid normal");
        let mut values = vec![0.0; 2 * n];
        for v in values.iter_mut() {
            *v = rng.random_range(0..f) as f64;
        }
        let mut labels = vec![0.0; n];
        for (i, label) in labels.iter_mut().enumerate() {
            let mut y = 0.0;
            if values[i] >= self.strong_step as f64 {
                y += self.strong_height;
            }
            if values[n + i] >= self.weak_step as f64 {
                y += self.weak_height;
            }
            if self.noise_sigma > 0.0 {
                y += self.noise_sigma * normal.sample(rng);
            }
            *label = y;
        }
        RawDataset::new(n, 2, values, labels, Task::Regression).expect("valid by construction")
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuantBiasRow {
    pub n: usize,
    pub trials: u64,
    /// Frequency of the quantized strategy selecting the wrong attribute.
    pub quantized_misselection: f64,
    pub quantized_ci: (f64, f64),
    /// Same frequency for the full-histogram control.
    pub control_misselection: f64,
    pub control_ci: (f64, f64),
}

/// For each n, measures how often the quantized strategy picks the wrong
/// root attribute, with the full-histogram strategy as the control. The
/// quantized curve stays bounded away from zero as n grows; the control's
/// vanishes.
pub fn quantization_bias_experiment(
    instance: &QuantBiasInstance,
    b: usize,
    ns: &[usize],
    trials: usize,
    seed: u64,
) -> Result<Vec<QuantBiasRow>> {
    if trials < 1 {
        return Err(Error::invalid("at least one trial required"));
    }
    instance.validate(b)?;
    let qconfig = QuantizeConfig { b };
    let machines = 2;
    let mut rows = Vec::with_capacity(ns.len());
    for (ni, &n) in ns.iter().enumerate() {
        if n < machines {
            return Err(Error::invalid("n must cover the cluster"));
        }
        let mut wrong_quant = 0u64;
        let mut wrong_ctrl = 0u64;
        for trial in 0..trials {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(ni as u64));
            rng.set_stream(trial as u64 + 1);
            let data = instance.sample(n, &mut rng);
            let mapper = compute_bin_mapper(&data, 255)?;
            let binned = bin_dataset(&data, &mapper)?;
            let all: Vec<usize> = (0..n).collect();

            let mut cluster =
                SimulatedCluster::partition(&binned, machines, seed.wrapping_add(trial as u64))?;
            let quant = data_parallel_quantized_find_best_split(
                &binned,
                &mut cluster,
                &all,
                &qconfig,
                GainKind::VarianceGain,
                1,
            )?;
            if quant.map_or(true, |c| c.attribute != 0) {
                wrong_quant += 1;
            }

            let mut cluster =
                SimulatedCluster::partition(&binned, machines, seed.wrapping_add(trial as u64))?;
            let ctrl = data_parallel_full_find_best_split(
                &binned,
                &mut cluster,
                &all,
                GainKind::VarianceGain,
                1,
            )?;
            if ctrl.map_or(true, |c| c.attribute != 0) {
                wrong_ctrl += 1;
            }
        }
        let t = trials as u64;
        rows.push(QuantBiasRow {
            n,
            trials: t,
            quantized_misselection: wrong_quant as f64 / t as f64,
            quantized_ci: wilson_interval(wrong_quant, t),
            control_misselection: wrong_ctrl as f64 / t as f64,
            control_ci: wilson_interval(wrong_ctrl, t),
        });
    }
    Ok(rows)
}

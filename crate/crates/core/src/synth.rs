//! Synthetic regression data with a known most-informative attribute.
//!
//! Attributes are iid uniform on [0, 1); the label is a sum of per-attribute
//! step functions at 0.5 plus Gaussian noise. Independence makes the
//! population variance gain of attribute `j` exactly `strengths[j]^2 / 4`
//! (best threshold at the step), so the population ranking and the gaps that
//! drive voting reliability are known by construction.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::dataset::{RawDataset, Task};
use crate::error::{Error, Result};

/// Per-attribute population gains sorted descending, with the voting gaps
/// `l_(j)(k) = (gain_(1) - gain_(j)) / 2`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GapProfile {
    /// Population gains, largest first.
    pub sorted_gains: Vec<f64>,
}

impl GapProfile {
    pub fn new(mut gains: Vec<f64>) -> Result<Self> {
        if gains.iter().any(|g| !g.is_finite() || *g < 0.0) {
            return Err(Error::invalid("population gains must be finite and nonnegative"));
        }
        gains.sort_by(|a, b| b.partial_cmp(a).unwrap());
        Ok(GapProfile { sorted_gains: gains })
    }

    /// Gap of the j-th ranked attribute (1-based, j >= k + 1) to the best.
    pub fn gap(&self, j: usize) -> f64 {
        (self.sorted_gains[0] - self.sorted_gains[j - 1]).abs() / 2.0
    }

    pub fn gaps_beyond(&self, k: usize) -> Vec<f64> {
        (k + 1..=self.sorted_gains.len()).map(|j| self.gap(j)).collect()
    }
}

/// Step-function label generator with controllable per-attribute signal.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepGenerator {
    /// Step height of each attribute's contribution to the label.
    pub strengths: Vec<f64>,
    pub noise_sigma: f64,
}

impl StepGenerator {
    pub fn new(strengths: Vec<f64>, noise_sigma: f64) -> Result<Self> {
        if strengths.is_empty() {
            return Err(Error::invalid("generator needs at least one attribute"));
        }
        if strengths.iter().any(|s| !s.is_finite() || *s < 0.0) {
            return Err(Error::invalid("strengths must be finite and nonnegative"));
        }
        if !noise_sigma.is_finite() || noise_sigma < 0.0 {
            return Err(Error::invalid("noise sigma must be finite and nonnegative"));
        }
        Ok(StepGenerator { strengths, noise_sigma })
    }

    /// One strong attribute (index 0) against `d - 1` weaker ones.
    pub fn with_background(d: usize, signal: f64, background: f64, noise_sigma: f64) -> Result<Self> {
        if d == 0 {
            return Err(Error::invalid("generator needs at least one attribute"));
        }
        let mut strengths = vec![background; d];
        strengths[0] = signal;
        Self::new(strengths, noise_sigma)
    }

    pub fn n_attributes(&self) -> usize {
        self.strengths.len()
    }

    /// Population variance gain of each attribute at its best threshold.
    pub fn population_gains(&self) -> Vec<f64> {
        self.strengths.iter().map(|s| s * s / 4.0).collect()
    }

    pub fn gap_profile(&self) -> GapProfile {
        GapProfile::new(self.population_gains()).expect("gains are valid by construction")
    }

    /// The attribute with the strictly largest population gain; an error if
    /// the maximum is not unique (no well-defined best to select).
    pub fn best_attribute(&self) -> Result<usize> {
        let gains = self.population_gains();
        let best = gains
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .map(|(i, _)| i)
            .expect("nonempty");
        if gains.iter().enumerate().any(|(i, &g)| i != best && g == gains[best]) {
            return Err(Error::invalid("generator has no unique best attribute"));
        }
        Ok(best)
    }

    pub fn sample(&self, n: usize, rng: &mut impl Rng) -> RawDataset {
        let d = self.n_attributes();
        let normal = Normal::new(0.0, 1.0).expect("valid normal");
        let mut values = vec![0.0; n * d];
        for a in 0..d {
            for i in 0..n {
                values[a * n + i] = rng.random_range(0.0..1.0);
            }
        }
        let mut labels = vec![0.0; n];
        for (i, label) in labels.iter_mut().enumerate() {
            let mut y = 0.0;
            for a in 0..d {
                if values[a * n + i] >= 0.5 {
                    y += self.strengths[a];
                }
            }
            if self.noise_sigma > 0.0 {
                y += self.noise_sigma * normal.sample(rng);
            }
            *label = y;
        }
        RawDataset::new(n, d, values, labels, Task::Regression).expect("generator output is valid")
    }

    /// Deterministic sampling: one independent substream per (seed, stream).
    pub fn sample_seeded(&self, n: usize, seed: u64, stream: u64) -> RawDataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        self.sample(n, &mut rng)
    }
}

/// Specification of a synthetic dataset, as it appears in config files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    pub n_samples: usize,
    pub n_attributes: usize,
    /// Step height of attribute 0.
    pub signal: f64,
    /// Step height of every other attribute.
    pub background: f64,
    pub noise_sigma: f64,
    pub seed: u64,
}

/// Sidecar describing the generated population, for experiments.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSidecar {
    pub population_gains: Vec<f64>,
    pub best_attribute: usize,
    pub gap_profile: GapProfile,
}

/// Draws a dataset from the step-generator family described by `spec`.
pub fn generate_synthetic(spec: &GeneratorSpec) -> Result<(RawDataset, GeneratorSidecar)> {
    if spec.n_samples == 0 {
        return Err(Error::invalid("generator spec needs at least one sample"));
    }
    let gen = StepGenerator::with_background(
        spec.n_attributes,
        spec.signal,
        spec.background,
        spec.noise_sigma,
    )?;
    let best = gen.best_attribute()?;
    let data = gen.sample_seeded(spec.n_samples, spec.seed, 0);
    let sidecar = GeneratorSidecar {
        population_gains: gen.population_gains(),
        best_attribute: best,
        gap_profile: gen.gap_profile(),
    };
    Ok((data, sidecar))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{bin_dataset, compute_bin_mapper};
    use crate::gain::{find_best_split, GainKind, NodeStats};
    use crate::histogram::construct_histograms;
    use crate::trainer::{build_tree, SequentialFinder, TreeConfig};

    #[test]
    fn same_seed_identical_dataset() {
        let spec = GeneratorSpec {
            n_samples: 100,
            n_attributes: 4,
            signal: 1.0,
            background: 0.3,
            noise_sigma: 0.5,
            seed: 42,
        };
        let (a, _) = generate_synthetic(&spec).unwrap();
        let (b, _) = generate_synthetic(&spec).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn noiseless_signal_is_separable_by_a_stump() {
        let gen = StepGenerator::with_background(3, 1.0, 0.0, 0.0).unwrap();
        let data = gen.sample_seeded(256, 7, 0);
        let mapper = compute_bin_mapper(&data, 64).unwrap();
        let binned = bin_dataset(&data, &mapper).unwrap();
        let mut finder = SequentialFinder::new(&binned, GainKind::VarianceGain, 1);
        let cfg = TreeConfig { max_depth: 2, ..TreeConfig::new(GainKind::VarianceGain) };
        let model = build_tree(&binned, &cfg, &mut finder).unwrap();
        let preds = model.predict(&binned).unwrap();
        let err: f64 = preds
            .iter()
            .zip(binned.labels())
            .map(|(p, y)| (p - y) * (p - y))
            .sum::<f64>();
        assert_eq!(err, 0.0);
    }

    #[test]
    fn plugin_gain_ranks_signal_attribute_first() {
        let gen = StepGenerator::with_background(6, 1.0, 0.25, 0.5).unwrap();
        let data = gen.sample_seeded(10_000, 3, 0);
        let mapper = compute_bin_mapper(&data, 64).unwrap();
        let binned = bin_dataset(&data, &mapper).unwrap();
        let all: Vec<usize> = (0..10_000).collect();
        let hists = construct_histograms(&binned, &all);
        let node = NodeStats::from_histogram(&hists[0], 10_000);
        let best = find_best_split(&hists, &node, GainKind::VarianceGain, 1).unwrap().unwrap();
        assert_eq!(best.attribute, 0);
        // Plug-in gain approaches the population value strengths^2 / 4.
        assert!((best.gain - 0.25).abs() < 0.05, "gain {}", best.gain);
    }

    #[test]
    fn gap_profile_sorted_with_halved_gaps() {
        let gen = StepGenerator::new(vec![1.0, 0.6, 0.8], 0.1).unwrap();
        let profile = gen.gap_profile();
        assert_eq!(profile.sorted_gains, vec![0.25, 0.16, 0.09]);
        assert_eq!(profile.gap(2), (0.25 - 0.16) / 2.0);
        assert_eq!(profile.gaps_beyond(1), vec![(0.25 - 0.16) / 2.0, (0.25 - 0.09) / 2.0]);
    }

    #[test]
    fn degenerate_generator_has_no_best() {
        let gen = StepGenerator::new(vec![0.5, 0.5], 0.1).unwrap();
        assert!(gen.best_attribute().is_err());
    }
}

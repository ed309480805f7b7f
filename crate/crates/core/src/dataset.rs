//! Dataset representation and global quantile binning.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_BIN_COUNT: usize = 255;

/// Learning task; classification carries the number of classes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Regression,
    Classification { classes: usize },
}

impl Task {
    pub fn classes(&self) -> Option<usize> {
        match self {
            Task::Regression => None,
            Task::Classification { classes } => Some(*classes),
        }
    }
}

/// Dense dataset with real-valued attributes, stored attribute-major.
#[derive(Clone, Debug, PartialEq)]
pub struct RawDataset {
    n_samples: usize,
    n_attributes: usize,
    /// values[a * n_samples + i] is attribute `a` of sample `i`.
    values: Vec<f64>,
    labels: Vec<f64>,
    task: Task,
}

impl RawDataset {
    /// Builds a dataset from attribute-major values.
    pub fn new(
        n_samples: usize,
        n_attributes: usize,
        values: Vec<f64>,
        labels: Vec<f64>,
        task: Task,
    ) -> Result<Self> {
        if n_samples == 0 {
            return Err(Error::invalid("dataset must contain at least one sample"));
        }
        if n_attributes == 0 {
            return Err(Error::invalid("dataset must contain at least one attribute"));
        }
        if values.len() != n_samples * n_attributes {
            return Err(Error::Shape(format!(
                "expected {} values for {} samples x {} attributes, got {}",
                n_samples * n_attributes,
                n_samples,
                n_attributes,
                values.len()
            )));
        }
        if labels.len() != n_samples {
            return Err(Error::Shape(format!(
                "expected {} labels, got {}",
                n_samples,
                labels.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("attribute values must be finite (missing values are not supported)"));
        }
        validate_labels(&labels, task)?;
        Ok(Self { n_samples, n_attributes, values, labels, task })
    }

    /// Builds a dataset from sample-major rows.
    pub fn from_rows(rows: &[Vec<f64>], labels: Vec<f64>, task: Task) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(Error::invalid("dataset must contain at least one sample"));
        }
        let d = rows[0].len();
        if rows.iter().any(|r| r.len() != d) {
            return Err(Error::Shape("ragged rows".into()));
        }
        let mut values = vec![0.0; n * d];
        for (i, row) in rows.iter().enumerate() {
            for (a, &v) in row.iter().enumerate() {
                values[a * n + i] = v;
            }
        }
        Self::new(n, d, values, labels, task)
    }

    pub fn n_samples(&self) -> usize {
        self.n_samples
    }

    pub fn n_attributes(&self) -> usize {
        self.n_attributes
    }

    pub fn task(&self) -> Task {
        self.task
    }

    pub fn labels(&self) -> &[f64] {
        &self.labels
    }

    pub fn value(&self, sample: usize, attribute: usize) -> f64 {
        self.values[attribute * self.n_samples + sample]
    }

    pub fn attribute_values(&self, attribute: usize) -> &[f64] {
        &self.values[attribute * self.n_samples..(attribute + 1) * self.n_samples]
    }
}

fn validate_labels(labels: &[f64], task: Task) -> Result<()> {
    match task {
        Task::Regression => {
            if labels.iter().any(|l| !l.is_finite()) {
                return Err(Error::invalid("regression labels must be finite"));
            }
        }
        Task::Classification { classes } => {
            if classes < 2 {
                return Err(Error::invalid("classification requires at least 2 classes"));
            }
            for &l in labels {
                if l.fract() != 0.0 || l < 0.0 || l >= classes as f64 {
                    return Err(Error::invalid(format!(
                        "classification label {l} is not a class id in 0..{classes}"
                    )));
                }
            }
        }
    }
    Ok(())
}

/// Per-attribute bin boundaries shared by every worker.
///
/// Bin `i` of an attribute covers `(boundary[i-1], boundary[i]]`; the first
/// bin is open below and the last bin open above, so the mapping is total.
/// An attribute with `B` bins stores `B - 1` strictly increasing boundaries.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BinMapper {
    boundaries: Vec<Vec<f64>>,
}

impl BinMapper {
    pub fn n_attributes(&self) -> usize {
        self.boundaries.len()
    }

    pub fn bin_count(&self, attribute: usize) -> usize {
        self.boundaries[attribute].len() + 1
    }

    pub fn max_bin_count(&self) -> usize {
        (0..self.n_attributes()).map(|a| self.bin_count(a)).max().unwrap_or(1)
    }

    pub fn boundaries(&self, attribute: usize) -> &[f64] {
        &self.boundaries[attribute]
    }

    /// Maps a value to its bin; boundaries are inclusive upper edges.
    pub fn bin(&self, attribute: usize, value: f64) -> usize {
        self.boundaries[attribute].partition_point(|&b| b < value)
    }
}

/// Computes per-attribute approximate-quantile bin boundaries from the full
/// dataset. Attributes with at most `bin_count` distinct values get one bin
/// per distinct value; boundaries are midpoints between adjacent distinct
/// values, so binning is stable under small perturbations.
pub fn compute_bin_mapper(data: &RawDataset, bin_count: usize) -> Result<BinMapper> {
    if bin_count < 2 {
        return Err(Error::invalid("bin_count must be at least 2"));
    }
    let n = data.n_samples();
    let boundaries = (0..data.n_attributes())
        .map(|a| {
            let mut sorted = data.attribute_values(a).to_vec();
            sorted.sort_by(|x, y| x.partial_cmp(y).unwrap());
            let mut distinct = 0;
            for i in 0..n {
                if i == 0 || sorted[i] > sorted[i - 1] {
                    distinct += 1;
                }
            }
            let mut bounds = Vec::new();
            if distinct <= bin_count {
                for i in 1..n {
                    if sorted[i] > sorted[i - 1] {
                        bounds.push(midpoint(sorted[i - 1], sorted[i]));
                    }
                }
            } else {
                // Equal-frequency targets; skip ranks that fall inside a run
                // of equal values to keep boundaries strictly increasing.
                for b in 1..bin_count {
                    let rank = b * n / bin_count;
                    if rank == 0 || rank >= n || sorted[rank] <= sorted[rank - 1] {
                        continue;
                    }
                    let cand = midpoint(sorted[rank - 1], sorted[rank]);
                    if bounds.last().map_or(true, |&prev| cand > prev) {
                        bounds.push(cand);
                    }
                }
            }
            bounds
        })
        .collect();
    Ok(BinMapper { boundaries })
}

fn midpoint(lo: f64, hi: f64) -> f64 {
    let m = lo + (hi - lo) / 2.0;
    // Guard against rounding out of the open interval for adjacent floats.
    if m > lo && m <= hi {
        m
    } else {
        lo
    }
}

/// Dataset with attribute values replaced by bin indices.
///
/// The bin matrix and mapper are shared; `with_labels` re-labels cheaply,
/// which is how boosting feeds per-iteration gradients to the tree grower.
#[derive(Clone, Debug)]
pub struct BinnedDataset {
    n_samples: usize,
    n_attributes: usize,
    /// bins[a * n_samples + i] is the bin of attribute `a` for sample `i`.
    bins: Arc<Vec<u16>>,
    labels: Vec<f64>,
    task: Task,
    mapper: Arc<BinMapper>,
}

/// Maps every value of `data` through `mapper`. Deterministic.
pub fn bin_dataset(data: &RawDataset, mapper: &BinMapper) -> Result<BinnedDataset> {
    if mapper.n_attributes() != data.n_attributes() {
        return Err(Error::Shape(format!(
            "mapper covers {} attributes, dataset has {}",
            mapper.n_attributes(),
            data.n_attributes()
        )));
    }
    let n = data.n_samples();
    let d = data.n_attributes();
    let mut bins = vec![0u16; n * d];
    for a in 0..d {
        let col = data.attribute_values(a);
        let out = &mut bins[a * n..(a + 1) * n];
        for (i, &v) in col.iter().enumerate() {
            out[i] = mapper.bin(a, v) as u16;
        }
    }
    Ok(BinnedDataset {
        n_samples: n,
        n_attributes: d,
        bins: Arc::new(bins),
        labels: data.labels().to_vec(),
        task: data.task(),
        mapper: Arc::new(mapper.clone()),
    })
}

impl BinnedDataset {
    pub fn n_samples(&self) -> usize {
        self.n_samples
    }

    pub fn n_attributes(&self) -> usize {
        self.n_attributes
    }

    pub fn task(&self) -> Task {
        self.task
    }

    pub fn labels(&self) -> &[f64] {
        &self.labels
    }

    pub fn mapper(&self) -> &BinMapper {
        &self.mapper
    }

    pub fn bin(&self, sample: usize, attribute: usize) -> usize {
        self.bins[attribute * self.n_samples + sample] as usize
    }

    pub fn attribute_bins(&self, attribute: usize) -> &[u16] {
        &self.bins[attribute * self.n_samples..(attribute + 1) * self.n_samples]
    }

    pub fn bin_count(&self, attribute: usize) -> usize {
        self.mapper.bin_count(attribute)
    }

    /// Same binned matrix with different labels (shares the bin storage).
    pub fn with_labels(&self, labels: Vec<f64>, task: Task) -> Result<BinnedDataset> {
        if labels.len() != self.n_samples {
            return Err(Error::Shape(format!(
                "expected {} labels, got {}",
                self.n_samples,
                labels.len()
            )));
        }
        validate_labels(&labels, task)?;
        Ok(BinnedDataset {
            n_samples: self.n_samples,
            n_attributes: self.n_attributes,
            bins: Arc::clone(&self.bins),
            labels,
            task,
            mapper: Arc::clone(&self.mapper),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn single_attr(values: &[f64]) -> RawDataset {
        RawDataset::new(
            values.len(),
            1,
            values.to_vec(),
            vec![0.0; values.len()],
            Task::Regression,
        )
        .unwrap()
    }

    #[test]
    fn two_distinct_values_two_bins() {
        let data = single_attr(&[0.0, 0.0, 1.0, 1.0]);
        let mapper = compute_bin_mapper(&data, 255).unwrap();
        assert_eq!(mapper.bin_count(0), 2);
        assert_eq!(mapper.bin(0, 0.0), 0);
        assert_eq!(mapper.bin(0, 1.0), 1);
    }

    #[test]
    fn constant_attribute_single_bin() {
        let data = single_attr(&[5.0, 5.0, 5.0]);
        let mapper = compute_bin_mapper(&data, 255).unwrap();
        assert_eq!(mapper.bin_count(0), 1);
        assert_eq!(mapper.bin(0, 5.0), 0);
        assert_eq!(mapper.bin(0, -100.0), 0);
    }

    #[test]
    fn uniform_values_near_equal_bins() {
        use rand::prelude::*;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let values: Vec<f64> = (0..1000).map(|_| rng.random_range(0.0..1.0)).collect();
        let data = single_attr(&values);
        let mapper = compute_bin_mapper(&data, 10).unwrap();
        assert_eq!(mapper.bin_count(0), 10);
        // Brute-force count per bin against the boundaries.
        let mut counts = vec![0usize; 10];
        for &v in &values {
            counts[mapper.bin(0, v)] += 1;
        }
        for (b, &c) in counts.iter().enumerate() {
            assert!((99..=101).contains(&c), "bin {b} holds {c} samples");
        }
    }

    #[test]
    fn boundary_goes_to_lower_bin() {
        let data = single_attr(&[0.0, 1.0, 2.0, 3.0]);
        let mapper = compute_bin_mapper(&data, 255).unwrap();
        let b = mapper.boundaries(0)[0];
        assert_eq!(mapper.bin(0, b), 0);
        assert_eq!(mapper.bin(0, f64::MIN), 0);
        assert_eq!(mapper.bin(0, f64::MAX), 3);
    }

    #[test]
    fn binning_is_deterministic() {
        let data = single_attr(&[3.0, 1.0, 2.0, 1.5, 9.0]);
        let mapper = compute_bin_mapper(&data, 4).unwrap();
        let a = bin_dataset(&data, &mapper).unwrap();
        let b = bin_dataset(&data, &mapper).unwrap();
        assert_eq!(a.attribute_bins(0), b.attribute_bins(0));
    }

    #[test]
    fn bin_count_below_two_rejected() {
        let data = single_attr(&[1.0, 2.0]);
        assert!(matches!(compute_bin_mapper(&data, 1), Err(Error::InvalidParameter(_))));
    }

    #[test]
    fn attribute_count_mismatch_rejected() {
        let data = single_attr(&[1.0, 2.0]);
        let mapper = compute_bin_mapper(&data, 4).unwrap();
        let wide = RawDataset::new(
            2,
            2,
            vec![1.0, 2.0, 3.0, 4.0],
            vec![0.0, 0.0],
            Task::Regression,
        )
        .unwrap();
        assert!(matches!(bin_dataset(&wide, &mapper), Err(Error::Shape(_))));
    }

    #[test]
    fn classification_labels_validated() {
        let bad = RawDataset::new(
            2,
            1,
            vec![0.0, 1.0],
            vec![0.0, 2.0],
            Task::Classification { classes: 2 },
        );
        assert!(bad.is_err());
    }

    proptest! {
        #[test]
        fn binning_monotone(mut values in proptest::collection::vec(-1e9f64..1e9, 2..200)) {
            let data = single_attr(&values);
            let mapper = compute_bin_mapper(&data, 16).unwrap();
            values.sort_by(|a, b| a.partial_cmp(b).unwrap());
            for w in values.windows(2) {
                prop_assert!(mapper.bin(0, w[0]) <= mapper.bin(0, w[1]));
            }
        }

        #[test]
        fn every_value_maps_to_its_own_bin_range(values in proptest::collection::vec(-1e6f64..1e6, 1..100)) {
            let data = single_attr(&values);
            let mapper = compute_bin_mapper(&data, 8).unwrap();
            for &v in &values {
                prop_assert!(mapper.bin(0, v) < mapper.bin_count(0));
            }
        }
    }
}

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{MsfError, Result};
use crate::eval::SplitSpec;
use crate::tensor::Matrix;

/// Feature rows with one class id per row.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub features: Matrix,
    pub labels: Vec<u32>,
}

impl FeatureMatrix {
    pub fn new(features: Matrix, labels: Vec<u32>) -> Result<Self> {
        if features.rows() != labels.len() {
            return Err(MsfError::Shape(format!(
                "{} feature rows but {} labels",
                features.rows(),
                labels.len()
            )));
        }
        features.ensure_finite("features")?;
        Ok(FeatureMatrix { features, labels })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features.cols()
    }

    pub fn select(&self, idx: &[usize]) -> FeatureMatrix {
        FeatureMatrix {
            features: self.features.select_rows(idx),
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
        }
    }

    /// Rows whose label satisfies `keep`, in original order.
    pub fn filter(&self, keep: impl Fn(u32) -> bool) -> FeatureMatrix {
        let idx: Vec<usize> = (0..self.len()).filter(|&i| keep(self.labels[i])).collect();
        self.select(&idx)
    }

    /// Row indices grouped by class id, ascending ids.
    pub fn indices_by_class(&self) -> BTreeMap<u32, Vec<usize>> {
        let mut out: BTreeMap<u32, Vec<usize>> = BTreeMap::new();
        for (i, &l) in self.labels.iter().enumerate() {
            out.entry(l).or_default().push(i);
        }
        out
    }
}

/// Splits a labelled set into the training set (seen classes only, minus a
/// per-class test slice) and the test set (that slice plus every sample of
/// the unseen classes).
pub fn train_test_split(
    data: &FeatureMatrix,
    split: &SplitSpec,
    seen_test_fraction: f64,
    seed: u64,
) -> Result<(FeatureMatrix, FeatureMatrix)> {
    if !(0.0..1.0).contains(&seen_test_fraction) {
        return Err(MsfError::Config(format!(
            "seen test fraction {seen_test_fraction} outside [0, 1)"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train = Vec::new();
    let mut test = Vec::new();
    for (class, mut idx) in data.indices_by_class() {
        if split.is_unseen(class) {
            test.extend(idx);
        } else if split.is_seen(class) {
            idx.shuffle(&mut rng);
            let k = (idx.len() as f64 * seen_test_fraction).round() as usize;
            let k = k.min(idx.len().saturating_sub(1));
            test.extend_from_slice(&idx[..k]);
            train.extend_from_slice(&idx[k..]);
        } else {
            return Err(MsfError::Config(format!("class {class} is in neither half of the split")));
        }
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((data.select(&train), data.select(&test)))
}

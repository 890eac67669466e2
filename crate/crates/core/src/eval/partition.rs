use std::collections::BTreeSet;

use rand::seq::index::sample;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::dataset::FeatureMatrix;
use crate::error::{MsfError, Result};

use super::split::SplitSpec;

/// Fraction of each remaining seen class held out as "seen" gate examples.
pub const GATE_SEEN_HOLDOUT: f64 = 0.1;

/// Result of carving a gate validation set out of the seen training data.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidationPartition {
    pub inner_train: FeatureMatrix,
    pub gate_val: FeatureMatrix,
    /// One flag per `gate_val` row.
    pub is_unseen: Vec<bool>,
    pub pseudo_unseen: Vec<u32>,
    /// Row indices into the input, for each side.
    pub inner_idx: Vec<usize>,
    pub gate_idx: Vec<usize>,
}

impl ValidationPartition {
    /// The split the inner pipeline trains against.
    pub fn pseudo_split(&self, name: &str) -> Result<SplitSpec> {
        let unseen: BTreeSet<u32> = self.pseudo_unseen.iter().copied().collect();
        let seen: BTreeSet<u32> = self
            .inner_train
            .labels
            .iter()
            .copied()
            .filter(|c| !unseen.contains(c))
            .collect();
        SplitSpec::new(name, seen, unseen)
    }
}

/// Picks as many seen classes as the split has unseen ones to act as
/// pseudo-unseen classes for gate fitting.
pub fn partition_validation(seen_train: &FeatureMatrix, split: &SplitSpec, seed: u64) -> Result<ValidationPartition> {
    let by_class = seen_train.indices_by_class();
    if let Some(c) = by_class.keys().find(|&&c| !split.is_seen(c)) {
        return Err(MsfError::Partition(format!("class {c} in the seen training data is not a seen class")));
    }
    let classes: Vec<u32> = by_class.keys().copied().collect();
    let cu = split.n_unseen();
    if classes.len() <= cu {
        return Err(MsfError::Partition(format!(
            "{} seen classes cannot supply {cu} pseudo-unseen classes",
            classes.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pseudo: Vec<u32> = sample(&mut rng, classes.len(), cu).into_iter().map(|i| classes[i]).collect();
    pseudo.sort_unstable();

    let mut inner = Vec::new();
    let mut gate = Vec::new();
    for (class, mut idx) in by_class {
        if pseudo.binary_search(&class).is_ok() {
            gate.extend(idx);
            continue;
        }
        idx.shuffle(&mut rng);
        let k = ((idx.len() as f64 * GATE_SEEN_HOLDOUT).round() as usize).min(idx.len().saturating_sub(1));
        gate.extend_from_slice(&idx[..k]);
        inner.extend_from_slice(&idx[k..]);
    }
    inner.sort_unstable();
    gate.sort_unstable();
    let gate_val = seen_train.select(&gate);
    let is_unseen = gate_val.labels.iter().map(|c| pseudo.binary_search(c).is_ok()).collect();
    Ok(ValidationPartition {
        inner_train: seen_train.select(&inner),
        gate_val,
        is_unseen,
        pseudo_unseen: pseudo,
        inner_idx: inner,
        gate_idx: gate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Matrix;

    fn data(n_classes: u32, per_class: usize) -> FeatureMatrix {
        let labels: Vec<u32> = (0..n_classes).flat_map(|c| std::iter::repeat_n(c, per_class)).collect();
        let n = labels.len();
        let x = Matrix::from_vec(n, 1, (0..n).map(|i| i as f64).collect()).unwrap();
        FeatureMatrix::new(x, labels).unwrap()
    }

    #[test]
    fn ntu60_split_counts() {
        let split = SplitSpec::new("ntu60-55-5", 0..55, 55..60).unwrap();
        let p = partition_validation(&data(55, 20), &split, 3).unwrap();
        assert_eq!(p.pseudo_unseen.len(), 5);
        let inner: BTreeSet<u32> = p.inner_train.labels.iter().copied().collect();
        assert_eq!(inner.len(), 50);
        assert_eq!(p.is_unseen.iter().filter(|&&u| u).count(), 100);
        assert_eq!(p.is_unseen.iter().filter(|&&u| !u).count(), 100);
    }

    #[test]
    fn sides_are_disjoint_and_cover() {
        let d = data(16, 40);
        let split = SplitSpec::new("s", 0..16, 16..20).unwrap();
        let p = partition_validation(&d, &split, 9).unwrap();
        let a: BTreeSet<usize> = p.inner_idx.iter().copied().collect();
        let b: BTreeSet<usize> = p.gate_idx.iter().copied().collect();
        assert!(a.is_disjoint(&b));
        assert_eq!(a.len() + b.len(), d.len());
        assert!(p
            .inner_train
            .labels
            .iter()
            .all(|c| p.pseudo_unseen.binary_search(c).is_err()));
        assert_eq!(partition_validation(&d, &split, 9).unwrap(), p);
        assert_eq!(p.pseudo_split("inner").unwrap().n_unseen(), 4);
    }

    #[test]
    fn too_few_seen_classes() {
        let split = SplitSpec::new("s", 0..3, 3..6).unwrap();
        assert!(matches!(
            partition_validation(&data(3, 5), &split, 0),
            Err(MsfError::Partition(_))
        ));
    }
}

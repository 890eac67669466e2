use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{MsfError, Result};
use crate::tensor::{adam_step, argmax, softmax, softmax_xent, AdamConfig, AdamState, Activation, DenseLayer, Matrix, Params};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HeadConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
}

impl Default for HeadConfig {
    fn default() -> Self {
        HeadConfig {
            epochs: 300,
            batch_size: 64,
            lr: 1e-3,
        }
    }
}

/// Linear softmax classifier whose output rows map to global class ids.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierHead {
    pub layer: DenseLayer,
    pub class_ids: Vec<u32>,
}

impl ClassifierHead {
    pub fn new(layer: DenseLayer, class_ids: Vec<u32>) -> Result<Self> {
        if layer.out_dim() != class_ids.len() {
            return Err(MsfError::Shape(format!(
                "head has {} outputs for {} classes",
                layer.out_dim(),
                class_ids.len()
            )));
        }
        let mut sorted = class_ids.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != class_ids.len() {
            return Err(MsfError::Config("classifier head has duplicate class ids".into()));
        }
        Ok(ClassifierHead { layer, class_ids })
    }

    pub fn in_dim(&self) -> usize {
        self.layer.in_dim()
    }

    pub fn n_classes(&self) -> usize {
        self.class_ids.len()
    }

    pub fn logits(&self, x: &Matrix) -> Result<Matrix> {
        self.layer.forward(x)
    }

    pub fn probabilities(&self, x: &Matrix) -> Result<Matrix> {
        Ok(softmax(&self.logits(x)?))
    }

    /// Global class id of the highest-scoring row for every input.
    pub fn predict(&self, x: &Matrix) -> Result<Vec<u32>> {
        let logits = self.logits(x)?;
        Ok(logits.row_iter().map(|r| self.class_ids[argmax(r)]).collect())
    }
}

/// Fits a softmax head by Adam on mean cross-entropy. Weights start at zero,
/// so the fit depends only on the data, the config and the shuffle seed.
pub fn train_head(x: &Matrix, labels: &[u32], config: &HeadConfig, seed: u64) -> Result<ClassifierHead> {
    if x.rows() != labels.len() {
        return Err(MsfError::Shape(format!(
            "{} rows with {} labels",
            x.rows(),
            labels.len()
        )));
    }
    if config.batch_size == 0 {
        return Err(MsfError::Config("batch_size must be positive".into()));
    }
    let mut class_ids = labels.to_vec();
    class_ids.sort_unstable();
    class_ids.dedup();
    if class_ids.len() < 2 {
        return Err(MsfError::DegenerateData(format!(
            "classifier needs at least two classes, got {}",
            class_ids.len()
        )));
    }
    let index: HashMap<u32, usize> = class_ids.iter().enumerate().map(|(i, &c)| (c, i)).collect();
    let targets: Vec<usize> = labels.iter().map(|l| index[l]).collect();

    let mut layer = DenseLayer::zeros(x.cols(), class_ids.len(), Activation::Identity);
    let mut adam = AdamState::for_tensors(AdamConfig::with_lr(config.lr), &layer.tensors());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..x.rows()).collect();
    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(config.batch_size) {
            let xb = x.select_rows(chunk);
            let yb: Vec<usize> = chunk.iter().map(|&i| targets[i]).collect();
            let (cache_out, cache) = layer.forward_cached(&xb)?;
            let (loss, g) = softmax_xent(&cache_out, &yb)?;
            if !loss.is_finite() {
                return Err(MsfError::Diverged {
                    epoch,
                    last_good: epoch.checked_sub(1),
                    reason: format!("classifier loss {loss}"),
                });
            }
            let mut grad = layer.zeros_like();
            layer.backward(&cache, &g, &mut grad)?;
            adam_step(&mut layer.tensors_mut(), &grad.tensors(), &mut adam)?;
        }
    }
    ClassifierHead::new(layer, class_ids)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn blobs(seed: u64) -> (Matrix, Vec<u32>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for i in 0..60 {
            let c = (i % 3) as u32;
            let centre = [[3.0, 0.0], [-3.0, 1.0], [0.0, -3.0]][c as usize];
            rows.push(vec![
                centre[0] + rng.random_range(-0.5..0.5),
                centre[1] + rng.random_range(-0.5..0.5),
            ]);
            labels.push([10, 20, 30][c as usize]);
        }
        (Matrix::from_rows(&rows).unwrap(), labels)
    }

    fn cfg() -> HeadConfig {
        HeadConfig {
            epochs: 100,
            batch_size: 16,
            lr: 0.05,
        }
    }

    #[test]
    fn separable_classes_are_learned() {
        let (x, y) = blobs(1);
        let head = train_head(&x, &y, &cfg(), 3).unwrap();
        assert_eq!(head.class_ids, vec![10, 20, 30]);
        assert_eq!(head.predict(&x).unwrap(), y);
        let again = train_head(&x, &y, &cfg(), 3).unwrap();
        assert_eq!(head, again);
    }

    #[test]
    fn relabeling_is_equivariant() {
        let (x, y) = blobs(2);
        let head = train_head(&x, &y, &cfg(), 4).unwrap();
        let relabel = |l: u32| match l {
            10 => 300,
            20 => 100,
            _ => 200,
        };
        let y2: Vec<u32> = y.iter().map(|&l| relabel(l)).collect();
        let head2 = train_head(&x, &y2, &cfg(), 4).unwrap();
        let p1: Vec<u32> = head.predict(&x).unwrap().into_iter().map(relabel).collect();
        assert_eq!(p1, head2.predict(&x).unwrap());
        // row for old class 10 is now the row for 300, the last one
        for (a, b) in head.layer.weight.row(0).iter().zip(head2.layer.weight.row(2)) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn single_class_is_degenerate() {
        let x = Matrix::zeros(3, 2);
        assert!(matches!(
            train_head(&x, &[1, 1, 1], &cfg(), 0),
            Err(MsfError::DegenerateData(_))
        ));
    }

    #[test]
    fn logit_shift_keeps_prediction() {
        let (x, y) = blobs(3);
        let mut head = train_head(&x, &y, &cfg(), 5).unwrap();
        let before = head.predict(&x).unwrap();
        for b in &mut head.layer.bias {
            *b += 17.0;
        }
        assert_eq!(head.predict(&x).unwrap(), before);
    }
}

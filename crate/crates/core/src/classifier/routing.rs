use crate::error::{MsfError, Result};
use crate::tensor::{argmax, entropy, Matrix};
use crate::vae::{embed_skeleton, AlignmentModule};

use super::gate::{GateFeatureMode, GateModel};
use super::head::ClassifierHead;

/// Gate inputs for every row of `features` (skeleton space).
pub fn gate_features(
    seen_head: &ClassifierHead,
    unseen_head: &ClassifierHead,
    module: &AlignmentModule,
    features: &Matrix,
    mode: GateFeatureMode,
) -> Result<Matrix> {
    let ps = seen_head.probabilities(features)?;
    let pu = unseen_head.probabilities(&embed_skeleton(module, features)?)?;
    gate_features_from_probs(&ps, &pu, mode)
}

/// Gate inputs from already computed seen and unseen head probabilities.
///
/// In [`GateFeatureMode::FullProbs`] both vectors are sorted in descending
/// order and the seen one is cut or zero-padded to the unseen width, so the
/// gate dimension does not depend on how many seen classes the heads know.
pub fn gate_features_from_probs(ps: &Matrix, pu: &Matrix, mode: GateFeatureMode) -> Result<Matrix> {
    if ps.rows() != pu.rows() {
        return Err(MsfError::Shape(format!(
            "{} seen rows vs {} unseen rows",
            ps.rows(),
            pu.rows()
        )));
    }
    let out = match mode {
        GateFeatureMode::Summary => {
            let rows: Vec<[f64; 4]> = ps
                .row_iter()
                .zip(pu.row_iter())
                .map(|(s, u)| [max(s), entropy(s), max(u), entropy(u)])
                .collect();
            if rows.is_empty() {
                Matrix::zeros(0, 4)
            } else {
                Matrix::from_rows(&rows)?
            }
        }
        GateFeatureMode::FullProbs => {
            let k = pu.cols();
            let mut out = Matrix::zeros(ps.rows(), 2 * k);
            for (i, (s, u)) in ps.row_iter().zip(pu.row_iter()).enumerate() {
                let row = out.row_mut(i);
                for (o, v) in row[..k].iter_mut().zip(sorted_desc(s)) {
                    *o = v;
                }
                for (o, v) in row[k..].iter_mut().zip(sorted_desc(u)) {
                    *o = v;
                }
            }
            out
        }
    };
    out.ensure_finite("gate features")?;
    Ok(out)
}

fn sorted_desc(p: &[f64]) -> Vec<f64> {
    let mut v = p.to_vec();
    v.sort_by(|a, b| b.total_cmp(a));
    v
}

fn max(p: &[f64]) -> f64 {
    p.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

/// Everything needed to classify a skeleton feature vector.
#[derive(Debug, Clone, PartialEq)]
pub struct GzslModel {
    pub module: AlignmentModule,
    pub seen_head: ClassifierHead,
    pub unseen_head: ClassifierHead,
    pub gate: GateModel,
    pub gate_features: GateFeatureMode,
}

/// Per-sample outcome of gated classification.
#[derive(Debug, Clone, PartialEq)]
pub struct Routed {
    pub predictions: Vec<u32>,
    pub routed_unseen: Vec<bool>,
    pub prob_unseen: Vec<f64>,
}

impl GzslModel {
    pub fn seen_ids(&self) -> &[u32] {
        &self.seen_head.class_ids
    }

    pub fn unseen_ids(&self) -> &[u32] {
        &self.unseen_head.class_ids
    }

    /// Routes every row through the gate, then takes the argmax of the chosen
    /// head.
    pub fn classify_gzsl(&self, features: &Matrix) -> Result<Routed> {
        let ps = self.seen_head.probabilities(features)?;
        let pu = self.unseen_head.probabilities(&embed_skeleton(&self.module, features)?)?;
        let g = gate_features_from_probs(&ps, &pu, self.gate_features)?;
        if g.cols() != self.gate.dim() {
            return Err(MsfError::Shape(format!(
                "gate expects {} features, got {}",
                self.gate.dim(),
                g.cols()
            )));
        }
        let mut out = Routed {
            predictions: Vec::with_capacity(features.rows()),
            routed_unseen: Vec::with_capacity(features.rows()),
            prob_unseen: Vec::with_capacity(features.rows()),
        };
        for i in 0..features.rows() {
            let p = self.gate.prob_unseen(g.row(i));
            let unseen = p > self.gate.threshold;
            let pred = if unseen {
                self.unseen_head.class_ids[argmax(pu.row(i))]
            } else {
                self.seen_head.class_ids[argmax(ps.row(i))]
            };
            out.predictions.push(pred);
            out.routed_unseen.push(unseen);
            out.prob_unseen.push(p);
        }
        Ok(out)
    }

    /// Routes by a known seen/unseen flag instead of the learned gate.
    pub fn classify_with_flags(&self, features: &Matrix, is_unseen: &[bool]) -> Result<Vec<u32>> {
        if is_unseen.len() != features.rows() {
            return Err(MsfError::Shape(format!(
                "{} flags for {} rows",
                is_unseen.len(),
                features.rows()
            )));
        }
        let seen = self.seen_head.predict(features)?;
        let unseen = classify_zsl(&self.unseen_head, &self.module, features)?;
        Ok(is_unseen
            .iter()
            .enumerate()
            .map(|(i, &u)| if u { unseen[i] } else { seen[i] })
            .collect())
    }

    /// Single classifier over all classes: argmax of the two heads'
    /// probabilities placed side by side, with no gate.
    pub fn classify_joint(&self, features: &Matrix) -> Result<Vec<u32>> {
        let ps = self.seen_head.probabilities(features)?;
        let pu = self.unseen_head.probabilities(&embed_skeleton(&self.module, features)?)?;
        let ids: Vec<u32> = self.seen_ids().iter().chain(self.unseen_ids()).copied().collect();
        let joint = Matrix::hconcat(&[&ps, &pu])?;
        Ok(joint.row_iter().map(|r| ids[argmax(r)]).collect())
    }
}

/// Unseen-only prediction on skeleton embeddings.
pub fn classify_zsl(unseen_head: &ClassifierHead, module: &AlignmentModule, features: &Matrix) -> Result<Vec<u32>> {
    unseen_head.predict(&embed_skeleton(module, features)?)
}

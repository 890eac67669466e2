use serde::{Deserialize, Serialize};

use crate::error::{MsfError, Result};

use super::split::SplitSpec;

/// Seen accuracy, unseen accuracy and their harmonic mean, all in percent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GzslMetrics {
    pub acc_s: f64,
    pub acc_u: f64,
    pub h: f64,
}

impl GzslMetrics {
    pub fn from_accuracies(acc_s: f64, acc_u: f64) -> Self {
        GzslMetrics {
            acc_s,
            acc_u,
            h: harmonic_mean(acc_s, acc_u),
        }
    }
}

/// `2ab / (a + b)`, and 0 when both are 0.
pub fn harmonic_mean(a: f64, b: f64) -> f64 {
    if a + b == 0.0 {
        0.0
    } else {
        2.0 * a * b / (a + b)
    }
}

fn check_len(predictions: &[u32], truths: &[u32]) -> Result<()> {
    if predictions.len() != truths.len() {
        return Err(MsfError::Shape(format!(
            "{} predictions for {} truths",
            predictions.len(),
            truths.len()
        )));
    }
    Ok(())
}

fn accuracy<'a>(pairs: impl Iterator<Item = (&'a u32, &'a u32)>) -> Option<f64> {
    let (mut n, mut correct) = (0usize, 0usize);
    for (p, t) in pairs {
        n += 1;
        correct += (p == t) as usize;
    }
    (n > 0).then(|| 100.0 * correct as f64 / n as f64)
}

/// Top-1 accuracy in percent.
pub fn zsl_accuracy(predictions: &[u32], truths: &[u32]) -> Result<f64> {
    check_len(predictions, truths)?;
    accuracy(predictions.iter().zip(truths)).ok_or_else(|| MsfError::EmptyInput("no test samples".into()))
}

/// Per-partition accuracies over a test set that mixes seen and unseen
/// classes.
pub fn gzsl_metrics(predictions: &[u32], truths: &[u32], split: &SplitSpec) -> Result<GzslMetrics> {
    check_len(predictions, truths)?;
    let part = |keep: &dyn Fn(u32) -> bool, what: &str| {
        accuracy(predictions.iter().zip(truths).filter(|(_, t)| keep(**t)))
            .ok_or_else(|| MsfError::EmptyPartition(format!("no {what} samples in the test set")))
    };
    let acc_s = part(&|t| split.is_seen(t), "seen")?;
    let acc_u = part(&|t| split.is_unseen(t), "unseen")?;
    Ok(GzslMetrics::from_accuracies(acc_s, acc_u))
}

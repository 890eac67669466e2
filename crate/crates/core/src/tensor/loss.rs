use super::matrix::Matrix;
use crate::error::{MsfError, Result};

/// Numerically stable softmax of one row of logits.
pub fn softmax_row(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = logits.iter().map(|&l| (l - max).exp()).collect();
    let sum: f64 = out.iter().sum();
    for v in &mut out {
        *v /= sum;
    }
    out
}

pub fn softmax(logits: &Matrix) -> Matrix {
    let mut out = Matrix::zeros(logits.rows(), logits.cols());
    for r in 0..logits.rows() {
        out.row_mut(r).copy_from_slice(&softmax_row(logits.row(r)));
    }
    out
}

/// Shannon entropy (nats) of a probability vector.
pub fn entropy(p: &[f64]) -> f64 {
    p.iter().filter(|&&v| v > 0.0).map(|&v| -v * v.ln()).sum()
}

/// Index of the largest entry; the first one wins ties.
pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate().skip(1) {
        if x > v[best] {
            best = i;
        }
    }
    best
}

/// Mean softmax cross-entropy and its gradient with respect to the logits.
pub fn softmax_xent(logits: &Matrix, labels: &[usize]) -> Result<(f64, Matrix)> {
    let (b, c) = logits.shape();
    if labels.len() != b {
        return Err(MsfError::Shape(format!(
            "{b} logit rows but {} labels",
            labels.len()
        )));
    }
    if b == 0 {
        return Err(MsfError::EmptyInput("softmax_xent on empty batch".into()));
    }
    let mut grad = Matrix::zeros(b, c);
    let mut loss = 0.0;
    for (r, &y) in labels.iter().enumerate() {
        if y >= c {
            return Err(MsfError::Index(format!("label {y} with {c} classes")));
        }
        let row = logits.row(r);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + row.iter().map(|&l| (l - max).exp()).sum::<f64>().ln();
        loss += lse - row[y];
        let g = grad.row_mut(r);
        for (gi, &l) in g.iter_mut().zip(row) {
            *gi = (l - lse).exp() / b as f64;
        }
        g[y] -= 1.0 / b as f64;
    }
    let loss = loss / b as f64;
    if !loss.is_finite() {
        return Err(MsfError::Numeric(format!("cross-entropy is {loss}")));
    }
    Ok((loss, grad))
}

//! Seen/unseen gate: an L2-regularized logistic regression fit with L-BFGS.
//!
//! The objective matches the usual `C`-parameterized form,
//! `½‖w‖² + C Σᵢ log(1 + exp(−yᵢ (w·xᵢ + b)))` with `yᵢ ∈ {−1, +1}` and an
//! unregularized intercept.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{MsfError, Result};
use crate::tensor::{dot, Matrix};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GateConfig {
    /// Inverse regularization strength.
    pub c: f64,
    pub tol: f64,
    pub max_iter: usize,
    /// Decision threshold on the predicted probability of "unseen".
    pub threshold: f64,
    pub features: GateFeatureMode,
}

impl Default for GateConfig {
    fn default() -> Self {
        GateConfig {
            c: 1.0,
            tol: 1e-6,
            max_iter: 1000,
            threshold: 0.5,
            features: GateFeatureMode::Summary,
        }
    }
}

/// What the gate sees for each sample.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GateFeatureMode {
    /// Max probability and entropy of the seen head, then of the unseen head.
    #[default]
    Summary,
    /// Both heads' probability vectors, ranked, seen first.
    FullProbs,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GateModel {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub threshold: f64,
}

impl GateModel {
    /// Gate that never routes to the unseen head.
    pub fn always_seen(dim: usize) -> Self {
        GateModel {
            weights: vec![0.0; dim],
            bias: 0.0,
            threshold: 1.0,
        }
    }

    /// Gate that always routes to the unseen head.
    pub fn always_unseen(dim: usize) -> Self {
        GateModel {
            weights: vec![0.0; dim],
            bias: 0.0,
            threshold: -1.0,
        }
    }

    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    pub fn prob_unseen(&self, x: &[f64]) -> f64 {
        sigmoid(dot(&self.weights, x) + self.bias)
    }

    pub fn is_unseen(&self, x: &[f64]) -> bool {
        self.prob_unseen(x) > self.threshold
    }
}

fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^t)` without overflow.
fn softplus(t: f64) -> f64 {
    t.max(0.0) + (-t.abs()).exp().ln_1p()
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogisticFit {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub objective: f64,
    pub grad_norm: f64,
    pub iterations: usize,
    pub converged: bool,
}

struct Problem<'a> {
    x: &'a Matrix,
    y: Vec<f64>,
    c: f64,
}

impl Problem<'_> {
    /// Objective and gradient at `theta = [w..., b]`.
    fn eval(&self, theta: &[f64]) -> (f64, Vec<f64>) {
        let d = self.x.cols();
        let (w, b) = (&theta[..d], theta[d]);
        let mut f = 0.5 * dot(w, w);
        let mut g = theta.to_vec();
        g[d] = 0.0;
        for (row, &y) in self.x.row_iter().zip(&self.y) {
            let margin = y * (dot(w, row) + b);
            f += self.c * softplus(-margin);
            let coef = -self.c * y * sigmoid(-margin);
            for (gj, xj) in g[..d].iter_mut().zip(row) {
                *gj += coef * xj;
            }
            g[d] += coef;
        }
        (f, g)
    }
}

fn norm(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

/// Minimizes the regularized logistic loss from `init` (zeros if `None`).
pub fn fit_logistic(
    x: &Matrix,
    is_positive: &[bool],
    config: &GateConfig,
    init: Option<&[f64]>,
) -> Result<LogisticFit> {
    if x.rows() != is_positive.len() {
        return Err(MsfError::Shape(format!(
            "{} gate rows with {} labels",
            x.rows(),
            is_positive.len()
        )));
    }
    let pos = is_positive.iter().filter(|&&p| p).count();
    if pos == 0 || pos == is_positive.len() {
        return Err(MsfError::DegenerateData(
            "gate training needs both seen and unseen examples".into(),
        ));
    }
    if !(config.c > 0.0) {
        return Err(MsfError::Config(format!("gate C must be positive, got {}", config.c)));
    }
    x.ensure_finite("gate features")?;
    let d = x.cols();
    let problem = Problem {
        x,
        y: is_positive.iter().map(|&p| if p { 1.0 } else { -1.0 }).collect(),
        c: config.c,
    };

    let mut theta = match init {
        Some(t) if t.len() == d + 1 => t.to_vec(),
        Some(t) => {
            return Err(MsfError::Shape(format!(
                "initial point has {} entries, expected {}",
                t.len(),
                d + 1
            )))
        }
        None => vec![0.0; d + 1],
    };
    let (mut f, mut g) = problem.eval(&theta);
    let memory = 10;
    let mut history: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::with_capacity(memory);
    let mut iterations = 0;

    while norm(&g) >= config.tol && iterations < config.max_iter {
        iterations += 1;

        // two-loop recursion for the quasi-Newton direction
        let mut q = g.clone();
        let mut alphas = Vec::with_capacity(history.len());
        for (s, y, rho) in history.iter().rev() {
            let a = rho * dot(s, &q);
            for (qi, yi) in q.iter_mut().zip(y) {
                *qi -= a * yi;
            }
            alphas.push(a);
        }
        let gamma = history
            .back()
            .map_or(1.0 / norm(&g).max(1.0), |(s, y, _)| dot(s, y) / dot(y, y));
        for v in &mut q {
            *v *= gamma;
        }
        for ((s, y, rho), a) in history.iter().zip(alphas.iter().rev()) {
            let b = rho * dot(y, &q);
            for (qi, si) in q.iter_mut().zip(s) {
                *qi += (a - b) * si;
            }
        }
        let mut dir: Vec<f64> = q.iter().map(|v| -v).collect();
        let mut slope = dot(&g, &dir);
        if slope >= 0.0 {
            // not a descent direction: restart from steepest descent
            history.clear();
            dir = g.iter().map(|v| -v).collect();
            slope = -dot(&g, &g);
        }

        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            let cand: Vec<f64> = theta.iter().zip(&dir).map(|(t, d)| t + step * d).collect();
            let (fc, gc) = problem.eval(&cand);
            let armijo = fc <= f + 1e-4 * step * slope;
            // near the optimum the decrease is below rounding; fall back to
            // gradient-norm progress
            let flat = fc <= f + 1e-12 * f.abs().max(1.0) && norm(&gc) < norm(&g);
            if fc.is_finite() && (armijo || flat) {
                accepted = Some((cand, fc, gc));
                break;
            }
            step *= 0.5;
        }
        let Some((next, fn_, gn)) = accepted else {
            break;
        };
        let s: Vec<f64> = next.iter().zip(&theta).map(|(a, b)| a - b).collect();
        let yv: Vec<f64> = gn.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &yv);
        if sy > 1e-12 * norm(&s) * norm(&yv) {
            if history.len() == memory {
                history.pop_front();
            }
            history.push_back((s, yv, 1.0 / sy));
        }
        theta = next;
        f = fn_;
        g = gn;
    }

    let grad_norm = norm(&g);
    Ok(LogisticFit {
        bias: theta[d],
        weights: theta[..d].to_vec(),
        objective: f,
        grad_norm,
        iterations,
        converged: grad_norm < config.tol,
    })
}

/// Fits the gate on rows labelled `is_unseen`.
pub fn train_gate(features: &Matrix, is_unseen: &[bool], config: &GateConfig) -> Result<GateModel> {
    let fit = fit_logistic(features, is_unseen, config, None)?;
    Ok(GateModel {
        weights: fit.weights,
        bias: fit.bias,
        threshold: config.threshold,
    })
}

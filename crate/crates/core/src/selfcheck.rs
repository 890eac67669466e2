//! Numerical self-checks: finite-difference gradients of every hand-written
//! backward pass, a Monte Carlo check of the closed-form KL, and recomputation
//! of published harmonic means.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::Result;
use crate::eval::{PublishedRow, PUBLISHED_ROWS};
use crate::tensor::{grad_check, softmax_xent, GradCheckOptions, Matrix, Params};
use crate::vae::{
    kl_to_standard_normal, standard_normal_matrix, AlignNorm, AlignmentBatch, AlignmentModule, LossWeights, Modality,
};

/// Largest acceptable gradient relative error.
pub const GRAD_TOLERANCE: f64 = 1e-4;
/// Largest acceptable relative gap between closed-form and sampled KL.
pub const KL_TOLERANCE: f64 = 0.01;
pub const KL_SAMPLES: usize = 1_000_000;
pub const TABLE_TOLERANCE: f64 = 0.01;

#[derive(Debug, Clone, PartialEq)]
pub struct GradResult {
    pub name: &'static str,
    pub max_rel_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KlResult {
    pub mu: Vec<f64>,
    pub log_var: Vec<f64>,
    pub closed_form: f64,
    pub monte_carlo: f64,
}

impl KlResult {
    pub fn rel_error(&self) -> f64 {
        (self.closed_form - self.monte_carlo).abs() / self.closed_form.abs()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TableResult {
    pub row: PublishedRow,
    pub recomputed: f64,
}

impl TableResult {
    pub fn matches(&self) -> bool {
        (self.recomputed - self.row.h).abs() <= TABLE_TOLERANCE
    }
}

/// Finite-difference checks on softmax cross-entropy, each branch loss and the
/// total loss at tiny dims. Every coordinate is checked.
pub fn gradient_checks(seed: u64) -> Result<Vec<GradResult>> {
    let opts = GradCheckOptions {
        max_coords: None,
        seed,
        ..GradCheckOptions::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();

    let logits = Matrix::random_normal(4, 5, 1.5, &mut rng);
    let labels = [0usize, 3, 4, 3];
    let xent = |flat: &[f64]| {
        let l = Matrix::from_vec(4, 5, flat.to_vec())?;
        let (loss, g) = softmax_xent(&l, &labels)?;
        Ok((loss, g.into_vec()))
    };
    out.push(GradResult {
        name: "softmax cross-entropy",
        max_rel_error: grad_check(xent, logits.as_slice(), opts)?,
    });

    let weights = LossWeights {
        alpha: 0.7,
        beta: 1.3,
        align_norm: AlignNorm::L2,
    };
    let module = AlignmentModule::init(5, 4, &[6], 3, weights, &mut rng)?;
    let skeleton = Matrix::random_normal(6, 5, 1.0, &mut rng);
    let text = Matrix::random_normal(6, 4, 1.0, &mut rng);
    let eps_s = standard_normal_matrix(6, 3, &mut rng);
    let eps_t = standard_normal_matrix(6, 3, &mut rng);
    let batch = AlignmentBatch {
        skeleton: &skeleton,
        text: &text,
        eps_skeleton: &eps_s,
        eps_text: &eps_t,
    };
    let params = module.flatten();
    for (name, source) in [
        ("skeleton branch loss", Some(Modality::Skeleton)),
        ("text branch loss", Some(Modality::Text)),
        ("total loss", None),
    ] {
        let loss = |flat: &[f64]| {
            let mut m = module.clone();
            m.load_flat(flat)?;
            match source {
                Some(src) => {
                    let mut g = m.zeros_like();
                    let l = m.branch_loss_grad(src, &batch, weights, &mut g)?;
                    Ok((l.total, g.flatten()))
                }
                None => {
                    let (l, g) = m.total_loss_grad(&batch, weights)?;
                    Ok((l.total, g.flatten()))
                }
            }
        };
        out.push(GradResult {
            name,
            max_rel_error: grad_check(loss, &params, opts)?,
        });
    }
    Ok(out)
}

/// KL of a diagonal Gaussian to `N(0, I)` estimated as the sample mean of
/// `log q(z) − log p(z)` with `z ~ q`.
pub fn kl_monte_carlo(mu: &[f64], log_var: &[f64], samples: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sigma: Vec<f64> = log_var.iter().map(|lv| (0.5 * lv).exp()).collect();
    let mut total = 0.0;
    for _ in 0..samples {
        let mut term = 0.0;
        for ((m, s), lv) in mu.iter().zip(&sigma).zip(log_var) {
            let e: f64 = rng.sample(StandardNormal);
            let z = m + s * e;
            term += 0.5 * (z * z - e * e - lv);
        }
        total += term;
    }
    total / samples as f64
}

pub fn kl_checks(seed: u64) -> Vec<KlResult> {
    let cases: [(Vec<f64>, Vec<f64>); 3] = [
        (vec![0.0], vec![4f64.ln()]),
        (vec![1.0, -0.5], vec![0.0, -1.0]),
        (vec![0.3, 0.2, -0.7], vec![0.5, -0.3, 0.1]),
    ];
    cases
        .into_iter()
        .enumerate()
        .map(|(i, (mu, log_var))| KlResult {
            closed_form: kl_to_standard_normal(&mu, &log_var),
            monte_carlo: kl_monte_carlo(&mu, &log_var, KL_SAMPLES, seed + i as u64),
            mu,
            log_var,
        })
        .collect()
}

pub fn table_checks() -> Vec<TableResult> {
    PUBLISHED_ROWS
        .iter()
        .map(|&row| TableResult {
            recomputed: row.recomputed_h(),
            row,
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelfCheckReport {
    pub gradients: Vec<GradResult>,
    pub kl: Vec<KlResult>,
    pub tables: Vec<TableResult>,
}

impl SelfCheckReport {
    pub fn gradients_ok(&self) -> bool {
        self.gradients.iter().all(|g| g.max_rel_error < GRAD_TOLERANCE)
    }

    pub fn kl_ok(&self) -> bool {
        self.kl.iter().all(|k| k.rel_error() < KL_TOLERANCE)
    }

    pub fn table_mismatches(&self) -> Vec<&TableResult> {
        self.tables.iter().filter(|t| !t.matches()).collect()
    }
}

pub fn run_selfcheck(seed: u64) -> Result<SelfCheckReport> {
    Ok(SelfCheckReport {
        gradients: gradient_checks(seed)?,
        kl: kl_checks(seed),
        tables: table_checks(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gradients_pass() {
        for g in gradient_checks(1).unwrap() {
            assert!(g.max_rel_error < GRAD_TOLERANCE, "{g:?}");
        }
    }

    #[test]
    fn kl_reference_value() {
        let kl = kl_to_standard_normal(&[0.0], &[4f64.ln()]);
        assert!((kl - 0.5 * (3.0 - 4f64.ln())).abs() < 1e-15);
        assert!((kl - 0.8069).abs() < 1e-4);
        let mc = kl_monte_carlo(&[0.0], &[4f64.ln()], 200_000, 3);
        assert!((mc - kl).abs() / kl < 0.02);
    }
}

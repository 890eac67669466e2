use crate::error::{MsfError, Result};
use crate::tensor::Matrix;

/// Bound applied to every predicted log-variance.
pub const LOG_VAR_CLAMP: f64 = 20.0;

/// Diagonal Gaussians for a batch: row `i` of `mu` and `log_var` describe
/// sample `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianParams {
    pub mu: Matrix,
    pub log_var: Matrix,
}

impl GaussianParams {
    pub fn new(mu: Matrix, log_var: Matrix) -> Result<Self> {
        if mu.shape() != log_var.shape() {
            return Err(MsfError::Shape(format!(
                "mu {:?} vs log_var {:?}",
                mu.shape(),
                log_var.shape()
            )));
        }
        Ok(GaussianParams { mu, log_var })
    }

    pub fn batch_size(&self) -> usize {
        self.mu.rows()
    }

    pub fn latent_dim(&self) -> usize {
        self.mu.cols()
    }

    /// `z = mu + exp(log_var / 2) ⊙ eps`, with `eps` drawn by the caller.
    pub fn reparameterize(&self, eps: &Matrix) -> Result<Matrix> {
        if eps.shape() != self.mu.shape() {
            return Err(MsfError::Shape(format!(
                "noise {:?} for latent batch {:?}",
                eps.shape(),
                self.mu.shape()
            )));
        }
        let mut z = self.mu.clone();
        for ((zv, &lv), &e) in z
            .as_mut_slice()
            .iter_mut()
            .zip(self.log_var.as_slice())
            .zip(eps.as_slice())
        {
            *zv += (0.5 * lv).exp() * e;
        }
        Ok(z)
    }

    /// Per-row KL divergence to the standard normal prior.
    pub fn kl_per_row(&self) -> Vec<f64> {
        self.mu
            .row_iter()
            .zip(self.log_var.row_iter())
            .map(|(m, lv)| kl_to_standard_normal(m, lv))
            .collect()
    }
}

/// Single-sample reparameterization.
pub fn reparameterize(mu: &[f64], log_var: &[f64], eps: &[f64]) -> Vec<f64> {
    mu.iter()
        .zip(log_var)
        .zip(eps)
        .map(|((m, lv), e)| m + (0.5 * lv).exp() * e)
        .collect()
}

/// `KL(N(mu, diag(exp(log_var))) ‖ N(0, I))` in closed form.
pub fn kl_to_standard_normal(mu: &[f64], log_var: &[f64]) -> f64 {
    mu.iter()
        .zip(log_var)
        .map(|(m, lv)| 0.5 * (m * m + (lv.exp_m1() - lv)))
        .sum()
}

pub(crate) fn clamp_log_var(v: f64) -> f64 {
    v.clamp(-LOG_VAR_CLAMP, LOG_VAR_CLAMP)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn reparameterize_cases() {
        assert_eq!(reparameterize(&[1.5, -2.0], &[0.3, 4.0], &[0.0, 0.0]), vec![1.5, -2.0]);
        let z = reparameterize(&[0.0], &[2.0 * 2f64.ln()], &[1.0]);
        assert!((z[0] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn reparameterized_mean_converges() {
        let n = 100_000;
        let mu = [0.7, -1.3];
        let lv = [0.5f64, -1.0];
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let mut sum = [0.0; 2];
        for _ in 0..n {
            let eps: Vec<f64> = (0..2).map(|_| StandardNormal.sample(&mut rng)).collect();
            let z = reparameterize(&mu, &lv, &eps);
            sum[0] += z[0];
            sum[1] += z[1];
        }
        for d in 0..2 {
            let sigma = (0.5 * lv[d]).exp();
            let mean = sum[d] / n as f64;
            assert!((mean - mu[d]).abs() < 4.0 * sigma / (n as f64).sqrt());
        }
    }

    #[test]
    fn kl_closed_form_values() {
        assert_eq!(kl_to_standard_normal(&[0.0, 0.0], &[0.0, 0.0]), 0.0);
        assert!((kl_to_standard_normal(&[1.0], &[0.0]) - 0.5).abs() < 1e-15);
        let expect = 0.5 * (4.0 - 1.0 - 4f64.ln());
        assert!((kl_to_standard_normal(&[0.0], &[4f64.ln()]) - expect).abs() < 1e-15);
        assert!((expect - 0.8069).abs() < 1e-4);
    }

    #[test]
    fn batch_shape_checks() {
        let g = GaussianParams::new(Matrix::zeros(2, 3), Matrix::zeros(2, 3)).unwrap();
        assert!(g.reparameterize(&Matrix::zeros(2, 2)).is_err());
        assert!(GaussianParams::new(Matrix::zeros(2, 3), Matrix::zeros(3, 2)).is_err());
        assert_eq!(g.kl_per_row(), vec![0.0, 0.0]);
    }

    proptest! {
        #[test]
        fn kl_is_non_negative(mu in prop::collection::vec(-5.0f64..5.0, 1..6),
                              lv in prop::collection::vec(-8.0f64..8.0, 6)) {
            let lv = &lv[..mu.len()];
            let kl = kl_to_standard_normal(&mu, lv);
            prop_assert!(kl >= 0.0);
            let all_zero = mu.iter().chain(lv).all(|&v| v == 0.0);
            prop_assert_eq!(kl == 0.0, all_zero);
        }
    }
}

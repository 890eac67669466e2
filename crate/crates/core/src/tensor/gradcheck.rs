//! Central finite-difference gradient checking.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{MsfError, Result};

/// Floor on the relative-error denominator so entries where both gradients
/// are ~0 compare on an absolute scale.
pub const REL_ERR_FLOOR: f64 = 1e-6;

/// Numeric gradient of `f` at `x` by central differences.
pub fn central_difference(f: impl Fn(&[f64]) -> f64, x: &[f64], eps: f64) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            let orig = probe[i];
            probe[i] = orig + eps;
            let up = f(&probe);
            probe[i] = orig - eps;
            let down = f(&probe);
            probe[i] = orig;
            (up - down) / (2.0 * eps)
        })
        .collect()
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_ERR_FLOOR)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheckOptions {
    pub eps: f64,
    /// Check at most this many coordinates, drawn without replacement.
    /// `None` checks every coordinate.
    pub max_coords: Option<usize>,
    pub seed: u64,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        GradCheckOptions {
            eps: 1e-5,
            max_coords: Some(256),
            seed: 0,
        }
    }
}

/// Compares the analytic gradient returned by `loss_fn` against central
/// differences and returns the worst relative error over the checked
/// coordinates.
///
/// `loss_fn` must be deterministic: any sampling noise has to be frozen by the
/// caller.
pub fn grad_check<F>(loss_fn: F, params: &[f64], opts: GradCheckOptions) -> Result<f64>
where
    F: Fn(&[f64]) -> Result<(f64, Vec<f64>)>,
{
    if !(1e-6..=1e-4).contains(&opts.eps) {
        return Err(MsfError::Config(format!(
            "finite-difference step {} outside [1e-6, 1e-4]",
            opts.eps
        )));
    }
    let (loss, analytic) = loss_fn(params)?;
    if !loss.is_finite() {
        return Err(MsfError::Numeric(format!("loss at base point is {loss}")));
    }
    if analytic.len() != params.len() {
        return Err(MsfError::Shape(format!(
            "gradient has {} entries for {} parameters",
            analytic.len(),
            params.len()
        )));
    }
    let coords: Vec<usize> = match opts.max_coords {
        Some(k) if k < params.len() => {
            let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
            let mut idx = sample(&mut rng, params.len(), k).into_vec();
            idx.sort_unstable();
            idx
        }
        _ => (0..params.len()).collect(),
    };

    let mut probe = params.to_vec();
    let mut worst = 0.0f64;
    for &i in &coords {
        let orig = probe[i];
        probe[i] = orig + opts.eps;
        let up = loss_fn(&probe)?.0;
        probe[i] = orig - opts.eps;
        let down = loss_fn(&probe)?.0;
        probe[i] = orig;
        if !up.is_finite() || !down.is_finite() {
            return Err(MsfError::Numeric(format!(
                "loss is non-finite when perturbing coordinate {i}"
            )));
        }
        let numeric = (up - down) / (2.0 * opts.eps);
        worst = worst.max(relative_error(analytic[i], numeric));
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::layer::{Activation, DenseLayer, Params};
    use crate::tensor::loss::softmax_xent;
    use crate::tensor::matrix::Matrix;

    #[test]
    fn quadratic_is_exact() {
        let w = vec![0.5, -1.25, 3.0, 0.01];
        let err = grad_check(
            |w| Ok((0.5 * w.iter().map(|v| v * v).sum::<f64>(), w.to_vec())),
            &w,
            GradCheckOptions::default(),
        )
        .unwrap();
        assert!(err < 1e-8, "{err}");
    }

    #[test]
    fn dense_layer_with_softmax() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let layer = DenseLayer::init(5, 3, Activation::Identity, &mut rng);
        let x = Matrix::random_normal(6, 5, 1.0, &mut rng);
        let labels = [0, 1, 2, 2, 1, 0];
        let f = |flat: &[f64]| {
            let mut l = layer.clone();
            l.load_flat(flat)?;
            let (cache_out, cache) = l.forward_cached(&x)?;
            let (loss, g) = softmax_xent(&cache_out, &labels)?;
            let mut grad = l.zeros_like();
            l.backward(&cache, &g, &mut grad)?;
            Ok((loss, grad.flatten()))
        };
        let err = grad_check(f, &layer.flatten(), GradCheckOptions::default()).unwrap();
        assert!(err < 1e-4, "{err}");
    }

    #[test]
    fn rejects_bad_step_and_nan() {
        let w = vec![1.0];
        let opts = GradCheckOptions {
            eps: 1e-2,
            ..Default::default()
        };
        assert!(grad_check(|w| Ok((w[0], vec![1.0])), &w, opts).is_err());
        let nan = grad_check(|_| Ok((f64::NAN, vec![1.0])), &w, GradCheckOptions::default());
        assert!(matches!(nan, Err(MsfError::Numeric(_))));
    }

    #[test]
    fn detects_wrong_gradient() {
        let w = vec![1.0, 2.0];
        let err = grad_check(
            |w| Ok((w[0] * w[0] + w[1], vec![w[0], 1.0])),
            &w,
            GradCheckOptions::default(),
        )
        .unwrap();
        assert!(err > 0.4);
    }
}

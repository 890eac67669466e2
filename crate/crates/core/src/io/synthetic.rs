//! Synthetic cross-modal benchmark.
//!
//! Every class gets a text prototype per channel drawn from `N(0, I)`. The
//! concatenated prototype `τ_c` is mapped to skeleton space by a fixed random
//! projection `P`, and the skeleton class centre is
//! `σ_c = ρ·P τ_c + sqrt(1 − ρ²)·η_c` with independent `η_c ~ N(0, I)`.
//! Samples are `σ_c` plus isotropic Gaussian noise. With `ρ = 1` the text
//! channels fully determine the skeleton centres; with `ρ = 0` they carry no
//! information about them.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::dataset::FeatureMatrix;
use crate::error::{MsfError, Result};
use crate::semantic::SemanticBundle;
use crate::tensor::Matrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticConfig {
    pub n_classes: usize,
    pub samples_per_class: usize,
    pub skel_dim: usize,
    /// Width of each text channel.
    pub text_dim: usize,
    pub correlation: f64,
    pub noise_sigma: f64,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            n_classes: 20,
            samples_per_class: 200,
            skel_dim: 256,
            text_dim: 512,
            correlation: 1.0,
            noise_sigma: 0.1,
            seed: 7,
        }
    }
}

impl SyntheticConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_classes == 0 || self.samples_per_class == 0 {
            return Err(MsfError::Config("n_classes and samples_per_class must be positive".into()));
        }
        if self.skel_dim == 0 || self.text_dim == 0 {
            return Err(MsfError::Config("skel_dim and text_dim must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.correlation) {
            return Err(MsfError::Config(format!(
                "correlation {} outside [0, 1]",
                self.correlation
            )));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(MsfError::Config(format!("noise_sigma {} must be >= 0", self.noise_sigma)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticDataset {
    pub config: SyntheticConfig,
    pub samples: FeatureMatrix,
    pub semantics: SemanticBundle,
    /// `skel_dim × 3·text_dim`, applied to LB ⊕ AD ⊕ MD.
    pub projection: Matrix,
    /// Skeleton class centres `σ_c`, one row per class.
    pub centres: Matrix,
}

impl SyntheticDataset {
    pub fn class_ids(&self) -> Vec<u32> {
        (0..self.config.n_classes as u32).collect()
    }

    /// `P τ_c` for every class, one row per class.
    pub fn projected_prototypes(&self) -> Matrix {
        let full = Matrix::hconcat(&[
            self.semantics.channel(crate::semantic::Channel::Label).expect("generated"),
            self.semantics.channel(crate::semantic::Channel::Action).expect("generated"),
            self.semantics.channel(crate::semantic::Channel::Motion).expect("generated"),
        ])
        .expect("same row count");
        full.matmul_t(&self.projection).expect("projection width matches")
    }
}

fn normal_matrix(rows: usize, cols: usize, std: f64, rng: &mut ChaCha8Rng) -> Matrix {
    let data = (0..rows * cols)
        .map(|_| std * rng.sample::<f64, _>(StandardNormal))
        .collect();
    Matrix::from_vec(rows, cols, data).expect("sized by construction")
}

pub fn generate_synthetic(config: &SyntheticConfig) -> Result<SyntheticDataset> {
    config.validate()?;
    let c = config.n_classes;
    let k = config.text_dim;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    let lb = normal_matrix(c, k, 1.0, &mut rng);
    let ad = normal_matrix(c, k, 1.0, &mut rng);
    let md = normal_matrix(c, k, 1.0, &mut rng);
    let projection = normal_matrix(config.skel_dim, 3 * k, (1.0 / (3 * k) as f64).sqrt(), &mut rng);
    let eta = normal_matrix(c, config.skel_dim, 1.0, &mut rng);

    let tau = Matrix::hconcat(&[&lb, &ad, &md])?;
    let projected = tau.matmul_t(&projection)?;
    let rho = config.correlation;
    let rest = (1.0 - rho * rho).max(0.0).sqrt();
    let centres = projected.scale(rho).add(&eta.scale(rest))?;

    let n = c * config.samples_per_class;
    let noise = normal_matrix(n, config.skel_dim, config.noise_sigma, &mut rng);
    let mut features = Matrix::zeros(n, config.skel_dim);
    let mut labels = Vec::with_capacity(n);
    for class in 0..c {
        for s in 0..config.samples_per_class {
            let r = class * config.samples_per_class + s;
            for ((o, &m), &e) in features
                .row_mut(r)
                .iter_mut()
                .zip(centres.row(class))
                .zip(noise.row(r))
            {
                *o = m + e;
            }
            labels.push(class as u32);
        }
    }

    let ids: Vec<u32> = (0..c as u32).collect();
    Ok(SyntheticDataset {
        config: config.clone(),
        samples: FeatureMatrix::new(features, labels)?,
        semantics: SemanticBundle::new(ids, Some(lb), Some(ad), Some(md))?,
        projection,
        centres,
    })
}

/// Accuracy (percent) of assigning every sample to the candidate class whose
/// projected text prototype `P τ_c` is nearest in Euclidean distance.
///
/// This uses the generator's own projection, so it is the best a method that
/// knew the cross-modal map could do.
pub fn nearest_prototype_accuracy(
    dataset: &SyntheticDataset,
    samples: &FeatureMatrix,
    candidates: &[u32],
) -> Result<f64> {
    if samples.is_empty() {
        return Err(MsfError::EmptyInput("no samples for the nearest-prototype oracle".into()));
    }
    let projected = dataset.projected_prototypes();
    let mut correct = 0usize;
    for (row, &truth) in samples.features.row_iter().zip(&samples.labels) {
        let mut best = (f64::INFINITY, u32::MAX);
        for &c in candidates {
            let proto = projected.row(c as usize);
            let d: f64 = row.iter().zip(proto).map(|(a, b)| (a - b) * (a - b)).sum();
            if d < best.0 {
                best = (d, c);
            }
        }
        correct += (best.1 == truth) as usize;
    }
    Ok(100.0 * correct as f64 / samples.len() as f64)
}

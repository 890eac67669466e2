use rand::Rng;
use serde::{Deserialize, Serialize};

use super::gaussian::{clamp_log_var, GaussianParams, LOG_VAR_CLAMP};
use crate::error::{MsfError, Result};
use crate::tensor::{Activation, DenseLayer, LayerCache, Matrix, Mlp, Params};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Modality {
    Skeleton,
    Text,
}

impl Modality {
    pub fn other(self) -> Modality {
        match self {
            Modality::Skeleton => Modality::Text,
            Modality::Text => Modality::Skeleton,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Modality::Skeleton => "skeleton",
            Modality::Text => "text",
        }
    }
}

/// One VAE: a relu trunk feeding twin linear heads for the posterior mean
/// and log-variance, and a decoder from the latent back to this modality.
#[derive(Debug, Clone, PartialEq)]
pub struct VaeBranch {
    pub modality: Modality,
    pub input_dim: usize,
    pub trunk: Mlp,
    pub mu_head: DenseLayer,
    pub log_var_head: DenseLayer,
    pub decoder: Mlp,
}

pub(crate) struct EncodeCache {
    trunk: Vec<LayerCache>,
    mu: LayerCache,
    log_var: LayerCache,
}

impl VaeBranch {
    pub fn init<R: Rng + ?Sized>(
        modality: Modality,
        input_dim: usize,
        hidden: &[usize],
        latent_dim: usize,
        rng: &mut R,
    ) -> Self {
        let mut trunk = Vec::with_capacity(hidden.len());
        let mut prev = input_dim;
        for &h in hidden {
            trunk.push(DenseLayer::init(prev, h, Activation::Relu, rng));
            prev = h;
        }
        let mu_head = DenseLayer::init(prev, latent_dim, Activation::Identity, rng);
        let log_var_head = DenseLayer::init(prev, latent_dim, Activation::Identity, rng);
        let dec_hidden: Vec<usize> = hidden.iter().rev().copied().collect();
        let decoder = Mlp::init(latent_dim, &dec_hidden, input_dim, Activation::Identity, rng);
        VaeBranch {
            modality,
            input_dim,
            trunk: Mlp { layers: trunk },
            mu_head,
            log_var_head,
            decoder,
        }
    }

    pub fn latent_dim(&self) -> usize {
        self.mu_head.out_dim()
    }

    fn check_input(&self, f: &Matrix) -> Result<()> {
        if f.cols() != self.input_dim {
            return Err(MsfError::Shape(format!(
                "{} encoder expects {} features, got {}",
                self.modality.as_str(),
                self.input_dim,
                f.cols()
            )));
        }
        Ok(())
    }

    /// Posterior parameters for every row of `f`; log-variance clamped to
    /// `[-20, 20]`.
    pub fn encode(&self, f: &Matrix) -> Result<GaussianParams> {
        self.check_input(f)?;
        let h = self.trunk.forward(f)?;
        let mu = self.mu_head.forward(&h)?;
        let log_var = self.log_var_head.forward(&h)?.map(clamp_log_var);
        GaussianParams::new(mu, log_var)
    }

    pub(crate) fn encode_cached(&self, f: &Matrix) -> Result<(GaussianParams, EncodeCache)> {
        self.check_input(f)?;
        let (h, trunk) = self.trunk.forward_cached(f)?;
        let (mu, mu_cache) = self.mu_head.forward_cached(&h)?;
        let (raw, lv_cache) = self.log_var_head.forward_cached(&h)?;
        let log_var = raw.map(clamp_log_var);
        Ok((
            GaussianParams::new(mu, log_var)?,
            EncodeCache {
                trunk,
                mu: mu_cache,
                log_var: lv_cache,
            },
        ))
    }

    /// Backpropagates `∂L/∂mu` and `∂L/∂log_var` (post-clamp) into `grad`.
    pub(crate) fn encode_backward(
        &self,
        cache: &EncodeCache,
        d_mu: &Matrix,
        d_log_var: &Matrix,
        grad: &mut VaeBranch,
    ) -> Result<()> {
        let mut d_lv = d_log_var.clone();
        // the clamp passes no gradient outside its range
        for (g, &raw) in d_lv.as_mut_slice().iter_mut().zip(cache.log_var.pre.as_slice()) {
            if !(-LOG_VAR_CLAMP..=LOG_VAR_CLAMP).contains(&raw) {
                *g = 0.0;
            }
        }
        let dh_mu = self.mu_head.backward(&cache.mu, d_mu, &mut grad.mu_head)?;
        let dh_lv = self.log_var_head.backward(&cache.log_var, &d_lv, &mut grad.log_var_head)?;
        let dh = dh_mu.add(&dh_lv)?;
        self.trunk.backward(&cache.trunk, &dh, &mut grad.trunk)?;
        Ok(())
    }

    pub fn decode(&self, z: &Matrix) -> Result<Matrix> {
        self.decoder.forward(z)
    }

    pub fn zeros_like(&self) -> VaeBranch {
        VaeBranch {
            modality: self.modality,
            input_dim: self.input_dim,
            trunk: self.trunk.zeros_like(),
            mu_head: self.mu_head.zeros_like(),
            log_var_head: self.log_var_head.zeros_like(),
            decoder: self.decoder.zeros_like(),
        }
    }

    /// Hidden widths of the encoder trunk.
    pub fn hidden(&self) -> Vec<usize> {
        self.trunk.layers.iter().map(DenseLayer::out_dim).collect()
    }

    /// Every dense layer in serialization order.
    pub fn layers(&self) -> Vec<&DenseLayer> {
        self.trunk
            .layers
            .iter()
            .chain([&self.mu_head, &self.log_var_head])
            .chain(self.decoder.layers.iter())
            .collect()
    }

    pub fn layers_mut(&mut self) -> Vec<&mut DenseLayer> {
        self.trunk
            .layers
            .iter_mut()
            .chain([&mut self.mu_head, &mut self.log_var_head])
            .chain(self.decoder.layers.iter_mut())
            .collect()
    }
}

impl Params for VaeBranch {
    fn tensors(&self) -> Vec<&[f64]> {
        self.layers().into_iter().flat_map(|l| l.tensors()).collect()
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        self.layers_mut().into_iter().flat_map(|l| l.tensors_mut()).collect()
    }
}

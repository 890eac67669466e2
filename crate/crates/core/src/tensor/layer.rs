use rand::Rng;
use serde::{Deserialize, Serialize};

use super::matrix::Matrix;
use crate::error::{MsfError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Identity,
    Relu,
}

impl Activation {
    #[inline]
    fn apply(self, v: f64) -> f64 {
        match self {
            Activation::Identity => v,
            Activation::Relu => v.max(0.0),
        }
    }

    #[inline]
    fn derivative(self, pre: f64) -> f64 {
        match self {
            Activation::Identity => 1.0,
            Activation::Relu => {
                if pre > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

/// Fully connected layer computing `act(x Wᵀ + b)` for a batch of rows.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    /// `out × in`
    pub weight: Matrix,
    pub bias: Vec<f64>,
    pub activation: Activation,
}

/// Values kept from a forward pass for the backward pass.
#[derive(Debug, Clone)]
pub struct LayerCache {
    pub input: Matrix,
    pub pre: Matrix,
}

impl DenseLayer {
    pub fn new(weight: Matrix, bias: Vec<f64>, activation: Activation) -> Result<Self> {
        if weight.rows() != bias.len() {
            return Err(MsfError::Shape(format!(
                "layer weight has {} outputs, bias has {}",
                weight.rows(),
                bias.len()
            )));
        }
        Ok(DenseLayer {
            weight,
            bias,
            activation,
        })
    }

    pub fn zeros(in_dim: usize, out_dim: usize, activation: Activation) -> Self {
        DenseLayer {
            weight: Matrix::zeros(out_dim, in_dim),
            bias: vec![0.0; out_dim],
            activation,
        }
    }

    /// Glorot-uniform weights, zero bias.
    pub fn init<R: Rng + ?Sized>(
        in_dim: usize,
        out_dim: usize,
        activation: Activation,
        rng: &mut R,
    ) -> Self {
        let limit = (6.0 / (in_dim + out_dim) as f64).sqrt();
        let data = (0..in_dim * out_dim)
            .map(|_| rng.random_range(-limit..=limit))
            .collect();
        DenseLayer {
            weight: Matrix::from_vec(out_dim, in_dim, data).expect("sized by construction"),
            bias: vec![0.0; out_dim],
            activation,
        }
    }

    #[inline]
    pub fn in_dim(&self) -> usize {
        self.weight.cols()
    }

    #[inline]
    pub fn out_dim(&self) -> usize {
        self.weight.rows()
    }

    pub fn forward(&self, x: &Matrix) -> Result<Matrix> {
        let mut y = self.pre_activation(x)?;
        if self.activation != Activation::Identity {
            for v in y.as_mut_slice() {
                *v = self.activation.apply(*v);
            }
        }
        Ok(y)
    }

    pub fn forward_cached(&self, x: &Matrix) -> Result<(Matrix, LayerCache)> {
        let pre = self.pre_activation(x)?;
        let out = pre.map(|v| self.activation.apply(v));
        Ok((
            out,
            LayerCache {
                input: x.clone(),
                pre,
            },
        ))
    }

    fn pre_activation(&self, x: &Matrix) -> Result<Matrix> {
        if x.cols() != self.in_dim() {
            return Err(MsfError::Shape(format!(
                "layer expects {} inputs, got {}",
                self.in_dim(),
                x.cols()
            )));
        }
        let mut y = x.matmul_t(&self.weight)?;
        for r in 0..y.rows() {
            for (v, b) in y.row_mut(r).iter_mut().zip(&self.bias) {
                *v += b;
            }
        }
        Ok(y)
    }

    /// Accumulates parameter gradients into `grad` and returns `∂L/∂x`.
    pub fn backward(
        &self,
        cache: &LayerCache,
        grad_out: &Matrix,
        grad: &mut DenseLayer,
    ) -> Result<Matrix> {
        if grad_out.shape() != cache.pre.shape() {
            return Err(MsfError::Shape(format!(
                "backward: upstream {:?} vs output {:?}",
                grad_out.shape(),
                cache.pre.shape()
            )));
        }
        let delta = if self.activation == Activation::Identity {
            grad_out.clone()
        } else {
            let mut d = grad_out.clone();
            for (g, &p) in d.as_mut_slice().iter_mut().zip(cache.pre.as_slice()) {
                *g *= self.activation.derivative(p);
            }
            d
        };
        delta.t_matmul_acc(&cache.input, &mut grad.weight)?;
        for (gb, s) in grad.bias.iter_mut().zip(delta.sum_rows()) {
            *gb += s;
        }
        delta.matmul(&self.weight)
    }

    pub fn zeros_like(&self) -> DenseLayer {
        DenseLayer::zeros(self.in_dim(), self.out_dim(), self.activation)
    }

    pub fn is_finite(&self) -> bool {
        self.weight.is_finite() && self.bias.iter().all(|v| v.is_finite())
    }
}

/// Parameter containers expose their tensors in a fixed order so optimizers
/// and gradient checks can treat them as flat buffers.
pub trait Params {
    fn tensors(&self) -> Vec<&[f64]>;
    fn tensors_mut(&mut self) -> Vec<&mut [f64]>;

    fn num_params(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    fn flatten(&self) -> Vec<f64> {
        self.tensors().concat()
    }

    fn load_flat(&mut self, flat: &[f64]) -> Result<()> {
        let total = self.num_params();
        if flat.len() != total {
            return Err(MsfError::Shape(format!(
                "expected {total} parameters, got {}",
                flat.len()
            )));
        }
        let mut off = 0;
        for t in self.tensors_mut() {
            t.copy_from_slice(&flat[off..off + t.len()]);
            off += t.len();
        }
        Ok(())
    }
}

impl Params for DenseLayer {
    fn tensors(&self) -> Vec<&[f64]> {
        vec![self.weight.as_slice(), &self.bias]
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        vec![self.weight.as_mut_slice(), &mut self.bias]
    }
}

/// A stack of dense layers applied in order.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub layers: Vec<DenseLayer>,
}

impl Mlp {
    /// Hidden layers use relu, the last layer uses `output`.
    pub fn init<R: Rng + ?Sized>(
        in_dim: usize,
        hidden: &[usize],
        out_dim: usize,
        output: Activation,
        rng: &mut R,
    ) -> Self {
        let mut layers = Vec::with_capacity(hidden.len() + 1);
        let mut prev = in_dim;
        for &h in hidden {
            layers.push(DenseLayer::init(prev, h, Activation::Relu, rng));
            prev = h;
        }
        layers.push(DenseLayer::init(prev, out_dim, output, rng));
        Mlp { layers }
    }

    pub fn in_dim(&self) -> usize {
        self.layers.first().map_or(0, DenseLayer::in_dim)
    }

    pub fn out_dim(&self) -> usize {
        self.layers.last().map_or(0, DenseLayer::out_dim)
    }

    pub fn forward(&self, x: &Matrix) -> Result<Matrix> {
        let mut h = x.clone();
        for l in &self.layers {
            h = l.forward(&h)?;
        }
        Ok(h)
    }

    pub fn forward_cached(&self, x: &Matrix) -> Result<(Matrix, Vec<LayerCache>)> {
        let mut caches = Vec::with_capacity(self.layers.len());
        let mut h = x.clone();
        for l in &self.layers {
            let (out, cache) = l.forward_cached(&h)?;
            caches.push(cache);
            h = out;
        }
        Ok((h, caches))
    }

    pub fn backward(&self, caches: &[LayerCache], grad_out: &Matrix, grad: &mut Mlp) -> Result<Matrix> {
        let mut g = grad_out.clone();
        for ((l, c), gl) in self
            .layers
            .iter()
            .zip(caches)
            .zip(grad.layers.iter_mut())
            .rev()
        {
            g = l.backward(c, &g, gl)?;
        }
        Ok(g)
    }

    pub fn zeros_like(&self) -> Mlp {
        Mlp {
            layers: self.layers.iter().map(DenseLayer::zeros_like).collect(),
        }
    }
}

impl Params for Mlp {
    fn tensors(&self) -> Vec<&[f64]> {
        self.layers.iter().flat_map(|l| l.tensors()).collect()
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        self.layers.iter_mut().flat_map(|l| l.tensors_mut()).collect()
    }
}

/// `linear_forward`: one dense layer applied to a batch.
pub fn linear_forward(x: &Matrix, layer: &DenseLayer) -> Result<Matrix> {
    let y = layer.forward(x)?;
    y.ensure_finite("linear_forward output")?;
    Ok(y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identity_and_relu_cases() {
        let x = Matrix::from_rows(&[[1.0, 2.0]]).unwrap();
        let id = DenseLayer::new(Matrix::identity(2), vec![0.0; 2], Activation::Identity).unwrap();
        assert_eq!(linear_forward(&x, &id).unwrap().row(0), &[1.0, 2.0]);

        let x = Matrix::from_rows(&[[1.0, -1.0]]).unwrap();
        let relu = DenseLayer::new(Matrix::identity(2), vec![0.0; 2], Activation::Relu).unwrap();
        assert_eq!(linear_forward(&x, &relu).unwrap().row(0), &[1.0, 0.0]);
    }

    #[test]
    fn random_batch_matches_hand_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let x = Matrix::random_normal(3, 4, 1.0, &mut rng);
        let layer = DenseLayer::init(4, 5, Activation::Identity, &mut rng);
        let mut layer = layer;
        layer.bias = vec![0.1, -0.2, 0.3, 0.0, 1.0];
        let y = linear_forward(&x, &layer).unwrap();
        for i in 0..3 {
            for o in 0..5 {
                let mut s = layer.bias[o];
                for k in 0..4 {
                    s += x.get(i, k) * layer.weight.get(o, k);
                }
                assert!((y.get(i, o) - s).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn dimension_mismatch_is_shape_error() {
        let layer = DenseLayer::zeros(3, 2, Activation::Identity);
        let x = Matrix::zeros(1, 4);
        assert!(matches!(linear_forward(&x, &layer), Err(MsfError::Shape(_))));
        assert!(DenseLayer::new(Matrix::zeros(2, 3), vec![0.0], Activation::Relu).is_err());
    }

    #[test]
    fn identity_layer_is_affine() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut layer = DenseLayer::init(3, 2, Activation::Identity, &mut rng);
        let x = Matrix::random_normal(4, 3, 1.0, &mut rng);
        let y0 = layer.forward(&x).unwrap();
        let y2 = layer.forward(&x.scale(2.0)).unwrap();
        // homogeneous in x with zero bias
        for (a, b) in y0.as_slice().iter().zip(y2.as_slice()) {
            assert!((2.0 * a - b).abs() < 1e-12);
        }
        layer.bias = vec![0.5, -1.5];
        let yb = layer.forward(&x).unwrap();
        for r in 0..4 {
            assert!((yb.get(r, 0) - y0.get(r, 0) - 0.5).abs() < 1e-12);
            assert!((yb.get(r, 1) - y0.get(r, 1) + 1.5).abs() < 1e-12);
        }
    }

    #[test]
    fn flatten_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mlp = Mlp::init(3, &[4], 2, Activation::Identity, &mut rng);
        let flat = mlp.flatten();
        assert_eq!(flat.len(), 3 * 4 + 4 + 4 * 2 + 2);
        let mut other = mlp.zeros_like();
        other.load_flat(&flat).unwrap();
        assert_eq!(other, mlp);
        assert!(other.load_flat(&flat[1..]).is_err());
    }
}

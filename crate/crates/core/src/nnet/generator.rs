//! Residual scenario generator: `x' = x + z`, `y = x' + R(x' − mean_t x')`.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::dense::{Activation, DenseNet};
use crate::error::{Error, Result};
use crate::measures::Shape;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    pub shape: Shape,
    pub sigma2: f64,
    pub residual: DenseNet,
}

impl GeneratorSpec {
    /// `R` is a `[T*d, hidden, T*d]` tanh network with random weights.
    pub fn new<R: Rng + ?Sized>(shape: Shape, hidden: usize, sigma2: f64, rng: &mut R) -> Result<Self> {
        let n = shape.len();
        let residual = DenseNet::new(&[n, hidden, n], Activation::Tanh, Activation::Identity, rng)?;
        Self::with_residual(shape, sigma2, residual)
    }

    /// `R ≡ 0`; with `sigma2 = 0` the generator is the identity map.
    pub fn identity(shape: Shape, hidden: usize, sigma2: f64) -> Result<Self> {
        let n = shape.len();
        let residual = DenseNet::zeros(&[n, hidden, n], Activation::Tanh, Activation::Identity)?;
        Self::with_residual(shape, sigma2, residual)
    }

    pub fn with_residual(shape: Shape, sigma2: f64, residual: DenseNet) -> Result<Self> {
        if !(sigma2 >= 0.0) || !sigma2.is_finite() {
            return Err(Error::Parameter(format!("sigma2 must be nonnegative, got {sigma2}")));
        }
        if residual.input_dim() != shape.len() || residual.output_dim() != shape.len() {
            return Err(Error::Dimension(format!(
                "residual maps {} -> {}, path length is {}",
                residual.input_dim(),
                residual.output_dim(),
                shape.len()
            )));
        }
        Ok(GeneratorSpec {
            shape,
            sigma2,
            residual,
        })
    }

    pub fn sample_noise<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let sd = self.sigma2.sqrt();
        (0..self.shape.len())
            .map(|_| {
                let z: f64 = StandardNormal.sample(rng);
                sd * z
            })
            .collect()
    }

    /// `(x', x' − mean_t x')` for a given noise draw.
    pub fn perturbed(&self, x: &[f64], z: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let d = self.shape.dims;
        let steps = self.shape.steps;
        let xp: Vec<f64> = x.iter().zip(z).map(|(a, b)| a + b).collect();
        let mut means = vec![0.0; d];
        for (i, v) in xp.iter().enumerate() {
            means[i % d] += v / steps as f64;
        }
        let centered = xp.iter().enumerate().map(|(i, v)| v - means[i % d]).collect();
        (xp, centered)
    }

    pub fn generate_with_noise(&self, x: &[f64], z: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.shape.len() || z.len() != x.len() {
            return Err(Error::Dimension(format!(
                "generator expects paths of length {}",
                self.shape.len()
            )));
        }
        let (xp, c) = self.perturbed(x, z);
        let r = self.residual.forward(&c)?;
        Ok(xp.iter().zip(&r).map(|(a, b)| a + b).collect())
    }
}

pub fn generate<R: Rng + ?Sized>(spec: &GeneratorSpec, x: &[f64], rng: &mut R) -> Result<Vec<f64>> {
    let z = spec.sample_noise(rng);
    spec.generate_with_noise(x, &z)
}

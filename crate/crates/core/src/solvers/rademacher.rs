use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measures::PathBatch;
use crate::nnet::{DenseNet, Optimizer, OptimizerKind};

/// A scalar function of a flattened path.
pub type Hypothesis = dyn Fn(&[f64]) -> f64;

/// Hypotheses over which the supremum is taken.
pub enum HypothesisSet<'a> {
    /// Exact supremum over the listed functions.
    Finite(&'a [&'a Hypothesis]),
    /// Approximate supremum over the parameters of `net` (scalar output),
    /// by `steps` moment-adaptive ascent steps from its current parameters.
    Parametric {
        net: &'a DenseNet,
        steps: usize,
        learning_rate: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RademacherEstimate {
    pub value: f64,
    pub draws: usize,
    /// True when the supremum is only approximated from below.
    pub lower_bound: bool,
}

/// Monte Carlo estimate of `(1/N) E_σ sup_g Σ_i σ_i g(x_i)`.
pub fn rademacher_estimate<R: Rng + ?Sized>(
    hypotheses: &HypothesisSet<'_>,
    sample: &PathBatch,
    draws: usize,
    rng: &mut R,
) -> Result<RademacherEstimate> {
    if draws == 0 {
        return Err(Error::Parameter("draws must be positive".into()));
    }
    if sample.is_empty() {
        return Err(Error::Parameter("sample must be nonempty".into()));
    }
    let n = sample.len();
    let mut sigma = vec![0.0; n];
    let mut total = 0.0;
    match hypotheses {
        HypothesisSet::Finite(fs) => {
            let values = finite_values(fs, sample)?;
            for _ in 0..draws {
                fill_signs(&mut sigma, rng);
                total += sup_finite(&values, &sigma);
            }
        }
        HypothesisSet::Parametric {
            net,
            steps,
            learning_rate,
        } => {
            if net.input_dim() != sample.shape().len() || net.output_dim() != 1 {
                return Err(Error::Dimension("network must map a path to a scalar".into()));
            }
            for _ in 0..draws {
                fill_signs(&mut sigma, rng);
                total += sup_parametric(net, sample, &sigma, *steps, *learning_rate)?;
            }
        }
    }
    Ok(RademacherEstimate {
        value: total / (draws as f64 * n as f64),
        draws,
        lower_bound: matches!(hypotheses, HypothesisSet::Parametric { .. }),
    })
}

/// Exact expectation over all `2^N` sign vectors for a finite set.
pub fn rademacher_exhaustive(fs: &[&Hypothesis], sample: &PathBatch) -> Result<f64> {
    let n = sample.len();
    if n == 0 || n > 24 {
        return Err(Error::Parameter(format!(
            "exhaustive enumeration needs 1..=24 samples, got {n}"
        )));
    }
    let values = finite_values(fs, sample)?;
    let mut sigma = vec![0.0; n];
    let mut total = 0.0;
    for mask in 0u32..(1 << n) {
        for (i, s) in sigma.iter_mut().enumerate() {
            *s = if mask >> i & 1 == 1 { 1.0 } else { -1.0 };
        }
        total += sup_finite(&values, &sigma);
    }
    Ok(total / ((1u64 << n) as f64 * n as f64))
}

fn finite_values(fs: &[&Hypothesis], sample: &PathBatch) -> Result<Vec<Vec<f64>>> {
    if fs.is_empty() {
        return Err(Error::Parameter("hypothesis set is empty".into()));
    }
    Ok(fs.iter().map(|g| sample.paths().map(g).collect()).collect())
}

fn fill_signs<R: Rng + ?Sized>(sigma: &mut [f64], rng: &mut R) {
    for s in sigma {
        *s = if rng.random::<bool>() { 1.0 } else { -1.0 };
    }
}

fn sup_finite(values: &[Vec<f64>], sigma: &[f64]) -> f64 {
    values
        .iter()
        .map(|v| v.iter().zip(sigma).map(|(a, b)| a * b).sum::<f64>())
        .fold(f64::NEG_INFINITY, f64::max)
}

fn sup_parametric(net: &DenseNet, sample: &PathBatch, sigma: &[f64], steps: usize, lr: f64) -> Result<f64> {
    let mut net = net.clone();
    let mut opt = Optimizer::new(OptimizerKind::adam(lr), net.param_count());
    let mut best = f64::NEG_INFINITY;
    for k in 0..=steps {
        let mut value = 0.0;
        let mut grad = vec![0.0; net.param_count()];
        for (x, &s) in sample.paths().zip(sigma) {
            let fb = net.forward_backward(x, &[-s])?;
            value += s * fb.output[0];
            for (g, d) in grad.iter_mut().zip(&fb.param_grad) {
                *g += d;
            }
        }
        best = best.max(value);
        if k == steps {
            break;
        }
        let mut p = net.params();
        opt.step(&mut p, &grad, k);
        net.set_params(&p)?;
        net.apply_clamp();
    }
    Ok(best)
}

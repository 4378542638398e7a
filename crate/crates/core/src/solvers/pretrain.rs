use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measures::PathBatch;
use crate::nnet::{GeneratorSpec, Optimizer, OptimizerKind};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PretrainConfig {
    pub steps: usize,
    pub batch: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for PretrainConfig {
    fn default() -> Self {
        PretrainConfig {
            steps: 500,
            batch: 32,
            learning_rate: 0.01,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pretrained {
    pub generator: GeneratorSpec,
    /// Full-data MSE before and after training, on a fixed noise draw.
    pub initial_mse: f64,
    pub final_mse: f64,
}

/// Fit the residual network so that projected generated paths reproduce
/// their inputs in mean squared error.
pub fn pretrain_generator(gen: &GeneratorSpec, data: &PathBatch, cfg: &PretrainConfig) -> Result<Pretrained> {
    if data.is_empty() {
        return Err(Error::Parameter("pretraining data is empty".into()));
    }
    if data.shape() != gen.shape {
        return Err(Error::Dimension("generator and data shapes differ".into()));
    }
    if cfg.batch == 0 {
        return Err(Error::Parameter("batch must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let eval_seed: u64 = rng.random();
    let mut gen = gen.clone();
    let initial_mse = full_mse(&gen, data, eval_seed)?;
    let mut opt = Optimizer::new(OptimizerKind::adam(cfg.learning_rate), gen.residual.param_count());
    let bounds = data.bounds();
    let scale = 2.0 / (cfg.batch * gen.shape.len()) as f64;
    for k in 0..cfg.steps {
        let mut grad = vec![0.0; gen.residual.param_count()];
        for _ in 0..cfg.batch {
            let x = data.path(rng.random_range(0..data.len()));
            let z = gen.sample_noise(&mut rng);
            let (xp, c) = gen.perturbed(x, &z);
            let r = gen.residual.forward(&c)?;
            let adj: Vec<f64> = (0..x.len())
                .map(|i| {
                    let y = xp[i] + r[i];
                    if bounds.contains(y) {
                        scale * (y - x[i])
                    } else {
                        0.0
                    }
                })
                .collect();
            let fb = gen.residual.forward_backward(&c, &adj)?;
            for (g, d) in grad.iter_mut().zip(&fb.param_grad) {
                *g += d;
            }
        }
        let mut p = gen.residual.params();
        opt.step(&mut p, &grad, k);
        gen.residual.set_params(&p)?;
        gen.residual.apply_clamp();
    }
    let final_mse = full_mse(&gen, data, eval_seed)?;
    Ok(Pretrained {
        generator: gen,
        initial_mse,
        final_mse,
    })
}

/// MSE over the whole batch between projected generated paths and inputs.
pub fn full_mse(gen: &GeneratorSpec, data: &PathBatch, seed: u64) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let bounds = data.bounds();
    let mut total = 0.0;
    for x in data.paths() {
        let z = gen.sample_noise(&mut rng);
        let y = gen.generate_with_noise(x, &z)?;
        total += y
            .iter()
            .zip(x)
            .map(|(a, b)| (bounds.project(*a) - b).powi(2))
            .sum::<f64>();
    }
    Ok(total / (data.len() * gen.shape.len()) as f64)
}

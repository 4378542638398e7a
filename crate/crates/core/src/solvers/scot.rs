//! Structural causal dual: entropic plans between a sampled reference batch
//! and generated scenarios, descent on `(λ, γ′)`, ascent on the generator.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::GdaConfig;
use super::gda::{check_problem, dot, Increments};
use super::report::{SolverReport, Trajectory};
use crate::error::{Error, Result};
use crate::measures::{CostSpec, DiscreteMeasure, ObjectiveSpec, PathBatch, Shape};
use crate::nnet::{penalty_from_values, GeneratorSpec, Graph, Optimizer, TestFunctionFamily};
use crate::quantize::{adapted_empirical, QuantizerConfig};
use crate::sinkhorn::sinkhorn_weights;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScotOutcome {
    pub report: SolverReport,
    pub generator: GeneratorSpec,
    pub family: TestFunctionFamily,
}

pub fn solve_scot_gda(
    mu: &DiscreteMeasure,
    gen: &GeneratorSpec,
    f: &ObjectiveSpec,
    cost: &CostSpec,
    eps: f64,
    cfg: &GdaConfig,
) -> Result<SolverReport> {
    Ok(solve_scot(mu, gen, f, cost, eps, cfg)?.report)
}

/// As [`solve_scot_gda`], also returning the trained generator and test
/// functions.
pub fn solve_scot(
    mu: &DiscreteMeasure,
    gen: &GeneratorSpec,
    f: &ObjectiveSpec,
    cost: &CostSpec,
    eps: f64,
    cfg: &GdaConfig,
) -> Result<ScotOutcome> {
    cfg.validate()?;
    check_problem(mu, f, cost, eps)?;
    let shape = mu.shape();
    if gen.shape != shape {
        return Err(Error::Dimension("generator and reference shapes differ".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut family = if cfg.layers == 0 {
        TestFunctionFamily::empty(shape)
    } else {
        TestFunctionFamily::new(shape, cfg.layers, cfg.hidden, cfg.h_clamp, cfg.m_clamp, &mut rng)?
    };
    let mut gen = gen.clone();
    let mut lambda = cfg.lambda0;
    let hp = family.h_param_count();
    let mp = family.param_count() - hp;
    let mut lambda_opt = Optimizer::new(cfg.lambda_optimizer, 1);
    let mut h_opt = Optimizer::new(cfg.h_optimizer, hp);
    let mut m_opt = Optimizer::new(cfg.m_optimizer, mp);
    let mut g_opt = Optimizer::new(cfg.generator_optimizer, gen.residual.param_count());
    let sampler = BatchSampler::new(mu, cfg.batch)?;
    let quantizer = if cfg.quantize_batch {
        Some(QuantizerConfig::new(mu.bounds(), shape, cfg.batch)?)
    } else {
        None
    };
    let bounds = mu.bounds();
    let b = cfg.batch;
    let col_w = vec![1.0 / b as f64; b];

    let mut traj = Trajectory::default();
    let mut last_nu = None;
    for k in 0..cfg.iterations {
        let step = |e: Error| e.at_iteration(k);
        let xb = sampler.draw(&mut rng).map_err(step)?;
        let mu_b = match &quantizer {
            Some(q) => adapted_empirical(q, &xb).map_err(step)?,
            None => DiscreteMeasure::uniform(xb.clone()),
        };
        let rows = mu_b.len();
        let row_w = mu_b.weights().to_vec();

        // Scenarios y_j = proj(G(x_j)) and the projection mask.
        let mut inputs = Vec::with_capacity(b);
        let mut ys = Vec::with_capacity(b);
        let mut masks = Vec::with_capacity(b);
        for x in xb.paths() {
            let z = gen.sample_noise(&mut rng);
            let (xp, c) = gen.perturbed(x, &z);
            let r = gen.residual.forward(&c).map_err(step)?;
            let raw: Vec<f64> = xp.iter().zip(&r).map(|(a, b)| a + b).collect();
            masks.push(raw.iter().map(|v| bounds.contains(*v)).collect::<Vec<_>>());
            ys.push(raw.iter().map(|v| bounds.project(*v)).collect::<Vec<_>>());
            inputs.push(c);
        }

        let inc = Increments::new(&family, &mu_b, cfg.compensate_increments).map_err(step)?;
        let hv = h_table(&family, &ys).map_err(step)?;
        let fy: Vec<f64> = ys
            .iter()
            .map(|y| f.eval(shape, y))
            .collect::<Result<_>>()
            .map_err(step)?;
        let mut cmat = vec![0.0; rows * b];
        for (i, x) in mu_b.support().paths().enumerate() {
            for (j, y) in ys.iter().enumerate() {
                cmat[i * b + j] = cost.eval(shape, x, y).map_err(step)?;
            }
        }
        let payoff = |i: usize, j: usize, lambda: f64, inc: &Increments, hv: &[Vec<f64>]| {
            let g = if hv.is_empty() { 0.0 } else { dot(&hv[j], &inc.d[i]) };
            fy[j] - lambda * cmat[i * b + j] + g
        };
        let modified: Vec<f64> = (0..rows * b)
            .map(|ij| -payoff(ij / b, ij % b, lambda, &inc, &hv))
            .collect();
        let reg = cfg.sinkhorn.tau.reg(lambda);
        let plan = sinkhorn_weights(&row_w, &col_w, &modified, reg, &cfg.sinkhorn)
            .map_err(step)?
            .plan;
        let pi = plan.as_slice();

        let value: f64 = (0..rows * b).map(|ij| pi[ij] * -modified[ij]).sum();
        let transport: f64 = pi.iter().zip(&cmat).map(|(p, c)| p * c).sum();
        let dual = lambda * eps + value;
        let (penalty, pen_grad) = if family.is_empty() {
            (0.0, Vec::new())
        } else {
            penalty_from_values(&inc.m, &row_w, family.layers(), shape.steps, cfg.eta)
        };
        if !dual.is_finite() || dual.abs() > cfg.divergence_limit {
            return Err(Error::Divergence {
                iteration: k,
                value: dual,
            });
        }
        traj.push(dual, lambda, transport, penalty);

        // Descent on λ and γ′ with the plan held fixed.
        let mut lam = [lambda];
        lambda_opt.step(&mut lam, &[eps - transport], k);
        if !family.is_empty() {
            let mut pg = vec![0.0; hp + mp];
            for (j, y) in ys.iter().enumerate() {
                let adj = plan_weighted_rows(pi, &inc.d, j, b);
                family.h_backward(y, &adj, &mut pg[..hp], None).map_err(step)?;
            }
            let d_adj: Vec<Vec<f64>> = (0..rows).map(|i| plan_weighted_cols(pi, &hv, i, b)).collect();
            let mut m_adj = inc.adjoint(&family, &d_adj, &row_w);
            if cfg.xi != 0.0 {
                for (row, pgr) in m_adj.iter_mut().zip(&pen_grad) {
                    for (a, g) in row.iter_mut().zip(pgr) {
                        *a += cfg.xi * g;
                    }
                }
            }
            for (x, adj) in mu_b.support().paths().zip(&m_adj) {
                family.m_backward(x, adj, &mut pg[hp..]).map_err(step)?;
            }
            let mut params = family.params();
            let (ph, pm) = params.split_at_mut(hp);
            h_opt.step(ph, &pg[..hp], k);
            m_opt.step(pm, &pg[hp..], k);
            family.set_params(&params).map_err(step)?;
            family.clamp();
        }
        lambda = lam[0].max(0.0);

        // Ascent on the generator against the updated (λ, γ′).
        let inc = Increments::new(&family, &mu_b, cfg.compensate_increments).map_err(step)?;
        let mut gen_grad = vec![0.0; gen.residual.param_count()];
        for j in 0..b {
            let y = &ys[j];
            let mut gy = objective_grad(f, shape, y).map_err(step)?;
            for v in gy.iter_mut() {
                *v *= col_w[j];
            }
            let mut gc = vec![0.0; y.len()];
            for (i, x) in mu_b.support().paths().enumerate() {
                let p = pi[i * b + j];
                if p > 0.0 {
                    cost_grad_y(cost, shape, x, y, p, &mut gc).map_err(step)?;
                }
            }
            for (a, c) in gy.iter_mut().zip(&gc) {
                *a -= lambda * c;
            }
            if !family.is_empty() {
                let adj = plan_weighted_rows(pi, &inc.d, j, b);
                let mut scratch = vec![0.0; hp];
                family.h_backward(y, &adj, &mut scratch, Some(&mut gy)).map_err(step)?;
            }
            // Ascent: the optimizer minimizes, so feed the negated gradient.
            let adj: Vec<f64> = gy
                .iter()
                .zip(&masks[j])
                .map(|(g, &free)| if free { -g } else { 0.0 })
                .collect();
            let fb = gen.residual.forward_backward(&inputs[j], &adj).map_err(step)?;
            for (a, d) in gen_grad.iter_mut().zip(&fb.param_grad) {
                *a += d;
            }
        }
        let mut p = gen.residual.params();
        g_opt.step(&mut p, &gen_grad, k);
        gen.residual.set_params(&p).map_err(step)?;
        gen.residual.apply_clamp();

        last_nu = Some(ys);
    }

    let ys = last_nu.unwrap_or_default();
    let worst = DiscreteMeasure::uniform(PathBatch::from_paths(shape, bounds, &ys)?);
    Ok(ScotOutcome {
        report: traj.finish(eps, cfg, worst),
        generator: gen,
        family,
    })
}

/// Draws reference batches: without replacement when the measure is uniform
/// and large enough, otherwise i.i.d. by weight.
struct BatchSampler<'a> {
    mu: &'a DiscreteMeasure,
    batch: usize,
    weighted: Option<WeightedIndex<f64>>,
}

impl<'a> BatchSampler<'a> {
    fn new(mu: &'a DiscreteMeasure, batch: usize) -> Result<Self> {
        let w = mu.weights();
        let uniform = w.iter().all(|v| (v - w[0]).abs() <= 1e-12);
        let weighted = if uniform && batch <= mu.len() {
            None
        } else {
            Some(WeightedIndex::new(w).map_err(|e| Error::Measure(e.to_string()))?)
        };
        Ok(BatchSampler { mu, batch, weighted })
    }

    fn draw(&self, rng: &mut ChaCha8Rng) -> Result<PathBatch> {
        let idx: Vec<usize> = match &self.weighted {
            Some(wi) => (0..self.batch).map(|_| wi.sample(rng)).collect(),
            None => rand::seq::index::sample(rng, self.mu.len(), self.batch).into_vec(),
        };
        self.mu.support().select(&idx)
    }
}

fn h_table(fam: &TestFunctionFamily, ys: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    if fam.is_empty() {
        return Ok(Vec::new());
    }
    ys.iter().map(|y| fam.h_values(y)).collect()
}

/// `Σ_i π_ij d_i` for column `j`.
fn plan_weighted_rows(pi: &[f64], d: &[Vec<f64>], j: usize, cols: usize) -> Vec<f64> {
    let mut out = vec![0.0; d.first().map_or(0, Vec::len)];
    for (i, row) in d.iter().enumerate() {
        let p = pi[i * cols + j];
        if p != 0.0 {
            for (o, v) in out.iter_mut().zip(row) {
                *o += p * v;
            }
        }
    }
    out
}

/// `Σ_j π_ij h_j` for row `i`.
fn plan_weighted_cols(pi: &[f64], h: &[Vec<f64>], i: usize, cols: usize) -> Vec<f64> {
    let mut out = vec![0.0; h.first().map_or(0, Vec::len)];
    for (j, row) in h.iter().enumerate() {
        let p = pi[i * cols + j];
        if p != 0.0 {
            for (o, v) in out.iter_mut().zip(row) {
                *o += p * v;
            }
        }
    }
    out
}

fn objective_grad(f: &ObjectiveSpec, shape: Shape, y: &[f64]) -> Result<Vec<f64>> {
    let mut g = Graph::new();
    let yv = g.inputs(y);
    let out = f.eval_graph(&mut g, shape, &yv)?;
    Ok(g.backward(out).wrt_all(&yv))
}

/// Accumulate `weight * ∇_y c(x, y)` into `out`.
fn cost_grad_y(cost: &CostSpec, shape: Shape, x: &[f64], y: &[f64], weight: f64, out: &mut [f64]) -> Result<()> {
    if let CostSpec::ScaledQuadratic { scale } = cost {
        for ((o, a), b) in out.iter_mut().zip(y).zip(x) {
            *o += weight * 2.0 * (a - b) / scale;
        }
        return Ok(());
    }
    let mut g = Graph::new();
    let yv = g.inputs(y);
    let c = cost.eval_graph(&mut g, shape, x, &yv)?;
    for (o, d) in out.iter_mut().zip(g.backward(c).wrt_all(&yv)) {
        *o += weight * d;
    }
    Ok(())
}

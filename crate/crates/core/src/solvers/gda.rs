//! Gradient descent-ascent on the penalized causal dual
//! `λε + Σ_n w_n sup_y [f(y) − λc(x_n, y) + γ′(x_n, y)] + ξ p(M)`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::config::GdaConfig;
use super::report::{SolverReport, Trajectory};
use crate::error::{Error, Result};
use crate::measures::{CostSpec, DiscreteMeasure, ObjectiveSpec, PathBatch, Shape};
use crate::nnet::{
    compensated_increments, compensated_increments_adjoint, penalty_from_values, Graph, Optimizer, TestFunctionFamily,
};

/// Iterate of the dual solver.
#[derive(Debug, Clone, PartialEq)]
pub struct DualState {
    pub lambda: f64,
    pub family: TestFunctionFamily,
    /// One candidate worst path per atom of the reference measure.
    pub y: Vec<Vec<f64>>,
    /// Use group-centered increments in `γ′` instead of raw ones.
    pub compensate: bool,
    pub iteration: usize,
}

impl DualState {
    /// Candidates start at the atoms themselves.
    pub fn new(mu: &DiscreteMeasure, lambda: f64, family: TestFunctionFamily, compensate: bool) -> Self {
        DualState {
            lambda,
            family,
            y: mu.support().paths().map(<[f64]>::to_vec).collect(),
            compensate,
            iteration: 0,
        }
    }

    /// Perturb every candidate by `N(0, variance)` noise and project.
    pub fn perturb<R: Rng + ?Sized>(&mut self, mu: &DiscreteMeasure, variance: f64, rng: &mut R) {
        let sd = variance.sqrt();
        let bounds = mu.bounds();
        for y in &mut self.y {
            for v in y.iter_mut() {
                let z: f64 = StandardNormal.sample(rng);
                *v = bounds.project(*v + sd * z);
            }
        }
    }
}

/// `M` values and the increments entering `γ′`, one row per atom.
pub(crate) struct Increments {
    pub m: Vec<Vec<f64>>,
    pub d: Vec<Vec<f64>>,
    groups: Vec<Vec<Vec<usize>>>,
    compensate: bool,
}

impl Increments {
    pub fn new(fam: &TestFunctionFamily, mu: &DiscreteMeasure, compensate: bool) -> Result<Self> {
        let steps = fam.shape().steps;
        let m: Vec<Vec<f64>> = if fam.is_empty() {
            vec![Vec::new(); mu.len()]
        } else {
            mu.support().paths().map(|x| fam.m_values(x)).collect::<Result<_>>()?
        };
        let groups: Vec<_> = if compensate && !fam.is_empty() {
            (1..steps).map(|t| mu.prefix_groups(t)).collect()
        } else {
            Vec::new()
        };
        let d = if fam.is_empty() {
            vec![Vec::new(); mu.len()]
        } else if compensate {
            compensated_increments(&m, mu.weights(), &groups, fam.layers(), steps)
        } else {
            m.iter().map(|row| fam.increments(row)).collect()
        };
        Ok(Increments {
            m,
            d,
            groups,
            compensate,
        })
    }

    /// Map adjoints on `d` back to adjoints on `m`.
    pub fn adjoint(&self, fam: &TestFunctionFamily, d_adj: &[Vec<f64>], weights: &[f64]) -> Vec<Vec<f64>> {
        let (layers, steps) = (fam.layers(), fam.shape().steps);
        if self.compensate {
            return compensated_increments_adjoint(d_adj, weights, &self.groups, layers, steps);
        }
        d_adj
            .iter()
            .map(|a| {
                let mut out = vec![0.0; layers * steps];
                for l in 0..layers {
                    for s in 0..steps - 1 {
                        let v = a[l * (steps - 1) + s];
                        out[l * steps + s + 1] += v;
                        out[l * steps + s] -= v;
                    }
                }
                out
            })
            .collect()
    }
}

/// Inner objective `f(y) − λc(x, y) + H(y)·d` for one atom.
pub(crate) struct Inner<'a> {
    pub f: &'a ObjectiveSpec,
    pub cost: &'a CostSpec,
    pub fam: &'a TestFunctionFamily,
    pub shape: Shape,
    pub lambda: f64,
}

impl Inner<'_> {
    pub fn value(&self, x: &[f64], d: &[f64], y: &[f64]) -> Result<f64> {
        let mut v = self.f.eval(self.shape, y)? - self.lambda * self.cost.eval(self.shape, x, y)?;
        if !self.fam.is_empty() {
            v += dot(&self.fam.h_values(y)?, d);
        }
        Ok(v)
    }

    pub fn value_grad(&self, x: &[f64], d: &[f64], y: &[f64]) -> Result<(f64, Vec<f64>)> {
        let mut g = Graph::with_capacity(8 * y.len() + 16);
        let yv = g.inputs(y);
        let fv = self.f.eval_graph(&mut g, self.shape, &yv)?;
        let cv = self.cost.eval_graph(&mut g, self.shape, x, &yv)?;
        let cv = g.scale(cv, self.lambda);
        let out = g.sub(fv, cv);
        let mut value = g.value(out);
        let mut grad = g.backward(out).wrt_all(&yv);
        if !self.fam.is_empty() {
            value += dot(&self.fam.h_values(y)?, d);
            let mut scratch = vec![0.0; self.fam.h_param_count()];
            self.fam.h_backward(y, d, &mut scratch, Some(&mut grad))?;
        }
        Ok((value, grad))
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Penalized dual at the state's current candidates.
pub fn dual_objective_cot(
    state: &DualState,
    mu: &DiscreteMeasure,
    f: &ObjectiveSpec,
    cost: &CostSpec,
    eps: f64,
    xi: f64,
    eta: f64,
) -> Result<f64> {
    if state.y.len() != mu.len() {
        return Err(Error::Dimension(format!(
            "{} candidates for {} atoms",
            state.y.len(),
            mu.len()
        )));
    }
    if !(eta > 0.0) {
        return Err(Error::Parameter(format!("eta must be positive, got {eta}")));
    }
    let inc = Increments::new(&state.family, mu, state.compensate)?;
    let inner = Inner {
        f,
        cost,
        fam: &state.family,
        shape: mu.shape(),
        lambda: state.lambda,
    };
    let mut v = state.lambda * eps;
    for (n, (x, w)) in mu.atoms().enumerate() {
        v += w * inner.value(x, &inc.d[n], &state.y[n])?;
    }
    if !state.family.is_empty() && xi != 0.0 {
        let fam = &state.family;
        v += xi * penalty_from_values(&inc.m, mu.weights(), fam.layers(), fam.shape().steps, eta).0;
    }
    Ok(v)
}

pub fn solve_dual_cot_gda(
    mu: &DiscreteMeasure,
    f: &ObjectiveSpec,
    cost: &CostSpec,
    eps: f64,
    cfg: &GdaConfig,
) -> Result<SolverReport> {
    cfg.validate()?;
    check_problem(mu, f, cost, eps)?;
    let shape = mu.shape();
    if let Some(grid) = &cfg.y_grid {
        if grid.shape() != shape || grid.is_empty() {
            return Err(Error::Dimension("y_grid does not match the path shape".into()));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let family = if cfg.layers == 0 {
        TestFunctionFamily::empty(shape)
    } else {
        TestFunctionFamily::new(shape, cfg.layers, cfg.hidden, cfg.h_clamp, cfg.m_clamp, &mut rng)?
    };
    let mut state = DualState::new(mu, cfg.lambda0, family, cfg.compensate_increments);
    state.perturb(mu, cfg.y_init_variance, &mut rng);

    let hp = state.family.h_param_count();
    let mp = state.family.param_count() - hp;
    let mut lambda_opt = Optimizer::new(cfg.lambda_optimizer, 1);
    let mut h_opt = Optimizer::new(cfg.h_optimizer, hp);
    let mut m_opt = Optimizer::new(cfg.m_optimizer, mp);
    let mut y_opts: Vec<Optimizer> = (0..mu.len())
        .map(|_| Optimizer::new(cfg.y_optimizer, shape.len()))
        .collect();
    let grid_f: Option<Vec<f64>> = match &cfg.y_grid {
        Some(grid) => Some(grid.paths().map(|y| f.eval(shape, y)).collect::<Result<_>>()?),
        None => None,
    };
    let grid_c: Option<Vec<f64>> = match &cfg.y_grid {
        Some(grid) => Some(crate::measures::cost_matrix(cost, mu.support(), grid)?),
        None => None,
    };

    let w = mu.weights();
    let mut traj = Trajectory::default();
    for k in 0..cfg.iterations {
        let step = |e: Error| e.at_iteration(k);
        let inc = Increments::new(&state.family, mu, state.compensate).map_err(step)?;
        let inner = Inner {
            f,
            cost,
            fam: &state.family,
            shape,
            lambda: state.lambda,
        };

        // Ascent on the candidates.
        let mut phi = vec![0.0; mu.len()];
        if let (Some(grid), Some(fv), Some(cm)) = (&cfg.y_grid, &grid_f, &grid_c) {
            let hv: Vec<Vec<f64>> = if state.family.is_empty() {
                Vec::new()
            } else {
                grid.paths()
                    .map(|y| state.family.h_values(y))
                    .collect::<Result<_>>()
                    .map_err(step)?
            };
            for n in 0..mu.len() {
                let mut best = (f64::NEG_INFINITY, 0);
                for j in 0..grid.len() {
                    let mut v = fv[j] - state.lambda * cm[n * grid.len() + j];
                    if !hv.is_empty() {
                        v += dot(&hv[j], &inc.d[n]);
                    }
                    if v > best.0 {
                        best = (v, j);
                    }
                }
                phi[n] = best.0;
                state.y[n] = grid.path(best.1).to_vec();
            }
        } else {
            let bounds = mu.bounds();
            for (n, x) in mu.support().paths().enumerate() {
                let mut prev = inner.value(x, &inc.d[n], &state.y[n]).map_err(step)?;
                for _ in 0..cfg.inner_steps {
                    let (_, g) = inner.value_grad(x, &inc.d[n], &state.y[n]).map_err(step)?;
                    let neg: Vec<f64> = g.iter().map(|v| -v).collect();
                    y_opts[n].step(&mut state.y[n], &neg, k);
                    for v in state.y[n].iter_mut() {
                        *v = bounds.project(*v);
                    }
                    let cur = inner.value(x, &inc.d[n], &state.y[n]).map_err(step)?;
                    let change = (cur - prev).abs() / prev.abs().max(1e-12);
                    prev = cur;
                    if change < cfg.inner_tol {
                        break;
                    }
                }
                phi[n] = prev;
            }
        }

        // Record.
        let transport: f64 = mu
            .support()
            .paths()
            .zip(&state.y)
            .zip(w)
            .map(|((x, y), wn)| cost.eval(shape, x, y).map(|c| wn * c))
            .sum::<Result<f64>>()
            .map_err(step)?;
        let dual = state.lambda * eps + dot(w, &phi);
        let (penalty, pen_grad) = if state.family.is_empty() {
            (0.0, Vec::new())
        } else {
            let fam = &state.family;
            penalty_from_values(&inc.m, w, fam.layers(), shape.steps, cfg.eta)
        };
        if !dual.is_finite() || dual.abs() > cfg.divergence_limit {
            return Err(Error::Divergence {
                iteration: k,
                value: dual,
            });
        }
        traj.push(dual, state.lambda, transport, penalty);

        // Descent on λ and the test functions.
        let mut lam = [state.lambda];
        lambda_opt.step(&mut lam, &[eps - transport], k);
        if !state.family.is_empty() {
            let fam = &state.family;
            let mut pg = vec![0.0; hp + mp];
            let mut d_adj = Vec::with_capacity(mu.len());
            for (n, y) in state.y.iter().enumerate() {
                let adj: Vec<f64> = inc.d[n].iter().map(|v| w[n] * v).collect();
                fam.h_backward(y, &adj, &mut pg[..hp], None).map_err(step)?;
                d_adj.push(
                    fam.h_values(y)
                        .map_err(step)?
                        .iter()
                        .map(|v| w[n] * v)
                        .collect::<Vec<_>>(),
                );
            }
            let mut m_adj = inc.adjoint(fam, &d_adj, w);
            if cfg.xi != 0.0 {
                for (row, pgr) in m_adj.iter_mut().zip(&pen_grad) {
                    for (a, b) in row.iter_mut().zip(pgr) {
                        *a += cfg.xi * b;
                    }
                }
            }
            for (x, adj) in mu.support().paths().zip(&m_adj) {
                fam.m_backward(x, adj, &mut pg[hp..]).map_err(step)?;
            }
            let mut params = fam.params();
            let (ph, pm) = params.split_at_mut(hp);
            h_opt.step(ph, &pg[..hp], k);
            m_opt.step(pm, &pg[hp..], k);
            state.family.set_params(&params).map_err(step)?;
            state.family.clamp();
        }
        state.lambda = lam[0].max(0.0);
        state.iteration = k + 1;
    }

    let worst = DiscreteMeasure::new(PathBatch::from_paths(shape, mu.bounds(), &state.y)?, w.to_vec())?;
    Ok(traj.finish(eps, cfg, worst))
}

pub(crate) fn check_problem(mu: &DiscreteMeasure, f: &ObjectiveSpec, cost: &CostSpec, eps: f64) -> Result<()> {
    if !(eps >= 0.0 && eps.is_finite()) {
        return Err(Error::Parameter(format!("radius must be nonnegative, got {eps}")));
    }
    if mu.is_empty() {
        return Err(Error::Measure("empty reference measure".into()));
    }
    f.validate(mu.shape())?;
    cost.validate(mu.shape())?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::Bounds;

    fn example1() -> (DiscreteMeasure, PathBatch, ObjectiveSpec, CostSpec) {
        let shape = Shape::new(2, 1).unwrap();
        let b = Bounds::new(-1.0, 1.0).unwrap();
        let sup = PathBatch::from_paths(shape, b, &[[-1.0, 1.0], [-1.0, -1.0]]).unwrap();
        let mu = DiscreteMeasure::new(sup, vec![0.2, 0.8]).unwrap();
        let grid = PathBatch::from_paths(shape, b, &[[-1.0, -1.0], [-1.0, 1.0], [1.0, -1.0], [1.0, 1.0]]).unwrap();
        let f = ObjectiveSpec::Coordinate { t: 1, k: 1 };
        let c = CostSpec::IndicatorFeature { t_x: 2, t_y: 1 };
        (mu, grid, f, c)
    }

    #[test]
    fn zero_test_functions_at_atoms() {
        let (mu, _, f, c) = example1();
        let st = DualState::new(&mu, 3.0, TestFunctionFamily::empty(mu.shape()), true);
        let v = dual_objective_cot(&st, &mu, &f, &CostSpec::L1, 0.5, 100.0, 1e-6).unwrap();
        // E f = -1
        assert!((v - (3.0 * 0.5 - 1.0)).abs() < 1e-15);
        let _ = c;
    }

    #[test]
    fn piecewise_dual_of_first_example() {
        let (mu, grid, f, c) = example1();
        for &lambda in &[0.0, 0.5, 1.0, 2.0, 3.5] {
            let mut st = DualState::new(&mu, lambda, TestFunctionFamily::empty(mu.shape()), true);
            for n in 0..2 {
                let x = mu.support().path(n);
                let best = grid
                    .paths()
                    .max_by(|a, b| {
                        let va = f.eval(mu.shape(), a).unwrap() - lambda * c.eval(mu.shape(), x, a).unwrap();
                        let vb = f.eval(mu.shape(), b).unwrap() - lambda * c.eval(mu.shape(), x, b).unwrap();
                        va.total_cmp(&vb)
                    })
                    .unwrap();
                st.y[n] = best.to_vec();
            }
            let v = dual_objective_cot(&st, &mu, &f, &c, 0.2, 0.0, 1e-6).unwrap();
            let expected = 0.2 * lambda + 0.2 + 0.8 * (-1.0f64).max(1.0 - lambda);
            assert!((v - expected).abs() < 1e-12, "{lambda}: {v} vs {expected}");
        }
    }

    #[test]
    fn lambda_decouples_at_zero() {
        let (mu, grid, f, c) = example1();
        let mut st = DualState::new(&mu, 0.0, TestFunctionFamily::empty(mu.shape()), true);
        st.y = vec![grid.path(3).to_vec(); 2];
        for eps in [0.0, 0.3, 5.0] {
            assert_eq!(dual_objective_cot(&st, &mu, &f, &c, eps, 0.0, 1e-6).unwrap(), 1.0);
        }
    }

    #[test]
    fn candidates_must_match_atoms() {
        let (mu, _, f, c) = example1();
        let mut st = DualState::new(&mu, 0.0, TestFunctionFamily::empty(mu.shape()), true);
        st.y.pop();
        assert!(dual_objective_cot(&st, &mu, &f, &c, 0.1, 0.0, 1e-6).is_err());
    }

    #[test]
    fn ot_mode_tracks_the_grid_dual() {
        let (mu, grid, f, c) = example1();
        let cfg = GdaConfig {
            iterations: 2000,
            y_grid: Some(grid),
            ..GdaConfig::volatility().ot_mode()
        };
        let r = solve_dual_cot_gda(&mu, &f, &c, 0.2, &cfg).unwrap();
        assert!((r.final_dual + 0.2).abs() < 0.05, "{}", r.final_dual);
        assert!(r.lambda.iter().all(|&l| l >= 0.0));
    }

    #[test]
    fn large_radius_releases_multiplier() {
        let (mu, grid, f, c) = example1();
        let cfg = GdaConfig {
            iterations: 1000,
            y_grid: Some(grid),
            ..GdaConfig::volatility().ot_mode()
        };
        let r = solve_dual_cot_gda(&mu, &f, &c, 5.0, &cfg).unwrap();
        assert!(r.final_lambda <= 1e-2, "{}", r.final_lambda);
        assert!((r.final_dual - 1.0).abs() < 0.05, "{}", r.final_dual);
        assert!(r.converged);
    }

    #[test]
    fn gradient_inner_loop_stays_in_bounds() {
        let shape = Shape::new(3, 1).unwrap();
        let b = Bounds::new(0.0, 2.0).unwrap();
        let sup = PathBatch::from_paths(shape, b, &[[1.0, 1.1, 0.9], [0.5, 0.7, 0.6], [1.5, 1.2, 1.3]]).unwrap();
        let mu = DiscreteMeasure::uniform(sup);
        let f = ObjectiveSpec::default_linear_relu(shape);
        let c = CostSpec::ScaledQuadratic { scale: 1.0 };
        let cfg = GdaConfig {
            iterations: 200,
            lambda0: 1.0,
            ..GdaConfig::volatility()
        };
        let r = solve_dual_cot_gda(&mu, &f, &c, 0.1, &cfg).unwrap();
        assert_eq!(r.dual.len(), 200);
        for (y, _) in r.worst_case.atoms() {
            assert!(y.iter().all(|v| (0.0..=2.0).contains(v)));
        }
    }

    #[test]
    fn same_seed_same_report() {
        let (mu, grid, f, c) = example1();
        let cfg = GdaConfig {
            iterations: 100,
            y_grid: Some(grid),
            seed: 4,
            ..GdaConfig::volatility()
        };
        let a = solve_dual_cot_gda(&mu, &f, &c, 0.2, &cfg).unwrap();
        let b = solve_dual_cot_gda(&mu, &f, &c, 0.2, &cfg).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    }
}

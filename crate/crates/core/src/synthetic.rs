//! Built-in problem instances and synthetic data.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measures::{Bounds, CostSpec, DiscreteMeasure, ObjectiveSpec, PathBatch, Shape};

/// A finite worst-case problem: reference measure, candidate grid for `y`,
/// objective, cost and radius.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Problem {
    pub mu: DiscreteMeasure,
    pub grid: PathBatch,
    pub objective: ObjectiveSpec,
    pub cost: CostSpec,
    pub eps: f64,
}

fn square_grid(values: &[f64], shape: Shape, bounds: Bounds) -> Result<PathBatch> {
    let n = shape.len();
    let total = values.len().pow(n as u32);
    let mut data = Vec::with_capacity(total * n);
    for mut code in 0..total {
        let mut path = vec![0.0; n];
        for slot in path.iter_mut().rev() {
            *slot = values[code % values.len()];
            code /= values.len();
        }
        data.extend(path);
    }
    PathBatch::new(shape, bounds, data)
}

fn two_step() -> (Shape, Bounds, DiscreteMeasure, PathBatch) {
    let shape = Shape { steps: 2, dims: 1 };
    let bounds = Bounds { low: -1.0, high: 1.0 };
    let support = PathBatch::from_paths(shape, bounds, &[[-1.0, 1.0], [-1.0, -1.0]]).expect("static data");
    let mu = DiscreteMeasure::new(support, vec![0.2, 0.8]).expect("static data");
    let grid = square_grid(&[-1.0, 1.0], shape, bounds).expect("static data");
    (shape, bounds, mu, grid)
}

/// Two-step reference `0.2 δ(−1,1) + 0.8 δ(−1,−1)`, cost `1{x_2 ≠ y_1}`,
/// objective `y_1`, radius 0.2, grid `{−1, 1}²`.
pub fn example1() -> Problem {
    let (_, _, mu, grid) = two_step();
    Problem {
        mu,
        grid,
        objective: ObjectiveSpec::Coordinate { t: 1, k: 1 },
        cost: CostSpec::IndicatorFeature { t_x: 2, t_y: 1 },
        eps: 0.2,
    }
}

/// Same setting with the finite stand-in `f = K·1{y_1 = 1}`.
pub fn example2(k: f64) -> Result<Problem> {
    if !(k.is_finite() && k > 0.0) {
        return Err(Error::Parameter(format!("K must be positive and finite, got {k}")));
    }
    let (_, _, mu, grid) = two_step();
    let points: Vec<Vec<f64>> = grid.paths().map(<[f64]>::to_vec).collect();
    let values = points.iter().map(|p| if p[0] == 1.0 { k } else { 0.0 }).collect();
    Ok(Problem {
        mu,
        grid,
        objective: ObjectiveSpec::Table { points, values },
        cost: CostSpec::IndicatorFeature { t_x: 2, t_y: 1 },
        eps: 0.2,
    })
}

/// Log-volatility AR(1): `log v_t = φ log v_{t−1} + σ ε_t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Ar1VolParams {
    pub phi: f64,
    pub sigma: f64,
    /// Upper end of the path domain; the lower end is 0.
    pub high: f64,
}

impl Default for Ar1VolParams {
    fn default() -> Self {
        Ar1VolParams {
            phi: 0.9,
            sigma: 0.2,
            high: 5.0,
        }
    }
}

/// `n` positive paths of length `steps`, started from the stationary law
/// and projected into `(0, high]`.
pub fn ar1_vol(n: usize, steps: usize, params: &Ar1VolParams, seed: u64) -> Result<PathBatch> {
    if n == 0 {
        return Err(Error::Parameter("n must be positive".into()));
    }
    if !(params.phi.abs() < 1.0) || !(params.sigma > 0.0) || !(params.high > 0.0) {
        return Err(Error::Parameter(format!("invalid AR(1) parameters {params:?}")));
    }
    let shape = Shape::new(steps, 1)?;
    let bounds = Bounds::new(0.0, params.high)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shock = Normal::new(0.0, params.sigma).map_err(|e| Error::Parameter(e.to_string()))?;
    let stationary = Normal::new(0.0, params.sigma / (1.0 - params.phi * params.phi).sqrt())
        .map_err(|e| Error::Parameter(e.to_string()))?;
    let mut data = Vec::with_capacity(n * steps);
    for _ in 0..n {
        let mut lv: f64 = stationary.sample(&mut rng);
        for t in 0..steps {
            if t > 0 {
                lv = params.phi * lv + shock.sample(&mut rng);
            }
            data.push(lv.exp().min(params.high));
        }
    }
    PathBatch::new(shape, bounds, data)
}

/// Random finite instance on `[-1, 1]` paths (`d = 1`) with values in
/// `{−1, 0, 1}`. With `separable`, `f(y) = Σ_t f_t(y_t)` and the cost is
/// `Σ_t |x_t − y_t|`; otherwise `f` has arbitrary values on the grid and the
/// cost is picked at random.
pub fn random_instance(atoms: usize, steps: usize, separable: bool, seed: u64) -> Result<Problem> {
    if atoms == 0 {
        return Err(Error::Parameter("atoms must be positive".into()));
    }
    let shape = Shape::new(steps, 1)?;
    let bounds = Bounds::new(-1.0, 1.0)?;
    let levels = [-1.0, 0.0, 1.0];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let paths: Vec<Vec<f64>> = (0..atoms)
        .map(|_| (0..steps).map(|_| levels[rng.random_range(0..3)]).collect())
        .collect();
    let masses: Vec<f64> = (0..atoms).map(|_| rng.random_range(0.1..1.0)).collect();
    let mu = DiscreteMeasure::from_masses(PathBatch::from_paths(shape, bounds, &paths)?, masses)?;
    let grid = square_grid(&levels, shape, bounds)?;
    let points: Vec<Vec<f64>> = grid.paths().map(<[f64]>::to_vec).collect();
    let (values, cost) = if separable {
        let ft: Vec<[f64; 3]> = (0..steps)
            .map(|_| {
                [
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-1.0..1.0),
                ]
            })
            .collect();
        let values = points
            .iter()
            .map(|p| {
                p.iter()
                    .enumerate()
                    .map(|(t, v)| ft[t][(*v + 1.0).round() as usize])
                    .sum()
            })
            .collect();
        (values, CostSpec::L1)
    } else {
        let values = points.iter().map(|_| rng.random_range(-1.0..1.0)).collect();
        let cost = if rng.random::<bool>() {
            CostSpec::L1
        } else {
            CostSpec::ScaledQuadratic { scale: 1.0 }
        };
        (values, cost)
    };
    Ok(Problem {
        mu,
        grid,
        objective: ObjectiveSpec::Table { points, values },
        cost,
        eps: rng.random_range(0.05..1.5),
    })
}

pub fn separable_random(atoms: usize, steps: usize, seed: u64) -> Result<Problem> {
    random_instance(atoms, steps, true, seed)
}

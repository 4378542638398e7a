use crate::error::{Error, Result};
use crate::measures::{cost_matrix, CostSpec, DiscreteMeasure, ObjectiveSpec, PathBatch};

/// `min_λ λε + Σ_n w_n max_j [f(y_j) − λc(x_n, y_j)]` over a finite λ grid.
/// Returns the value and the smallest minimizing `λ`.
pub fn lambda_grid_dual(
    mu: &DiscreteMeasure,
    y_grid: &PathBatch,
    f: &ObjectiveSpec,
    cost: &CostSpec,
    eps: f64,
    lambda_grid: &[f64],
) -> Result<(f64, f64)> {
    if y_grid.is_empty() || lambda_grid.is_empty() {
        return Err(Error::Parameter("lambda and y grids must be nonempty".into()));
    }
    if let Some(&l) = lambda_grid.iter().find(|l| !(**l >= 0.0 && l.is_finite())) {
        return Err(Error::Parameter(format!(
            "lambda grid entry {l} is not a nonnegative number"
        )));
    }
    let shape = mu.shape();
    let fy: Vec<f64> = y_grid.paths().map(|y| f.eval(shape, y)).collect::<Result<_>>()?;
    let c = cost_matrix(cost, mu.support(), y_grid)?;
    let m = y_grid.len();
    let mut best = (f64::INFINITY, lambda_grid[0]);
    for &lambda in lambda_grid {
        let inner: f64 = mu
            .weights()
            .iter()
            .enumerate()
            .map(|(n, w)| {
                let sup = (0..m)
                    .map(|j| fy[j] - lambda * c[n * m + j])
                    .fold(f64::NEG_INFINITY, f64::max);
                w * sup
            })
            .sum();
        let v = lambda * eps + inner;
        if v < best.0 {
            best = (v, lambda);
        }
    }
    Ok(best)
}

/// `count` evenly spaced points on `[0, max]`.
pub fn linspace_lambda(max: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![0.0],
        _ => (0..count).map(|i| max * i as f64 / (count - 1) as f64).collect(),
    }
}

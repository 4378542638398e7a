use serde::{Deserialize, Serialize};

use super::Shape;
use crate::error::{Error, Result};
use crate::nnet::{Graph, Var};

/// Transport cost `c(x, y)` between two paths of the same shape.
///
/// Time indices are 1-based.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CostSpec {
    /// `(1/scale) Σ_t |x_t - y_t|²`.
    ScaledQuadratic { scale: f64 },
    /// `Σ |x - y|` over all coordinates.
    L1,
    /// Explicit pairwise costs between listed points; lookups are exact.
    Table {
        x_points: Vec<Vec<f64>>,
        y_points: Vec<Vec<f64>>,
        matrix: Vec<Vec<f64>>,
    },
    /// `1` iff `x_{t_x} != y_{t_y}` (any coordinate differs), else `0`.
    IndicatorFeature { t_x: usize, t_y: usize },
}

const LOOKUP_TOL: f64 = 1e-12;

pub(crate) fn find_point(points: &[Vec<f64>], p: &[f64]) -> Option<usize> {
    points
        .iter()
        .position(|q| q.len() == p.len() && q.iter().zip(p).all(|(a, b)| (a - b).abs() <= LOOKUP_TOL))
}

impl CostSpec {
    /// Check the spec against a path shape.
    pub fn validate(&self, shape: Shape) -> Result<()> {
        match self {
            CostSpec::ScaledQuadratic { scale } => {
                if !(scale.is_finite() && *scale > 0.0) {
                    return Err(Error::Parameter(format!("cost scale must be positive, got {scale}")));
                }
            }
            CostSpec::L1 => {}
            CostSpec::Table {
                x_points,
                y_points,
                matrix,
            } => {
                if matrix.len() != x_points.len() || matrix.iter().any(|r| r.len() != y_points.len()) {
                    return Err(Error::Dimension("cost table shape does not match its points".into()));
                }
                if x_points.iter().chain(y_points).any(|p| p.len() != shape.len()) {
                    return Err(Error::Dimension("cost table point has wrong length".into()));
                }
                if matrix.iter().flatten().any(|c| !(c.is_finite() && *c >= 0.0)) {
                    return Err(Error::Parameter("cost table entries must be finite and >= 0".into()));
                }
            }
            CostSpec::IndicatorFeature { t_x, t_y } => {
                for t in [t_x, t_y] {
                    if *t == 0 || *t > shape.steps {
                        return Err(Error::Dimension(format!("time index {t} outside 1..={}", shape.steps)));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn eval(&self, shape: Shape, x: &[f64], y: &[f64]) -> Result<f64> {
        if x.len() != shape.len() || y.len() != shape.len() {
            return Err(Error::Dimension(format!(
                "paths of length {} and {} for shape {}x{}",
                x.len(),
                y.len(),
                shape.steps,
                shape.dims
            )));
        }
        let v = match self {
            CostSpec::ScaledQuadratic { scale } => x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / scale,
            CostSpec::L1 => x.iter().zip(y).map(|(a, b)| (a - b).abs()).sum(),
            CostSpec::Table {
                x_points,
                y_points,
                matrix,
            } => {
                let i =
                    find_point(x_points, x).ok_or_else(|| Error::Dimension("source path not in cost table".into()))?;
                let j =
                    find_point(y_points, y).ok_or_else(|| Error::Dimension("target path not in cost table".into()))?;
                matrix[i][j]
            }
            CostSpec::IndicatorFeature { t_x, t_y } => {
                self.validate(shape)?;
                let d = shape.dims;
                let xs = &x[(t_x - 1) * d..t_x * d];
                let ys = &y[(t_y - 1) * d..t_y * d];
                if xs != ys {
                    1.0
                } else {
                    0.0
                }
            }
        };
        if !(v.is_finite() && v >= 0.0) {
            return Err(Error::Numeric(format!("cost evaluated to {v}")));
        }
        Ok(v)
    }

    /// Record `c(x, y)` on a graph with `y` differentiable. Piecewise-constant
    /// kinds enter as constants.
    pub fn eval_graph(&self, g: &mut Graph, shape: Shape, x: &[f64], y: &[Var]) -> Result<Var> {
        match self {
            CostSpec::ScaledQuadratic { scale } => {
                let terms: Vec<Var> = x
                    .iter()
                    .zip(y)
                    .map(|(&a, &b)| {
                        let d = g.add_const(b, -a);
                        g.square(d)
                    })
                    .collect();
                let s = g.sum(&terms);
                Ok(g.scale(s, 1.0 / scale))
            }
            CostSpec::L1 => {
                let terms: Vec<Var> = x
                    .iter()
                    .zip(y)
                    .map(|(&a, &b)| {
                        let d = g.add_const(b, -a);
                        g.abs(d)
                    })
                    .collect();
                Ok(g.sum(&terms))
            }
            CostSpec::Table { .. } | CostSpec::IndicatorFeature { .. } => {
                let yv = g.values(y);
                let c = self.eval(shape, x, &yv)?;
                Ok(g.constant(c))
            }
        }
    }

    /// True for kinds with `c(x, y) = c(y, x)` and `c(x, x) = 0`.
    pub fn is_metric_like(&self) -> bool {
        matches!(self, CostSpec::ScaledQuadratic { .. } | CostSpec::L1)
    }
}

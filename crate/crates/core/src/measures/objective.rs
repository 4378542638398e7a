use serde::{Deserialize, Serialize};

use super::cost::find_point;
use super::Shape;
use crate::error::{Error, Result};
use crate::nnet::{DenseNet, Graph, Var};

/// Path functional `f(y)` whose worst-case expectation is evaluated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ObjectiveSpec {
    /// `max(Σ a_i y_i + b, 0)` with one weight per path coordinate.
    LinearRelu { weights: Vec<f64>, intercept: f64 },
    /// `y_{t,k}` with 1-based indices.
    Coordinate { t: usize, k: usize },
    /// Values on listed points; lookups are exact.
    Table { points: Vec<Vec<f64>>, values: Vec<f64> },
    /// A fixed network with scalar output.
    Network { net: DenseNet },
}

impl ObjectiveSpec {
    /// Equal weights `1/T` on every coordinate and zero intercept.
    pub fn default_linear_relu(shape: Shape) -> Self {
        ObjectiveSpec::LinearRelu {
            weights: vec![1.0 / shape.steps as f64; shape.len()],
            intercept: 0.0,
        }
    }

    pub fn validate(&self, shape: Shape) -> Result<()> {
        match self {
            ObjectiveSpec::LinearRelu { weights, intercept } => {
                if weights.len() != shape.len() {
                    return Err(Error::Dimension(format!(
                        "{} weights for paths of length {}",
                        weights.len(),
                        shape.len()
                    )));
                }
                if weights.iter().chain([intercept]).any(|w| !w.is_finite()) {
                    return Err(Error::Numeric("non-finite objective weight".into()));
                }
            }
            ObjectiveSpec::Coordinate { t, k } => {
                if *t == 0 || *t > shape.steps || *k == 0 || *k > shape.dims {
                    return Err(Error::Dimension(format!(
                        "coordinate ({t}, {k}) outside {}x{}",
                        shape.steps, shape.dims
                    )));
                }
            }
            ObjectiveSpec::Table { points, values } => {
                if points.len() != values.len() || points.iter().any(|p| p.len() != shape.len()) {
                    return Err(Error::Dimension("objective table shape mismatch".into()));
                }
                if values.iter().any(|v| !v.is_finite()) {
                    return Err(Error::Numeric("non-finite objective table value".into()));
                }
            }
            ObjectiveSpec::Network { net } => {
                if net.input_dim() != shape.len() || net.output_dim() != 1 {
                    return Err(Error::Dimension(format!(
                        "objective network maps {} -> {}, need {} -> 1",
                        net.input_dim(),
                        net.output_dim(),
                        shape.len()
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn eval(&self, shape: Shape, y: &[f64]) -> Result<f64> {
        if y.len() != shape.len() {
            return Err(Error::Dimension(format!(
                "path of length {} for shape {}x{}",
                y.len(),
                shape.steps,
                shape.dims
            )));
        }
        self.validate(shape)?;
        let v = match self {
            ObjectiveSpec::LinearRelu { weights, intercept } => {
                (weights.iter().zip(y).map(|(a, v)| a * v).sum::<f64>() + intercept).max(0.0)
            }
            ObjectiveSpec::Coordinate { t, k } => y[shape.index(*t, *k)],
            ObjectiveSpec::Table { points, values } => {
                let i = find_point(points, y).ok_or_else(|| Error::Dimension("path not in objective table".into()))?;
                values[i]
            }
            ObjectiveSpec::Network { net } => net.forward_scalar(y)?,
        };
        if !v.is_finite() {
            return Err(Error::Numeric(format!("objective evaluated to {v}")));
        }
        Ok(v)
    }

    /// Record `f(y)` on a graph with `y` differentiable. Table values enter as
    /// constants; network parameters are frozen.
    pub fn eval_graph(&self, g: &mut Graph, shape: Shape, y: &[Var]) -> Result<Var> {
        match self {
            ObjectiveSpec::LinearRelu { weights, intercept } => {
                let s = g.weighted_sum(y, weights);
                let s = g.add_const(s, *intercept);
                Ok(g.relu(s))
            }
            ObjectiveSpec::Coordinate { t, k } => Ok(y[shape.index(*t, *k)]),
            ObjectiveSpec::Table { .. } => {
                let yv = g.values(y);
                let v = self.eval(shape, &yv)?;
                Ok(g.constant(v))
            }
            ObjectiveSpec::Network { net } => {
                let p: Vec<Var> = net.params().iter().map(|&w| g.constant(w)).collect();
                Ok(net.forward_graph(g, &p, y)[0])
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nnet::Activation;

    fn s(t: usize, d: usize) -> Shape {
        Shape::new(t, d).unwrap()
    }

    #[test]
    fn linear_relu_examples() {
        let f = ObjectiveSpec::LinearRelu {
            weights: vec![1.0, 1.0],
            intercept: 0.0,
        };
        assert_eq!(f.eval(s(2, 1), &[-2.0, 1.0]).unwrap(), 0.0);
        let f = ObjectiveSpec::LinearRelu {
            weights: vec![0.5, 0.5],
            intercept: 0.1,
        };
        assert!((f.eval(s(2, 1), &[1.0, 1.0]).unwrap() - 1.1).abs() < 1e-15);
    }

    #[test]
    fn coordinate_example() {
        let f = ObjectiveSpec::Coordinate { t: 1, k: 1 };
        assert_eq!(f.eval(s(2, 1), &[-1.0, -1.0]).unwrap(), -1.0);
        assert!(ObjectiveSpec::Coordinate { t: 3, k: 1 }
            .eval(s(2, 1), &[0.0, 0.0])
            .is_err());
    }

    #[test]
    fn default_weights_average_the_path() {
        let f = ObjectiveSpec::default_linear_relu(s(4, 1));
        assert!((f.eval(s(4, 1), &[1.0, 2.0, 3.0, 4.0]).unwrap() - 2.5).abs() < 1e-15);
    }

    #[test]
    fn shape_mismatch_is_dimension_error() {
        let f = ObjectiveSpec::default_linear_relu(s(2, 1));
        assert!(matches!(f.eval(s(2, 1), &[1.0]), Err(Error::Dimension(_))));
    }

    #[test]
    fn network_objective_graph_matches_forward() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let net = DenseNet::new(
            &[3, 5, 1],
            Activation::LeakyRelu { negative_slope: 0.01 },
            Activation::Identity,
            &mut rng,
        )
        .unwrap();
        let f = ObjectiveSpec::Network { net };
        let y = [0.3, -0.2, 0.9];
        let mut g = Graph::new();
        let yv = g.inputs(&y);
        let out = f.eval_graph(&mut g, s(3, 1), &yv).unwrap();
        assert!((g.value(out) - f.eval(s(3, 1), &y).unwrap()).abs() < 1e-14);
    }
}

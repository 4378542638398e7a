//! First-order update rules. Every rule minimizes; callers doing ascent pass
//! negated gradients.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum OptimizerKind {
    /// `v <- momentum * v - g / (scale * iter + offset)`, then `p <- p + v`.
    MomentumSchedule { momentum: f64, scale: f64, offset: f64 },
    /// Bias-corrected first/second moment updates.
    AdaptiveMoment {
        learning_rate: f64,
        beta1: f64,
        beta2: f64,
        epsilon: f64,
    },
    /// `p <- p - numerator / (iter + 1) * g`, with `g` optionally scaled to
    /// unit Euclidean norm first.
    PlainSgdSchedule { numerator: f64, normalize: bool },
}

impl OptimizerKind {
    /// Multiplier rule used for the volatility experiment.
    pub fn lambda_momentum() -> Self {
        OptimizerKind::MomentumSchedule {
            momentum: 0.9,
            scale: 0.1,
            offset: 10.0,
        }
    }

    pub fn adam(learning_rate: f64) -> Self {
        OptimizerKind::AdaptiveMoment {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Optimizer {
    kind: OptimizerKind,
    first: Vec<f64>,
    second: Vec<f64>,
    steps: i32,
}

impl Optimizer {
    pub fn new(kind: OptimizerKind, n_params: usize) -> Self {
        let second = match kind {
            OptimizerKind::AdaptiveMoment { .. } => vec![0.0; n_params],
            _ => Vec::new(),
        };
        Optimizer {
            kind,
            first: vec![0.0; n_params],
            second,
            steps: 0,
        }
    }

    pub fn kind(&self) -> OptimizerKind {
        self.kind
    }

    /// Momentum buffer (velocity or first moment).
    pub fn velocity(&self) -> &[f64] {
        &self.first
    }

    pub fn step(&mut self, params: &mut [f64], grads: &[f64], iter: usize) {
        assert_eq!(params.len(), grads.len());
        assert_eq!(params.len(), self.first.len());
        match self.kind {
            OptimizerKind::MomentumSchedule {
                momentum,
                scale,
                offset,
            } => {
                let rate = 1.0 / (scale * iter as f64 + offset);
                for ((p, v), g) in params.iter_mut().zip(&mut self.first).zip(grads) {
                    *v = momentum * *v - g * rate;
                    *p += *v;
                }
            }
            OptimizerKind::AdaptiveMoment {
                learning_rate,
                beta1,
                beta2,
                epsilon,
            } => {
                self.steps += 1;
                let c1 = 1.0 - beta1.powi(self.steps);
                let c2 = 1.0 - beta2.powi(self.steps);
                for i in 0..params.len() {
                    let g = grads[i];
                    self.first[i] = beta1 * self.first[i] + (1.0 - beta1) * g;
                    self.second[i] = beta2 * self.second[i] + (1.0 - beta2) * g * g;
                    let m = self.first[i] / c1;
                    let v = self.second[i] / c2;
                    params[i] -= learning_rate * m / (v.sqrt() + epsilon);
                }
            }
            OptimizerKind::PlainSgdSchedule { numerator, normalize } => {
                let mut rate = numerator / (iter as f64 + 1.0);
                if normalize {
                    let norm = grads.iter().map(|g| g * g).sum::<f64>().sqrt();
                    if norm == 0.0 {
                        return;
                    }
                    rate /= norm;
                }
                for (p, g) in params.iter_mut().zip(grads) {
                    *p -= rate * g;
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn momentum_first_step_is_tenth_of_gradient() {
        let mut opt = Optimizer::new(OptimizerKind::lambda_momentum(), 1);
        let mut lambda = [10.0];
        opt.step(&mut lambda, &[0.6], 0);
        assert!((opt.velocity()[0] + 0.06).abs() < 1e-15);
        assert!((lambda[0] - 9.94).abs() < 1e-12);
    }

    #[test]
    fn momentum_decays_to_fixed_point_under_zero_gradient() {
        let mut opt = Optimizer::new(OptimizerKind::lambda_momentum(), 1);
        let mut p = [1.0];
        opt.step(&mut p, &[1.0], 0);
        let mut prev = p[0];
        for it in 1..500 {
            opt.step(&mut p, &[0.0], it);
            assert!(p[0] <= prev);
            prev = p[0];
        }
        assert!(opt.velocity()[0].abs() < 1e-20);
        let fixed = p[0];
        opt.step(&mut p, &[0.0], 500);
        assert!((p[0] - fixed).abs() < 1e-20);
    }

    #[test]
    fn plain_schedule_step_sizes() {
        // ascent with step 50 at iter 0: pass negated gradient
        let mut opt = Optimizer::new(
            OptimizerKind::PlainSgdSchedule {
                numerator: 50.0,
                normalize: false,
            },
            1,
        );
        let mut y = [0.0];
        opt.step(&mut y, &[-1.0], 0);
        assert_eq!(y[0], 50.0);

        let mut opt = Optimizer::new(
            OptimizerKind::PlainSgdSchedule {
                numerator: 20.0,
                normalize: true,
            },
            2,
        );
        let mut y = [0.0, 0.0];
        opt.step(&mut y, &[-3.0, -4.0], 0);
        assert!((y[0] - 12.0).abs() < 1e-12 && (y[1] - 16.0).abs() < 1e-12);
    }

    #[test]
    fn adam_first_step_moves_by_learning_rate() {
        let mut opt = Optimizer::new(OptimizerKind::adam(0.05), 2);
        let mut p = [1.0, -1.0];
        opt.step(&mut p, &[3.0, -0.001], 0);
        assert!((p[0] - 0.95).abs() < 1e-6);
        assert!((p[1] + 0.95).abs() < 1e-4);
    }

    #[test]
    fn zero_gradient_keeps_parameters_fixed() {
        for kind in [
            OptimizerKind::lambda_momentum(),
            OptimizerKind::adam(0.1),
            OptimizerKind::PlainSgdSchedule {
                numerator: 50.0,
                normalize: true,
            },
        ] {
            let mut opt = Optimizer::new(kind, 3);
            let mut p = [0.5, -0.25, 2.0];
            for it in 0..10 {
                opt.step(&mut p, &[0.0; 3], it);
            }
            assert_eq!(p, [0.5, -0.25, 2.0]);
        }
    }
}

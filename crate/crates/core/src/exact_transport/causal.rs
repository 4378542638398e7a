use crate::measures::{DiscreteMeasure, PathBatch};

/// One linear equality `Σ coeff * pi_ij = 0` over row-major plan entries.
#[derive(Debug, Clone)]
pub struct CausalityConstraint {
    pub t: usize,
    pub coeffs: Vec<(usize, f64)>,
}

/// Discretized causality conditions of plans from `mu` to a fixed target
/// support.
///
/// For each `t < T`, each prefix group `G` of `mu` (atoms sharing `x_{1:t}`)
/// with positive mass, each full-path class `C ⊂ G` and each target prefix
/// `b` of `y_{1:t}`:
///
/// `pi(x ∈ C, y_{1:t} = b) = (μ(C) / μ(G)) · pi(x ∈ G, y_{1:t} = b)`.
#[derive(Debug, Clone)]
pub struct CausalityConstraintSet {
    pub rows: usize,
    pub cols: usize,
    pub constraints: Vec<CausalityConstraint>,
}

impl CausalityConstraintSet {
    pub fn new(mu: &DiscreteMeasure, nu_support: &PathBatch) -> Self {
        let (rows, cols) = (mu.len(), nu_support.len());
        let w = mu.weights();
        let mut constraints = Vec::new();
        for t in 1..mu.shape().steps {
            let y_groups = nu_support.prefix_groups(t);
            for g in mu.prefix_groups(t) {
                let wg: f64 = g.iter().map(|&i| w[i]).sum();
                if wg <= 0.0 {
                    continue;
                }
                let classes = sub_classes(mu, &g);
                if classes.len() < 2 {
                    continue;
                }
                for class in &classes {
                    let ratio = class.iter().map(|&i| w[i]).sum::<f64>() / wg;
                    for b in &y_groups {
                        let mut coeffs = Vec::with_capacity(g.len() * b.len());
                        for &i in &g {
                            let a = if class.contains(&i) { 1.0 - ratio } else { -ratio };
                            if a != 0.0 {
                                coeffs.extend(b.iter().map(|&j| (i * cols + j, a)));
                            }
                        }
                        constraints.push(CausalityConstraint { t, coeffs });
                    }
                }
            }
        }
        CausalityConstraintSet {
            rows,
            cols,
            constraints,
        }
    }

    pub fn len(&self) -> usize {
        self.constraints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.constraints.is_empty()
    }

    /// Largest absolute residual over all constraints.
    pub fn max_violation(&self, pi: &[f64]) -> f64 {
        self.constraints
            .iter()
            .map(|c| c.coeffs.iter().map(|&(k, a)| a * pi[k]).sum::<f64>().abs())
            .fold(0.0, f64::max)
    }
}

/// Split a prefix group into classes of identical full paths.
fn sub_classes(mu: &DiscreteMeasure, group: &[usize]) -> Vec<Vec<usize>> {
    let mut out: Vec<Vec<usize>> = Vec::new();
    for &i in group {
        let p = mu.support().path(i);
        match out.iter_mut().find(|c| mu.support().path(c[0]) == p) {
            Some(c) => c.push(i),
            None => out.push(vec![i]),
        }
    }
    out
}

//! Brute-force worst-case values by enumerating candidate measures on a small
//! grid. Each candidate is checked with its own distance program, so the
//! result is independent of the joint primal formulation.

use serde::Serialize;

use super::{cot_distance_lp, ot_distance_lp};
use crate::error::{Error, Result};
use crate::measures::{CostSpec, DiscreteMeasure, ObjectiveSpec, PathBatch};

pub const MAX_GRID_ATOMS: usize = 6;

#[derive(Debug, Clone, Serialize)]
pub struct BruteForceResult {
    pub value: f64,
    pub weights: Vec<f64>,
    pub candidates: usize,
}

/// Best `E_ν[f]` over `ν` on the grid with weights in `(1/resolution) ℕ`
/// and `W(mu, ν) <= eps` (or `W_c` when `causal`).
pub fn brute_force_primal(
    mu: &DiscreteMeasure,
    grid: &PathBatch,
    f: &ObjectiveSpec,
    cost: &CostSpec,
    eps: f64,
    resolution: u32,
    causal: bool,
) -> Result<BruteForceResult> {
    let m = grid.len();
    if m > MAX_GRID_ATOMS {
        return Err(Error::Parameter(format!(
            "brute force supports at most {MAX_GRID_ATOMS} grid atoms, got {m}"
        )));
    }
    if resolution == 0 {
        return Err(Error::Parameter("resolution must be positive".into()));
    }
    let shape = grid.shape();
    let fy: Vec<f64> = grid.paths().map(|y| f.eval(shape, y)).collect::<Result<_>>()?;
    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut candidates = 0;
    let mut counts = vec![0u32; m];
    let r = resolution as f64;
    compositions(resolution, &mut counts, 0, &mut |k| {
        candidates += 1;
        let w: Vec<f64> = k.iter().map(|&c| c as f64 / r).collect();
        let value: f64 = w.iter().zip(&fy).map(|(a, b)| a * b).sum();
        if best.as_ref().is_some_and(|(b, _)| value <= *b + 1e-12) {
            return Ok(());
        }
        let nu = DiscreteMeasure::from_masses(grid.clone(), w.clone())?;
        let d = if causal {
            cot_distance_lp(mu, &nu, cost)?
        } else {
            ot_distance_lp(mu, &nu, cost)?
        };
        if d.value <= eps + 1e-9 {
            best = Some((value, w));
        }
        Ok(())
    })?;
    let (value, weights) = best.ok_or(Error::Infeasible {
        class: crate::error::ConstraintClass::Budget,
    })?;
    Ok(BruteForceResult {
        value,
        weights,
        candidates,
    })
}

fn compositions(left: u32, counts: &mut [u32], pos: usize, visit: &mut dyn FnMut(&[u32]) -> Result<()>) -> Result<()> {
    if pos + 1 == counts.len() {
        counts[pos] = left;
        return visit(counts);
    }
    for c in 0..=left {
        counts[pos] = c;
        compositions(left - c, counts, pos + 1, visit)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn composition_count() {
        let mut n = 0;
        compositions(6, &mut [0; 3], 0, &mut |k| {
            assert_eq!(k.iter().sum::<u32>(), 6);
            n += 1;
            Ok(())
        })
        .unwrap();
        // C(8, 2)
        assert_eq!(n, 28);
    }
}

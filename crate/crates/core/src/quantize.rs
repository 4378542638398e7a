//! Cube quantization of sample paths and the adapted empirical measure.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measures::{Bounds, DiscreteMeasure, PathBatch, Shape};

/// Partition of `[a, b]^d` into `cells_per_axis^d` equal cubes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuantizerConfig {
    pub bounds: Bounds,
    pub shape: Shape,
    /// Denominator of the exponent `q = 1 / q_den`.
    pub q_den: u32,
    pub cells_per_axis: u32,
}

impl QuantizerConfig {
    /// `q = 1/(T+1)` for `d = 1` and `1/(dT)` otherwise, with
    /// `cells_per_axis = ceil(N^q)` computed exactly in integers.
    pub fn new(bounds: Bounds, shape: Shape, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::Parameter("sample size must be positive".into()));
        }
        let q_den = exponent_denominator(shape);
        Ok(QuantizerConfig {
            bounds,
            shape,
            q_den,
            cells_per_axis: integer_root_ceil(n as u128, q_den),
        })
    }

    /// Fixed number of cells per axis, bypassing the `N^q` rule.
    pub fn with_cells(bounds: Bounds, shape: Shape, cells_per_axis: u32) -> Result<Self> {
        if cells_per_axis == 0 {
            return Err(Error::Parameter("cells_per_axis must be positive".into()));
        }
        Ok(QuantizerConfig {
            bounds,
            shape,
            q_den: exponent_denominator(shape),
            cells_per_axis,
        })
    }

    pub fn q(&self) -> f64 {
        1.0 / self.q_den as f64
    }

    pub fn edge(&self) -> f64 {
        self.bounds.width() / self.cells_per_axis as f64
    }

    /// Cube index of a scalar coordinate: half-open `[low, high)` cells,
    /// with the upper bound `b` in the last cell.
    pub fn cell_of(&self, v: f64) -> Result<u32> {
        if !self.bounds.contains(v) {
            return Err(Error::Domain(format!(
                "{v} outside [{}, {}]",
                self.bounds.low, self.bounds.high
            )));
        }
        let last = self.cells_per_axis - 1;
        let h = self.edge();
        let a = self.bounds.low;
        let mut i = (((v - a) / h).floor() as i64).clamp(0, last as i64) as u32;
        // guard against round-off in the division
        if i > 0 && v < a + i as f64 * h {
            i -= 1;
        } else if i < last && v >= a + (i + 1) as f64 * h {
            i += 1;
        }
        Ok(i)
    }

    pub fn center(&self, cell: u32) -> f64 {
        self.bounds.low + (cell as f64 + 0.5) * self.edge()
    }

    /// Cube indices of every coordinate of a (partial) path.
    pub fn cells(&self, u: &[f64]) -> Result<Vec<u32>> {
        u.iter().map(|&v| self.cell_of(v)).collect()
    }
}

fn exponent_denominator(shape: Shape) -> u32 {
    if shape.dims == 1 {
        shape.steps as u32 + 1
    } else {
        (shape.dims * shape.steps) as u32
    }
}

/// Smallest `k >= 1` with `k^den >= n`.
fn integer_root_ceil(n: u128, den: u32) -> u32 {
    let mut k: u32 = 1;
    loop {
        match (k as u128).checked_pow(den) {
            Some(p) if p < n => k += 1,
            _ => return k,
        }
    }
}

/// Map a `d`-vector (or any run of coordinates) to the center of its cube.
pub fn quantize_point(cfg: &QuantizerConfig, u: &[f64]) -> Result<Vec<f64>> {
    u.iter().map(|&v| Ok(cfg.center(cfg.cell_of(v)?))).collect()
}

/// Empirical measure of quantized paths with duplicates merged; weights are
/// counts over `N`. Atoms keep first-appearance order.
pub fn adapted_empirical(cfg: &QuantizerConfig, paths: &PathBatch) -> Result<DiscreteMeasure> {
    let w = vec![1.0; paths.len()];
    quantize_weighted(cfg, paths, &w)
}

/// Quantize the support of a weighted measure and merge atoms sharing a cell.
pub fn adapted_measure(cfg: &QuantizerConfig, m: &DiscreteMeasure) -> Result<DiscreteMeasure> {
    quantize_weighted(cfg, m.support(), m.weights())
}

fn quantize_weighted(cfg: &QuantizerConfig, paths: &PathBatch, masses: &[f64]) -> Result<DiscreteMeasure> {
    check_shape(cfg, paths.shape())?;
    let mut index: BTreeMap<Vec<u32>, usize> = BTreeMap::new();
    let mut cells: Vec<Vec<u32>> = Vec::new();
    let mut mass: Vec<f64> = Vec::new();
    for (p, &w) in paths.paths().zip(masses) {
        let id = cfg.cells(p)?;
        match index.get(&id) {
            Some(&k) => mass[k] += w,
            None => {
                index.insert(id.clone(), cells.len());
                cells.push(id);
                mass.push(w);
            }
        }
    }
    let data: Vec<f64> = cells.iter().flatten().map(|&c| cfg.center(c)).collect();
    let support = PathBatch::new(paths.shape(), cfg.bounds, data)?;
    DiscreteMeasure::from_masses(support, mass)
}

fn check_shape(cfg: &QuantizerConfig, shape: Shape) -> Result<()> {
    if cfg.shape != shape {
        return Err(Error::Dimension(format!(
            "quantizer built for {}x{}, paths are {}x{}",
            cfg.shape.steps, cfg.shape.dims, shape.steps, shape.dims
        )));
    }
    Ok(())
}

/// Whether suffixes are quantized (`φ_N`) or kept as observed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelMode {
    Quantized,
    Identity,
}

/// Empirical conditional law of `x_{t+1:T}` given the prefix cell of `x_{1:t}`.
#[derive(Debug, Clone)]
pub struct ConditionalKernel {
    t: usize,
    mode: KernelMode,
    entries: BTreeMap<Vec<u32>, (f64, DiscreteMeasure)>,
}

impl ConditionalKernel {
    pub fn time(&self) -> usize {
        self.t
    }

    pub fn mode(&self) -> KernelMode {
        self.mode
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Conditional suffix measure for an occupied prefix cell.
    pub fn get(&self, cell: &[u32]) -> Result<&DiscreteMeasure> {
        self.entries
            .get(cell)
            .map(|(_, m)| m)
            .ok_or_else(|| Error::MissingCell(cell.to_vec()))
    }

    /// Empirical probability of the prefix cell.
    pub fn prefix_probability(&self, cell: &[u32]) -> Result<f64> {
        self.entries
            .get(cell)
            .map(|(p, _)| *p)
            .ok_or_else(|| Error::MissingCell(cell.to_vec()))
    }

    /// `(cell, probability, conditional measure)` in cell order.
    pub fn iter(&self) -> impl Iterator<Item = (&[u32], f64, &DiscreteMeasure)> + '_ {
        self.entries.iter().map(|(k, (p, m))| (k.as_slice(), *p, m))
    }
}

fn suffix_shape(shape: Shape, t: usize) -> Shape {
    Shape {
        steps: shape.steps - t,
        dims: shape.dims,
    }
}

fn suffix_measure(
    cfg: &QuantizerConfig,
    suffixes: &[&[f64]],
    shape: Shape,
    mode: KernelMode,
) -> Result<DiscreteMeasure> {
    let data: Vec<f64> = match mode {
        KernelMode::Quantized => suffixes
            .iter()
            .map(|s| quantize_point(cfg, s))
            .collect::<Result<Vec<_>>>()?
            .concat(),
        KernelMode::Identity => suffixes.concat(),
    };
    let batch = PathBatch::new(shape, cfg.bounds, data)?;
    Ok(DiscreteMeasure::uniform(batch).merge_duplicates())
}

/// Group samples by the quantized cell of `x_{1:t}` and collect the empirical
/// measure of their suffixes in each occupied cell.
pub fn conditional_kernel(
    cfg: &QuantizerConfig,
    paths: &PathBatch,
    t: usize,
    mode: KernelMode,
) -> Result<ConditionalKernel> {
    let shape = paths.shape();
    check_shape(cfg, shape)?;
    if t == 0 || t >= shape.steps {
        return Err(Error::Parameter(format!(
            "kernel time {t} outside 1..={}",
            shape.steps.saturating_sub(1)
        )));
    }
    let split = shape.prefix_len(t);
    let mut groups: BTreeMap<Vec<u32>, Vec<&[f64]>> = BTreeMap::new();
    for p in paths.paths() {
        groups.entry(cfg.cells(&p[..split])?).or_default().push(&p[split..]);
    }
    let n = paths.len() as f64;
    let sshape = suffix_shape(shape, t);
    let mut entries = BTreeMap::new();
    for (cell, suffixes) in groups {
        let m = suffix_measure(cfg, &suffixes, sshape, mode)?;
        entries.insert(cell, (suffixes.len() as f64 / n, m));
    }
    Ok(ConditionalKernel { t, mode, entries })
}

/// Unconditional empirical measure of `x_{t+1:T}` under the same mode.
pub fn suffix_marginal(
    cfg: &QuantizerConfig,
    paths: &PathBatch,
    t: usize,
    mode: KernelMode,
) -> Result<DiscreteMeasure> {
    let shape = paths.shape();
    check_shape(cfg, shape)?;
    if t == 0 || t >= shape.steps {
        return Err(Error::Parameter(format!("suffix time {t} out of range")));
    }
    let split = shape.prefix_len(t);
    let suffixes: Vec<&[f64]> = paths.paths().map(|p| &p[split..]).collect();
    suffix_measure(cfg, &suffixes, suffix_shape(shape, t), mode)
}

/// Convergence rate of the adapted empirical measure.
pub fn rate(n: usize, d: usize, t: usize) -> f64 {
    let n = n as f64;
    match d {
        1 => n.powf(-1.0 / (t as f64 + 1.0)),
        2 => n.powf(-1.0 / (2.0 * t as f64)) * (n + 1.0).ln(),
        _ => n.powf(-1.0 / (d * t) as f64),
    }
}

/// Finite-sample radius `C rate(N) + sqrt(ln(2T/δ) / (cN))`.
pub fn radius_schedule(n: usize, d: usize, t: usize, delta: f64, c: f64, big_c: f64) -> Result<f64> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::Parameter(format!("delta must lie in (0, 1), got {delta}")));
    }
    if !(c > 0.0) || !(big_c >= 0.0) {
        return Err(Error::Parameter("constants must satisfy c > 0, C >= 0".into()));
    }
    if n == 0 {
        return Err(Error::Parameter("sample size must be positive".into()));
    }
    let conf = ((2.0 * t as f64 / delta).ln() / (c * n as f64)).sqrt();
    Ok(big_c * rate(n, d, t) + conf)
}

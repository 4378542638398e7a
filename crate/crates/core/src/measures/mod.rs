//! Paths, discrete path measures, couplings, costs and objectives.
//!
//! A path is a flat `&[f64]` of length `T * d` laid out time-major: the
//! coordinate `(t, k)` (both 1-based) sits at `(t - 1) * d + (k - 1)`.

mod cost;
pub mod io;
mod objective;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

pub use cost::CostSpec;
pub use objective::ObjectiveSpec;

use crate::error::{Error, Result};

/// Tolerance on `Σ weights = 1` for measures.
pub const MEASURE_TOL: f64 = 1e-12;
/// Tolerance on coupling marginals.
pub const COUPLING_TOL: f64 = 1e-9;

/// Number of time steps `T` and state dimension `d` of a path.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Shape {
    pub steps: usize,
    pub dims: usize,
}

impl Shape {
    pub fn new(steps: usize, dims: usize) -> Result<Self> {
        if steps == 0 || dims == 0 {
            return Err(Error::Dimension(format!(
                "paths need T >= 1 and d >= 1, got T={steps}, d={dims}"
            )));
        }
        Ok(Shape { steps, dims })
    }

    /// Number of scalars in one path.
    pub fn len(&self) -> usize {
        self.steps * self.dims
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Length of the prefix `x_{1:t}`.
    pub fn prefix_len(&self, t: usize) -> usize {
        t * self.dims
    }

    /// Flat index of 1-based `(t, k)`.
    pub fn index(&self, t: usize, k: usize) -> usize {
        (t - 1) * self.dims + (k - 1)
    }
}

/// Closed box `[low, high]` applying to every coordinate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub low: f64,
    pub high: f64,
}

impl Bounds {
    pub fn new(low: f64, high: f64) -> Result<Self> {
        if !(low.is_finite() && high.is_finite() && low < high) {
            return Err(Error::Parameter(format!("invalid bounds [{low}, {high}]")));
        }
        Ok(Bounds { low, high })
    }

    pub fn width(&self) -> f64 {
        self.high - self.low
    }

    pub fn contains(&self, v: f64) -> bool {
        v >= self.low && v <= self.high
    }

    pub fn project(&self, v: f64) -> f64 {
        v.clamp(self.low, self.high)
    }
}

/// `N` paths of shape `[T][d]` inside a common box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PathBatchRepr", into = "PathBatchRepr")]
pub struct PathBatch {
    shape: Shape,
    bounds: Bounds,
    data: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PathBatchRepr {
    steps: usize,
    dims: usize,
    bounds: (f64, f64),
    paths: Vec<Vec<f64>>,
}

impl From<PathBatch> for PathBatchRepr {
    fn from(b: PathBatch) -> Self {
        PathBatchRepr {
            steps: b.shape.steps,
            dims: b.shape.dims,
            bounds: (b.bounds.low, b.bounds.high),
            paths: b.paths().map(<[f64]>::to_vec).collect(),
        }
    }
}

impl TryFrom<PathBatchRepr> for PathBatch {
    type Error = Error;
    fn try_from(r: PathBatchRepr) -> Result<Self> {
        PathBatch::from_paths(
            Shape::new(r.steps, r.dims)?,
            Bounds::new(r.bounds.0, r.bounds.1)?,
            &r.paths,
        )
    }
}

impl PathBatch {
    pub fn new(shape: Shape, bounds: Bounds, data: Vec<f64>) -> Result<Self> {
        if data.is_empty() || !data.len().is_multiple_of(shape.len()) {
            return Err(Error::Dimension(format!(
                "{} values do not form a nonempty batch of paths of length {}",
                data.len(),
                shape.len()
            )));
        }
        if let Some(v) = data.iter().find(|v| !bounds.contains(**v)) {
            return Err(Error::Domain(format!(
                "coordinate {v} outside [{}, {}]",
                bounds.low, bounds.high
            )));
        }
        Ok(PathBatch { shape, bounds, data })
    }

    pub fn from_paths<P: AsRef<[f64]>>(shape: Shape, bounds: Bounds, paths: &[P]) -> Result<Self> {
        let mut data = Vec::with_capacity(paths.len() * shape.len());
        for p in paths {
            let p = p.as_ref();
            if p.len() != shape.len() {
                return Err(Error::Dimension(format!(
                    "path of length {} in batch of shape {}x{}",
                    p.len(),
                    shape.steps,
                    shape.dims
                )));
            }
            data.extend_from_slice(p);
        }
        Self::new(shape, bounds, data)
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn bounds(&self) -> Bounds {
        self.bounds
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.shape.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn path(&self, n: usize) -> &[f64] {
        let l = self.shape.len();
        &self.data[n * l..(n + 1) * l]
    }

    pub fn paths(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.data.chunks_exact(self.shape.len())
    }

    /// Partition of path indices by their prefix `x_{1:t}` (bit-exact match),
    /// groups ordered by first appearance.
    pub fn prefix_groups(&self, t: usize) -> Vec<Vec<usize>> {
        let k = self.shape.prefix_len(t);
        group_by_key(self.len(), |n| path_key(&self.path(n)[..k]))
    }

    /// Sub-batch of the listed paths, in order.
    pub fn select(&self, indices: &[usize]) -> Result<PathBatch> {
        let paths: Vec<&[f64]> = indices.iter().map(|&i| self.path(i)).collect();
        PathBatch::from_paths(self.shape, self.bounds, &paths)
    }
}

/// Finite-support probability measure on paths.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MeasureRepr", into = "MeasureRepr")]
pub struct DiscreteMeasure {
    support: PathBatch,
    weights: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MeasureRepr {
    support: PathBatch,
    weights: Vec<f64>,
}

impl From<DiscreteMeasure> for MeasureRepr {
    fn from(m: DiscreteMeasure) -> Self {
        MeasureRepr {
            support: m.support,
            weights: m.weights,
        }
    }
}

impl TryFrom<MeasureRepr> for DiscreteMeasure {
    type Error = Error;
    fn try_from(r: MeasureRepr) -> Result<Self> {
        DiscreteMeasure::new(r.support, r.weights)
    }
}

impl DiscreteMeasure {
    pub fn new(support: PathBatch, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != support.len() {
            return Err(Error::Dimension(format!(
                "{} weights for {} support paths",
                weights.len(),
                support.len()
            )));
        }
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::Measure("weights must be finite and nonnegative".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > MEASURE_TOL {
            return Err(Error::Measure(format!("weights sum to {total}, not 1")));
        }
        Ok(DiscreteMeasure { support, weights })
    }

    /// Normalize nonnegative masses (e.g. counts) to probabilities.
    pub fn from_masses(support: PathBatch, masses: Vec<f64>) -> Result<Self> {
        let total: f64 = masses.iter().sum();
        if !(total > 0.0 && total.is_finite()) {
            return Err(Error::Measure("total mass must be positive".into()));
        }
        let w = masses.iter().map(|m| m / total).collect();
        Self::new(support, w)
    }

    pub fn uniform(support: PathBatch) -> Self {
        let n = support.len();
        DiscreteMeasure {
            support,
            weights: vec![1.0 / n as f64; n],
        }
    }

    pub fn dirac(shape: Shape, bounds: Bounds, path: &[f64]) -> Result<Self> {
        let support = PathBatch::from_paths(shape, bounds, &[path])?;
        Self::new(support, vec![1.0])
    }

    pub fn support(&self) -> &PathBatch {
        &self.support
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn shape(&self) -> Shape {
        self.support.shape()
    }

    pub fn bounds(&self) -> Bounds {
        self.support.bounds()
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn atom(&self, n: usize) -> (&[f64], f64) {
        (self.support.path(n), self.weights[n])
    }

    pub fn atoms(&self) -> impl Iterator<Item = (&[f64], f64)> + '_ {
        self.support.paths().zip(self.weights.iter().copied())
    }

    /// Merge atoms with bit-identical paths, keeping first-seen order.
    pub fn merge_duplicates(&self) -> DiscreteMeasure {
        let mut index: BTreeMap<Vec<u64>, usize> = BTreeMap::new();
        let mut paths: Vec<&[f64]> = Vec::new();
        let mut masses: Vec<f64> = Vec::new();
        for (p, w) in self.atoms() {
            let key = path_key(p);
            match index.get(&key) {
                Some(&i) => masses[i] += w,
                None => {
                    index.insert(key, paths.len());
                    paths.push(p);
                    masses.push(w);
                }
            }
        }
        let support = PathBatch::from_paths(self.shape(), self.bounds(), &paths).expect("subset of a valid batch");
        DiscreteMeasure::from_masses(support, masses).expect("positive mass")
    }

    /// Partition of atom indices by their prefix `x_{1:t}` (bit-exact match).
    /// Groups are ordered by first appearance.
    pub fn prefix_groups(&self, t: usize) -> Vec<Vec<usize>> {
        self.support.prefix_groups(t)
    }

    /// Partition of atom indices by their full path.
    pub fn path_classes(&self) -> Vec<Vec<usize>> {
        group_by_key(self.len(), |n| path_key(self.support.path(n)))
    }

    /// Mixture `alpha * self + (1 - alpha) * other` on a common support.
    pub fn mix(&self, other: &DiscreteMeasure, alpha: f64) -> Result<DiscreteMeasure> {
        if self.support != other.support {
            return Err(Error::Measure("mixture requires a common support".into()));
        }
        if !(0.0..=1.0).contains(&alpha) {
            return Err(Error::Parameter(format!("mixture weight {alpha} outside [0, 1]")));
        }
        let w = self
            .weights
            .iter()
            .zip(&other.weights)
            .map(|(a, b)| alpha * a + (1.0 - alpha) * b)
            .collect();
        DiscreteMeasure::from_masses(self.support.clone(), w)
    }
}

pub(crate) fn path_key(p: &[f64]) -> Vec<u64> {
    // +0.0 and -0.0 compare equal as paths
    p.iter().map(|v| if *v == 0.0 { 0 } else { v.to_bits() }).collect()
}

fn group_by_key<K: Ord>(n: usize, key: impl Fn(usize) -> K) -> Vec<Vec<usize>> {
    let mut index: BTreeMap<K, usize> = BTreeMap::new();
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for i in 0..n {
        let k = key(i);
        match index.get(&k) {
            Some(&g) => groups[g].push(i),
            None => {
                index.insert(k, groups.len());
                groups.push(vec![i]);
            }
        }
    }
    groups
}

/// Transport plan between two discrete measures, stored row-major
/// (`rows = |supp mu|`, `cols = |supp nu|`).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Coupling {
    rows: usize,
    cols: usize,
    pi: Vec<f64>,
    row_marginal: Vec<f64>,
    col_marginal: Vec<f64>,
}

impl Coupling {
    pub fn new(pi: Vec<f64>, mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Result<Self> {
        Self::with_marginals(pi, mu.weights(), nu.weights())
    }

    /// Validate against raw marginal weight vectors. Entries in
    /// `[-1e-12, 0)` are treated as round-off and set to zero.
    pub fn with_marginals(mut pi: Vec<f64>, row: &[f64], col: &[f64]) -> Result<Self> {
        let (rows, cols) = (row.len(), col.len());
        if pi.len() != rows * cols {
            return Err(Error::Dimension(format!(
                "plan has {} entries, expected {rows}x{cols}",
                pi.len()
            )));
        }
        for v in &mut pi {
            if !v.is_finite() || *v < -1e-12 {
                return Err(Error::Coupling(format!("entry {v} is negative or non-finite")));
            }
            if *v < 0.0 {
                *v = 0.0;
            }
        }
        let c = Coupling {
            rows,
            cols,
            pi,
            row_marginal: row.to_vec(),
            col_marginal: col.to_vec(),
        };
        let (re, ce) = c.marginal_errors();
        if re > COUPLING_TOL || ce > COUPLING_TOL {
            return Err(Error::Coupling(format!(
                "marginal violation (rows {re:.3e}, cols {ce:.3e})"
            )));
        }
        Ok(c)
    }

    /// Independent coupling `mu ⊗ nu`.
    pub fn product(mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Self {
        let pi = mu
            .weights()
            .iter()
            .flat_map(|a| nu.weights().iter().map(move |b| a * b))
            .collect();
        Coupling {
            rows: mu.len(),
            cols: nu.len(),
            pi,
            row_marginal: mu.weights().to_vec(),
            col_marginal: nu.weights().to_vec(),
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.pi[i * self.cols + j]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.pi
    }

    pub fn row_sums(&self) -> Vec<f64> {
        self.pi.chunks_exact(self.cols).map(|r| r.iter().sum()).collect()
    }

    pub fn col_sums(&self) -> Vec<f64> {
        let mut s = vec![0.0; self.cols];
        for r in self.pi.chunks_exact(self.cols) {
            for (acc, v) in s.iter_mut().zip(r) {
                *acc += v;
            }
        }
        s
    }

    /// Max absolute deviation of row and column sums from the marginals.
    pub fn marginal_errors(&self) -> (f64, f64) {
        let dev = |a: Vec<f64>, b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        (
            dev(self.row_sums(), &self.row_marginal),
            dev(self.col_sums(), &self.col_marginal),
        )
    }

    /// `Σ_ij pi_ij * m_ij` for a row-major matrix of the same shape.
    pub fn integrate(&self, matrix: &[f64]) -> f64 {
        debug_assert_eq!(matrix.len(), self.pi.len());
        self.pi.iter().zip(matrix).map(|(p, m)| p * m).sum()
    }

    /// Nonzero entries as `(row, col, mass)`.
    pub fn triplets(&self, threshold: f64) -> Vec<(usize, usize, f64)> {
        self.pi
            .iter()
            .enumerate()
            .filter(|(_, v)| **v > threshold)
            .map(|(k, v)| (k / self.cols, k % self.cols, *v))
            .collect()
    }
}

/// Row-major `|supp mu| x |supp nu|` matrix of `c(x_i, y_j)`.
pub fn cost_matrix(cost: &CostSpec, mu: &PathBatch, nu: &PathBatch) -> Result<Vec<f64>> {
    let shape = mu.shape();
    if nu.shape() != shape {
        return Err(Error::Dimension("measures have different path shapes".into()));
    }
    let mut out = Vec::with_capacity(mu.len() * nu.len());
    for x in mu.paths() {
        for y in nu.paths() {
            out.push(cost.eval(shape, x, y)?);
        }
    }
    Ok(out)
}

/// `Σ_n w_n f(x_n)`.
pub fn expected_value(obj: &ObjectiveSpec, m: &DiscreteMeasure) -> Result<f64> {
    let shape = m.shape();
    m.atoms().map(|(p, w)| Ok(w * obj.eval(shape, p)?)).sum::<Result<f64>>()
}

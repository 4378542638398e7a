//! Adapted test functions `γ′(x, y) = Σ_l Σ_t h_{l,t}(y_{1:t}) ΔM_{l,t}(x)`
//! and the martingale penalty on `M`.
//!
//! Values of the `h` networks are laid out as `l * (T - 1) + (t - 1)` and
//! values of the `M` networks as `l * T + (t - 1)`. The flat parameter vector
//! stores every `h_{l,t}` (l-major) followed by every `M_{l,t}`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::dense::{Activation, DenseNet};
use super::graph::Graph;
use crate::error::{Error, Result};
use crate::measures::{DiscreteMeasure, Shape};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestFunctionFamily {
    shape: Shape,
    layers: usize,
    h: Vec<DenseNet>,
    m: Vec<DenseNet>,
}

impl TestFunctionFamily {
    /// `layers` families of `[t*d, hidden, hidden, 1]` tanh networks.
    pub fn new<R: Rng + ?Sized>(
        shape: Shape,
        layers: usize,
        hidden: usize,
        h_clamp: (f64, f64),
        m_clamp: (f64, f64),
        rng: &mut R,
    ) -> Result<Self> {
        let make = |t: usize, clamp: (f64, f64), rng: &mut R| -> Result<DenseNet> {
            let sizes = [shape.prefix_len(t), hidden, hidden, 1];
            Ok(DenseNet::new(&sizes, Activation::Tanh, Activation::Identity, rng)?.with_clamp(clamp.0, clamp.1))
        };
        let mut h = Vec::new();
        for _ in 0..layers {
            for t in 1..shape.steps {
                h.push(make(t, h_clamp, rng)?);
            }
        }
        let mut m = Vec::new();
        for _ in 0..layers {
            for t in 1..=shape.steps {
                m.push(make(t, m_clamp, rng)?);
            }
        }
        Ok(TestFunctionFamily { shape, layers, h, m })
    }

    /// Family with no test functions, i.e. `γ′ ≡ 0`.
    pub fn empty(shape: Shape) -> Self {
        TestFunctionFamily {
            shape,
            layers: 0,
            h: Vec::new(),
            m: Vec::new(),
        }
    }

    /// Build from explicit networks, laid out as described in the module docs.
    pub fn from_nets(shape: Shape, layers: usize, h: Vec<DenseNet>, m: Vec<DenseNet>) -> Result<Self> {
        let t = shape.steps;
        if h.len() != layers * (t - 1) || m.len() != layers * t {
            return Err(Error::Dimension(format!(
                "expected {} h and {} M networks, got {} and {}",
                layers * (t - 1),
                layers * t,
                h.len(),
                m.len()
            )));
        }
        for (k, net) in h.iter().enumerate() {
            check_net(net, shape.prefix_len(k % (t - 1) + 1))?;
        }
        for (k, net) in m.iter().enumerate() {
            check_net(net, shape.prefix_len(k % t + 1))?;
        }
        Ok(TestFunctionFamily { shape, layers, h, m })
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn layers(&self) -> usize {
        self.layers
    }

    pub fn is_empty(&self) -> bool {
        self.layers == 0
    }

    pub fn h_net(&self, l: usize, t: usize) -> &DenseNet {
        &self.h[l * (self.shape.steps - 1) + t - 1]
    }

    pub fn m_net(&self, l: usize, t: usize) -> &DenseNet {
        &self.m[l * self.shape.steps + t - 1]
    }

    pub fn h_len(&self) -> usize {
        self.h.len()
    }

    pub fn m_len(&self) -> usize {
        self.m.len()
    }

    pub fn h_param_count(&self) -> usize {
        self.h.iter().map(DenseNet::param_count).sum()
    }

    pub fn param_count(&self) -> usize {
        self.h_param_count() + self.m.iter().map(DenseNet::param_count).sum::<usize>()
    }

    pub fn params(&self) -> Vec<f64> {
        self.h.iter().chain(&self.m).flat_map(|n| n.params()).collect()
    }

    pub fn set_params(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.param_count() {
            return Err(Error::Dimension(format!(
                "expected {} parameters, got {}",
                self.param_count(),
                params.len()
            )));
        }
        let mut off = 0;
        for net in self.h.iter_mut().chain(self.m.iter_mut()) {
            let n = net.param_count();
            net.set_params(&params[off..off + n])?;
            off += n;
        }
        Ok(())
    }

    /// Project every network into its own clamp box.
    pub fn clamp(&mut self) {
        for net in self.h.iter_mut().chain(self.m.iter_mut()) {
            net.apply_clamp();
        }
    }

    /// `h_{l,t}(y_{1:t})` for every `(l, t)`.
    pub fn h_values(&self, y: &[f64]) -> Result<Vec<f64>> {
        self.check_path(y)?;
        let tm = self.shape.steps - 1;
        self.h
            .iter()
            .enumerate()
            .map(|(k, net)| net.forward_scalar(&y[..self.shape.prefix_len(k % tm + 1)]))
            .collect()
    }

    /// `M_{l,t}(x_{1:t})` for every `(l, t)`.
    pub fn m_values(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_path(x)?;
        let t = self.shape.steps;
        self.m
            .iter()
            .enumerate()
            .map(|(k, net)| net.forward_scalar(&x[..self.shape.prefix_len(k % t + 1)]))
            .collect()
    }

    /// Raw increments `M_{l,t+1} − M_{l,t}` from [`Self::m_values`] output.
    pub fn increments(&self, m_values: &[f64]) -> Vec<f64> {
        let t = self.shape.steps;
        (0..self.layers)
            .flat_map(|l| (0..t - 1).map(move |s| m_values[l * t + s + 1] - m_values[l * t + s]))
            .collect()
    }

    /// Accumulate `Σ adj_k ∂h_k(y)/∂θ` into `param_grad` (the h block of the
    /// flat layout) and, if given, `Σ adj_k ∂h_k/∂y` into `y_grad`.
    pub fn h_backward(
        &self,
        y: &[f64],
        adj: &[f64],
        param_grad: &mut [f64],
        mut y_grad: Option<&mut [f64]>,
    ) -> Result<()> {
        self.check_path(y)?;
        let tm = self.shape.steps - 1;
        let mut off = 0;
        for (k, net) in self.h.iter().enumerate() {
            let n = net.param_count();
            if adj[k] != 0.0 {
                let len = self.shape.prefix_len(k % tm + 1);
                let fb = net.forward_backward(&y[..len], &[adj[k]])?;
                for (g, d) in param_grad[off..off + n].iter_mut().zip(&fb.param_grad) {
                    *g += d;
                }
                if let Some(yg) = y_grad.as_deref_mut() {
                    for (g, d) in yg[..len].iter_mut().zip(&fb.input_grad) {
                        *g += d;
                    }
                }
            }
            off += n;
        }
        Ok(())
    }

    /// Accumulate `Σ adj_k ∂M_k(x)/∂θ` into `param_grad` (the M block).
    pub fn m_backward(&self, x: &[f64], adj: &[f64], param_grad: &mut [f64]) -> Result<()> {
        self.check_path(x)?;
        let t = self.shape.steps;
        let mut off = 0;
        for (k, net) in self.m.iter().enumerate() {
            let n = net.param_count();
            if adj[k] != 0.0 {
                let fb = net.forward_backward(&x[..self.shape.prefix_len(k % t + 1)], &[adj[k]])?;
                for (g, d) in param_grad[off..off + n].iter_mut().zip(&fb.param_grad) {
                    *g += d;
                }
            }
            off += n;
        }
        Ok(())
    }

    fn check_path(&self, p: &[f64]) -> Result<()> {
        if p.len() != self.shape.len() {
            return Err(Error::Dimension(format!(
                "path has length {}, family expects {}",
                p.len(),
                self.shape.len()
            )));
        }
        Ok(())
    }
}

fn check_net(net: &DenseNet, input: usize) -> Result<()> {
    if net.input_dim() != input || net.output_dim() != 1 {
        return Err(Error::Dimension(format!(
            "network maps {} -> {}, expected {input} -> 1",
            net.input_dim(),
            net.output_dim()
        )));
    }
    Ok(())
}

pub fn gamma_prime(fam: &TestFunctionFamily, x: &[f64], y: &[f64]) -> Result<f64> {
    if fam.is_empty() {
        return Ok(0.0);
    }
    let h = fam.h_values(y)?;
    let dm = fam.increments(&fam.m_values(x)?);
    Ok(h.iter().zip(&dm).map(|(a, b)| a * b).sum())
}

/// `γ′(x, y)` with its gradient in the flat parameter layout and in `y`.
pub fn gamma_prime_grad(fam: &TestFunctionFamily, x: &[f64], y: &[f64]) -> Result<(f64, Vec<f64>, Vec<f64>)> {
    let mut pg = vec![0.0; fam.param_count()];
    let mut yg = vec![0.0; y.len()];
    if fam.is_empty() {
        return Ok((0.0, pg, yg));
    }
    let h = fam.h_values(y)?;
    let dm = fam.increments(&fam.m_values(x)?);
    let value = h.iter().zip(&dm).map(|(a, b)| a * b).sum();
    let hp = fam.h_param_count();
    fam.h_backward(y, &dm, &mut pg[..hp], Some(&mut yg))?;
    let t = fam.shape.steps;
    let mut m_adj = vec![0.0; fam.m_len()];
    for l in 0..fam.layers {
        for s in 0..t - 1 {
            let a = h[l * (t - 1) + s];
            m_adj[l * t + s + 1] += a;
            m_adj[l * t + s] -= a;
        }
    }
    fam.m_backward(x, &m_adj, &mut pg[hp..])?;
    Ok((value, pg, yg))
}

/// Penalty value and its gradient with respect to `m_values[n][k]`.
///
/// `p = (1/T) Σ_l Σ_{t<T} |Σ_n w_n (M_{l,t+1} − M_{l,t})(x_n)| / (sd_l + η)`
/// where `sd_l` is the square root of the weighted within-time variance of
/// `M_l`, averaged over `t`.
pub fn penalty_from_values(
    m_values: &[Vec<f64>],
    weights: &[f64],
    layers: usize,
    steps: usize,
    eta: f64,
) -> (f64, Vec<Vec<f64>>) {
    let mut g = Graph::with_capacity(m_values.len() * layers * steps * 8);
    let vars: Vec<Vec<_>> = m_values.iter().map(|row| g.inputs(row)).collect();
    let mut terms = Vec::new();
    for l in 0..layers {
        let mut var_terms = Vec::new();
        for t in 0..steps {
            let col: Vec<_> = vars.iter().map(|r| r[l * steps + t]).collect();
            let mean = g.weighted_sum(&col, weights);
            let dev: Vec<_> = col
                .iter()
                .map(|&v| {
                    let d = g.sub(v, mean);
                    g.square(d)
                })
                .collect();
            var_terms.push(g.weighted_sum(&dev, weights));
        }
        let var = g.sum(&var_terms);
        let var = g.scale(var, 1.0 / steps as f64);
        // sqrt has an infinite slope at zero; the constant-M case has no
        // meaningful direction anyway.
        let sd = if g.value(var) > 0.0 {
            g.sqrt(var)
        } else {
            g.constant(0.0)
        };
        let denom = g.add_const(sd, eta);
        for t in 0..steps - 1 {
            let inc: Vec<_> = vars
                .iter()
                .map(|r| g.sub(r[l * steps + t + 1], r[l * steps + t]))
                .collect();
            let s = g.weighted_sum(&inc, weights);
            let a = g.abs(s);
            terms.push(g.div(a, denom));
        }
    }
    let total = g.sum(&terms);
    let p = g.scale(total, 1.0 / steps as f64);
    let grads = g.backward(p);
    let dm = vars.iter().map(|r| grads.wrt_all(r)).collect();
    (g.value(p), dm)
}

pub fn martingale_penalty(fam: &TestFunctionFamily, measure: &DiscreteMeasure, eta: f64) -> Result<f64> {
    if !(eta > 0.0) {
        return Err(Error::Parameter(format!("eta must be positive, got {eta}")));
    }
    if measure.is_empty() {
        return Err(Error::Measure("empty measure".into()));
    }
    if fam.is_empty() {
        return Ok(0.0);
    }
    let mv: Vec<Vec<f64>> = measure
        .support()
        .paths()
        .map(|x| fam.m_values(x))
        .collect::<Result<_>>()?;
    Ok(penalty_from_values(&mv, measure.weights(), fam.layers, fam.shape.steps, eta).0)
}

/// Increments with the conditional mean over each prefix group removed:
/// `D_{l,t}(x_n) = M_{l,t+1}(x_n) − Σ_{m ∈ G_t(n)} (w_m / w(G)) M_{l,t+1}(x_m)`.
///
/// Under any plan whose first marginal is the measure and which is causal,
/// `Σ π D_{l,t}(x) h(y_{1:t})` vanishes, so weak duality holds for every
/// parameter value. `groups[t-1]` are the prefix groups at time `t`.
pub fn compensated_increments(
    m_values: &[Vec<f64>],
    weights: &[f64],
    groups: &[Vec<Vec<usize>>],
    layers: usize,
    steps: usize,
) -> Vec<Vec<f64>> {
    let n = m_values.len();
    let mut out = vec![vec![0.0; layers * (steps - 1)]; n];
    for (s, gs) in groups.iter().enumerate().take(steps - 1) {
        for grp in gs {
            let coef = group_coefficients(grp, weights);
            for l in 0..layers {
                let k = l * steps + s + 1;
                let mean: f64 = grp.iter().zip(&coef).map(|(&m, c)| c * m_values[m][k]).sum();
                for &i in grp {
                    out[i][l * (steps - 1) + s] = m_values[i][k] - mean;
                }
            }
        }
    }
    out
}

/// Pull adjoints of [`compensated_increments`] back to `m_values`.
pub fn compensated_increments_adjoint(
    d_adj: &[Vec<f64>],
    weights: &[f64],
    groups: &[Vec<Vec<usize>>],
    layers: usize,
    steps: usize,
) -> Vec<Vec<f64>> {
    let n = d_adj.len();
    let mut out = vec![vec![0.0; layers * steps]; n];
    for (s, gs) in groups.iter().enumerate().take(steps - 1) {
        for grp in gs {
            let coef = group_coefficients(grp, weights);
            for l in 0..layers {
                let kd = l * (steps - 1) + s;
                let km = l * steps + s + 1;
                let total: f64 = grp.iter().map(|&i| d_adj[i][kd]).sum();
                for (&m, c) in grp.iter().zip(&coef) {
                    out[m][km] += d_adj[m][kd] - c * total;
                }
            }
        }
    }
    out
}

fn group_coefficients(grp: &[usize], weights: &[f64]) -> Vec<f64> {
    let wg: f64 = grp.iter().map(|&i| weights[i]).sum();
    if wg > 0.0 {
        grp.iter().map(|&i| weights[i] / wg).collect()
    } else {
        vec![1.0 / grp.len() as f64; grp.len()]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::{Bounds, PathBatch};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Single linear layer picking coordinate `pick` of a length-`n` input,
    /// scaled by `a`, plus `b`.
    fn picker(n: usize, pick: Option<usize>, a: f64, b: f64) -> DenseNet {
        let mut net = DenseNet::zeros(&[n, 1], Activation::Identity, Activation::Identity).unwrap();
        let mut p = vec![0.0; n + 1];
        if let Some(k) = pick {
            p[k] = a;
        }
        p[n] = b;
        net.set_params(&p).unwrap();
        net
    }

    fn random_family(seed: u64, steps: usize) -> TestFunctionFamily {
        let shape = Shape::new(steps, 1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        TestFunctionFamily::new(shape, 2, 4, (-50.0, 50.0), (-50.0, 50.0), &mut rng).unwrap()
    }

    #[test]
    fn hand_evaluated_increment() {
        let shape = Shape::new(2, 1).unwrap();
        let h = vec![picker(1, None, 0.0, 1.0)];
        let m = vec![picker(1, Some(0), 1.0, 0.0), picker(2, Some(1), 1.0, 0.0)];
        let fam = TestFunctionFamily::from_nets(shape, 1, h, m).unwrap();
        let v = gamma_prime(&fam, &[0.3, 1.7], &[5.0, -2.0]).unwrap();
        assert!((v - 1.4).abs() < 1e-15);
    }

    #[test]
    fn zero_h_gives_zero() {
        let shape = Shape::new(3, 1).unwrap();
        let h = (0..2).map(|t| picker(t + 1, None, 0.0, 0.0)).collect();
        let m = (0..3).map(|t| picker(t + 1, Some(t), 2.0, 0.1)).collect();
        let fam = TestFunctionFamily::from_nets(shape, 1, h, m).unwrap();
        assert_eq!(gamma_prime(&fam, &[1.0, 2.0, 3.0], &[0.0, 1.0, 0.5]).unwrap(), 0.0);
    }

    #[test]
    fn empty_family_is_zero() {
        let fam = TestFunctionFamily::empty(Shape::new(2, 1).unwrap());
        assert_eq!(gamma_prime(&fam, &[1.0, 2.0], &[3.0, 4.0]).unwrap(), 0.0);
        assert_eq!(fam.param_count(), 0);
    }

    #[test]
    fn rejects_wrong_architecture() {
        let shape = Shape::new(2, 1).unwrap();
        let h = vec![picker(2, None, 0.0, 1.0)];
        let m = vec![picker(1, Some(0), 1.0, 0.0), picker(2, Some(1), 1.0, 0.0)];
        assert!(TestFunctionFamily::from_nets(shape, 1, h, m).is_err());
    }

    #[test]
    fn symmetric_batch_has_zero_penalty() {
        let shape = Shape::new(3, 1).unwrap();
        let h = (0..2).map(|t| picker(t + 1, None, 0.0, 1.0)).collect();
        let m = (0..3).map(|t| picker(t + 1, Some(t), 1.0, 0.0)).collect();
        let fam = TestFunctionFamily::from_nets(shape, 1, h, m).unwrap();
        let bounds = Bounds::new(-10.0, 10.0).unwrap();
        let paths = [[0.0, 1.0, 0.0], [0.0, -1.0, 0.0], [1.0, 2.0, 4.0], [1.0, 0.0, -2.0]];
        let mu = DiscreteMeasure::uniform(PathBatch::from_paths(shape, bounds, &paths).unwrap());
        assert!(martingale_penalty(&fam, &mu, 1e-6).unwrap().abs() < 1e-9);
    }

    #[test]
    fn deterministic_drift_penalty() {
        let shape = Shape::new(2, 1).unwrap();
        let h = vec![picker(1, None, 0.0, 1.0)];
        let m = vec![picker(1, None, 0.0, 1.0), picker(2, None, 0.0, 2.0)];
        let fam = TestFunctionFamily::from_nets(shape, 1, h, m).unwrap();
        let bounds = Bounds::new(-10.0, 10.0).unwrap();
        let mu = DiscreteMeasure::dirac(shape, bounds, &[0.4, 0.9]).unwrap();
        let eta = 1e-6;
        let p = martingale_penalty(&fam, &mu, eta).unwrap();
        assert!((p - 1.0 / (2.0 * eta)).abs() / p < 1e-12);
    }

    #[test]
    fn clamp_keeps_parameters_in_box() {
        let mut fam = random_family(3, 3);
        let big: Vec<f64> = (0..fam.param_count()).map(|i| (i as f64 - 40.0) * 3.0).collect();
        fam.set_params(&big).unwrap();
        fam.clamp();
        assert!(fam.params().iter().all(|p| (-50.0..=50.0).contains(p)));
    }

    #[test]
    fn checkpoint_round_trip() {
        let fam = random_family(5, 3);
        let s = serde_json::to_string(&fam).unwrap();
        let back: TestFunctionFamily = serde_json::from_str(&s).unwrap();
        assert_eq!(back, fam);
    }

    #[test]
    fn compensated_increments_vanish_in_group_mean() {
        let shape = Shape::new(3, 1).unwrap();
        let bounds = Bounds::new(-5.0, 5.0).unwrap();
        let paths = [[0.0, 1.0, 2.0], [0.0, -1.0, 1.0], [1.0, 0.5, 0.0], [0.0, 1.0, -3.0]];
        let batch = PathBatch::from_paths(shape, bounds, &paths).unwrap();
        let mu = DiscreteMeasure::new(batch, vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        let fam = random_family(11, 3);
        let mv: Vec<Vec<f64>> = mu.support().paths().map(|x| fam.m_values(x).unwrap()).collect();
        let groups: Vec<_> = (1..3).map(|t| mu.prefix_groups(t)).collect();
        let d = compensated_increments(&mv, mu.weights(), &groups, 2, 3);
        for (s, gs) in groups.iter().enumerate() {
            for grp in gs {
                for l in 0..2 {
                    let m: f64 = grp.iter().map(|&i| mu.weights()[i] * d[i][l * 2 + s]).sum();
                    assert!(m.abs() < 1e-12);
                }
            }
        }
    }

    fn central(f: impl Fn(&[f64]) -> f64, p: &[f64], k: usize) -> f64 {
        let h = 1e-5;
        let mut a = p.to_vec();
        let mut b = p.to_vec();
        a[k] += h;
        b[k] -= h;
        (f(&a) - f(&b)) / (2.0 * h)
    }

    #[test]
    fn compensated_adjoint_matches_finite_differences() {
        let groups = vec![vec![vec![0, 1], vec![2]], vec![vec![0], vec![1], vec![2]]];
        let w = [0.2, 0.5, 0.3];
        let adj = vec![vec![0.3, -1.0], vec![2.0, 0.5], vec![-0.7, 1.1]];
        let mv = vec![vec![0.1, 0.4, -0.2], vec![1.0, 0.3, 0.8], vec![-0.5, 0.0, 0.6]];
        let back = compensated_increments_adjoint(&adj, &w, &groups, 1, 3);
        let flat: Vec<f64> = mv.concat();
        let obj = |p: &[f64]| {
            let rows: Vec<Vec<f64>> = p.chunks(3).map(<[f64]>::to_vec).collect();
            let d = compensated_increments(&rows, &w, &groups, 1, 3);
            d.iter()
                .zip(&adj)
                .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>())
                .sum()
        };
        for k in 0..flat.len() {
            assert!((central(obj, &flat, k) - back[k / 3][k % 3]).abs() < 1e-8);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn telescoping_with_constant_m(seed in 0u64..1000, c in -3.0f64..3.0) {
            let mut fam = random_family(seed, 3);
            let shape = fam.shape();
            let m: Vec<DenseNet> = (0..2)
                .flat_map(|_| (1..=3).map(move |t| picker(shape.prefix_len(t), None, 0.0, c)))
                .collect();
            fam = TestFunctionFamily::from_nets(shape, 2, fam.h.clone(), m).unwrap();
            let v = gamma_prime(&fam, &[0.1, 0.5, -0.3], &[1.0, 2.0, 0.0]).unwrap();
            prop_assert!(v.abs() < 1e-12);
        }

        #[test]
        fn gamma_prime_gradient_matches_finite_differences(seed in 0u64..1000) {
            let fam = random_family(seed, 3);
            let x = [0.3, -0.2, 0.8];
            let y = [0.5, 0.1, -0.4];
            let (v, pg, yg) = gamma_prime_grad(&fam, &x, &y).unwrap();
            prop_assert!((v - gamma_prime(&fam, &x, &y).unwrap()).abs() < 1e-12);
            let p0 = fam.params();
            let at = |p: &[f64]| {
                let mut f = fam.clone();
                f.set_params(p).unwrap();
                gamma_prime(&f, &x, &y).unwrap()
            };
            for k in (0..p0.len()).step_by(7) {
                let fd = central(at, &p0, k);
                prop_assert!((fd - pg[k]).abs() <= 1e-5 * (1.0 + fd.abs()));
            }
            for k in 0..3 {
                let fd = central(|yy| gamma_prime(&fam, &x, yy).unwrap(), &y, k);
                prop_assert!((fd - yg[k]).abs() <= 1e-5 * (1.0 + fd.abs()));
            }
        }

        #[test]
        fn penalty_nonnegative_with_matching_gradient(seed in 0u64..1000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mv: Vec<Vec<f64>> = (0..4).map(|_| (0..6).map(|_| rand::Rng::random_range(&mut rng, -1.0..1.0)).collect()).collect();
            let w = [0.1, 0.2, 0.3, 0.4];
            let (p, dm) = penalty_from_values(&mv, &w, 2, 3, 1e-3);
            prop_assert!(p >= 0.0);
            let flat = mv.concat();
            let obj = |q: &[f64]| {
                let rows: Vec<Vec<f64>> = q.chunks(6).map(<[f64]>::to_vec).collect();
                penalty_from_values(&rows, &w, 2, 3, 1e-3).0
            };
            for k in 0..flat.len() {
                let fd = central(obj, &flat, k);
                prop_assert!((fd - dm[k / 6][k % 6]).abs() <= 1e-4 * (1.0 + fd.abs()));
            }
        }
    }
}

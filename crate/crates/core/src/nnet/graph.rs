//! Tape-based reverse-mode automatic differentiation over scalars.
//!
//! Nodes are appended to an arena as operations are recorded, so insertion
//! order is already a topological order. [`Graph::backward`] walks the arena
//! once from the output down to the first node.

/// Handle to a node in a [`Graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(u32);

impl Var {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Debug, Clone, Copy)]
enum Op {
    Leaf,
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Div(Var, Var),
    Neg(Var),
    Scale(Var, f64),
    Offset(Var),
    Max(Var, Var),
    Exp(Var),
    Ln(Var),
    Tanh(Var),
    Relu(Var),
    LeakyRelu(Var, f64),
    Sqrt(Var),
    Abs(Var),
    Square(Var),
    /// Value is fixed in the forward pass, adjoint flows through unchanged.
    StraightThrough(Var),
}

#[derive(Debug, Clone, Copy)]
struct Node {
    op: Op,
    value: f64,
}

#[derive(Debug, Default, Clone)]
pub struct Graph {
    nodes: Vec<Node>,
}

/// Adjoints of every node with respect to the seeded output(s).
#[derive(Debug, Clone)]
pub struct Gradients(Vec<f64>);

impl Gradients {
    pub fn wrt(&self, v: Var) -> f64 {
        self.0[v.index()]
    }

    pub fn wrt_all(&self, vars: &[Var]) -> Vec<f64> {
        vars.iter().map(|&v| self.wrt(v)).collect()
    }
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_capacity(n: usize) -> Self {
        Graph {
            nodes: Vec::with_capacity(n),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, op: Op, value: f64) -> Var {
        let id = u32::try_from(self.nodes.len()).expect("graph exceeds u32 nodes");
        self.nodes.push(Node { op, value });
        Var(id)
    }

    /// A differentiable leaf (parameter or input).
    pub fn input(&mut self, value: f64) -> Var {
        self.push(Op::Leaf, value)
    }

    pub fn inputs(&mut self, values: &[f64]) -> Vec<Var> {
        values.iter().map(|&v| self.input(v)).collect()
    }

    /// A leaf whose adjoint is simply never read.
    pub fn constant(&mut self, value: f64) -> Var {
        self.push(Op::Leaf, value)
    }

    pub fn value(&self, v: Var) -> f64 {
        self.nodes[v.index()].value
    }

    pub fn values(&self, vars: &[Var]) -> Vec<f64> {
        vars.iter().map(|&v| self.value(v)).collect()
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a) + self.value(b);
        self.push(Op::Add(a, b), v)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a) - self.value(b);
        self.push(Op::Sub(a, b), v)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a) * self.value(b);
        self.push(Op::Mul(a, b), v)
    }

    pub fn div(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a) / self.value(b);
        self.push(Op::Div(a, b), v)
    }

    pub fn neg(&mut self, a: Var) -> Var {
        let v = -self.value(a);
        self.push(Op::Neg(a), v)
    }

    pub fn scale(&mut self, a: Var, k: f64) -> Var {
        let v = self.value(a) * k;
        self.push(Op::Scale(a, k), v)
    }

    pub fn add_const(&mut self, a: Var, k: f64) -> Var {
        let v = self.value(a) + k;
        self.push(Op::Offset(a), v)
    }

    pub fn max(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a).max(self.value(b));
        self.push(Op::Max(a, b), v)
    }

    pub fn exp(&mut self, a: Var) -> Var {
        let v = self.value(a).exp();
        self.push(Op::Exp(a), v)
    }

    pub fn ln(&mut self, a: Var) -> Var {
        let v = self.value(a).ln();
        self.push(Op::Ln(a), v)
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let v = self.value(a).tanh();
        self.push(Op::Tanh(a), v)
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let v = self.value(a).max(0.0);
        self.push(Op::Relu(a), v)
    }

    pub fn leaky_relu(&mut self, a: Var, slope: f64) -> Var {
        let x = self.value(a);
        let v = if x > 0.0 { x } else { slope * x };
        self.push(Op::LeakyRelu(a, slope), v)
    }

    /// Square root; the derivative at exactly zero is taken as zero.
    pub fn sqrt(&mut self, a: Var) -> Var {
        let v = self.value(a).sqrt();
        self.push(Op::Sqrt(a), v)
    }

    pub fn abs(&mut self, a: Var) -> Var {
        let v = self.value(a).abs();
        self.push(Op::Abs(a), v)
    }

    pub fn square(&mut self, a: Var) -> Var {
        let x = self.value(a);
        self.push(Op::Square(a), x * x)
    }

    /// Replace the forward value of `a` with `value` while keeping the
    /// identity derivative.
    pub fn straight_through(&mut self, a: Var, value: f64) -> Var {
        self.push(Op::StraightThrough(a), value)
    }

    pub fn sum(&mut self, vars: &[Var]) -> Var {
        match vars.split_first() {
            None => self.constant(0.0),
            Some((&first, rest)) => rest.iter().fold(first, |acc, &v| self.add(acc, v)),
        }
    }

    /// `Σ coeffs[i] * vars[i]` with constant coefficients.
    pub fn weighted_sum(&mut self, vars: &[Var], coeffs: &[f64]) -> Var {
        debug_assert_eq!(vars.len(), coeffs.len());
        let mut acc: Option<Var> = None;
        for (&v, &c) in vars.iter().zip(coeffs) {
            if c == 0.0 {
                continue;
            }
            let term = if c == 1.0 { v } else { self.scale(v, c) };
            acc = Some(match acc {
                None => term,
                Some(a) => self.add(a, term),
            });
        }
        acc.unwrap_or_else(|| self.constant(0.0))
    }

    pub fn backward(&self, output: Var) -> Gradients {
        self.backward_seeded(&[(output, 1.0)])
    }

    /// Reverse sweep starting from arbitrary output adjoints.
    pub fn backward_seeded(&self, seeds: &[(Var, f64)]) -> Gradients {
        let mut adj = vec![0.0; self.nodes.len()];
        let mut top = 0;
        for &(v, s) in seeds {
            adj[v.index()] += s;
            top = top.max(v.index() + 1);
        }
        for i in (0..top).rev() {
            let g = adj[i];
            if g == 0.0 {
                continue;
            }
            let node = self.nodes[i];
            match node.op {
                Op::Leaf => {}
                Op::Add(a, b) => {
                    adj[a.index()] += g;
                    adj[b.index()] += g;
                }
                Op::Sub(a, b) => {
                    adj[a.index()] += g;
                    adj[b.index()] -= g;
                }
                Op::Mul(a, b) => {
                    let (va, vb) = (self.value(a), self.value(b));
                    adj[a.index()] += g * vb;
                    adj[b.index()] += g * va;
                }
                Op::Div(a, b) => {
                    let vb = self.value(b);
                    adj[a.index()] += g / vb;
                    adj[b.index()] -= g * node.value / vb;
                }
                Op::Neg(a) => adj[a.index()] -= g,
                Op::Scale(a, k) => adj[a.index()] += g * k,
                Op::Offset(a) | Op::StraightThrough(a) => adj[a.index()] += g,
                Op::Max(a, b) => {
                    if self.value(a) >= self.value(b) {
                        adj[a.index()] += g;
                    } else {
                        adj[b.index()] += g;
                    }
                }
                Op::Exp(a) => adj[a.index()] += g * node.value,
                Op::Ln(a) => adj[a.index()] += g / self.value(a),
                Op::Tanh(a) => adj[a.index()] += g * (1.0 - node.value * node.value),
                Op::Relu(a) => {
                    if self.value(a) > 0.0 {
                        adj[a.index()] += g;
                    }
                }
                Op::LeakyRelu(a, slope) => {
                    adj[a.index()] += if self.value(a) > 0.0 { g } else { g * slope };
                }
                Op::Sqrt(a) => {
                    if node.value > 0.0 {
                        adj[a.index()] += g * 0.5 / node.value;
                    }
                }
                Op::Abs(a) => {
                    let x = self.value(a);
                    if x > 0.0 {
                        adj[a.index()] += g;
                    } else if x < 0.0 {
                        adj[a.index()] -= g;
                    }
                }
                Op::Square(a) => adj[a.index()] += 2.0 * g * self.value(a),
            }
        }
        Gradients(adj)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn central_diff(f: impl Fn(f64) -> f64, x: f64) -> f64 {
        let h = 1e-6;
        (f(x + h) - f(x - h)) / (2.0 * h)
    }

    #[test]
    fn product_rule() {
        let mut g = Graph::new();
        let x = g.input(3.0);
        let y = g.mul(x, x);
        let grads = g.backward(y);
        assert_eq!(g.value(y), 9.0);
        assert_eq!(grads.wrt(x), 6.0);
    }

    #[test]
    fn unary_ops_match_finite_differences() {
        let cases: Vec<(fn(&mut Graph, Var) -> Var, fn(f64) -> f64, f64)> = vec![
            (|g, v| g.exp(v), f64::exp, 0.3),
            (|g, v| g.ln(v), f64::ln, 1.7),
            (|g, v| g.tanh(v), f64::tanh, -0.4),
            (|g, v| g.sqrt(v), f64::sqrt, 2.5),
            (|g, v| g.square(v), |x| x * x, -1.3),
            (|g, v| g.abs(v), f64::abs, -0.8),
            (
                |g, v| g.leaky_relu(v, 0.01),
                |x| if x > 0.0 { x } else { 0.01 * x },
                -2.0,
            ),
        ];
        for (op, f, x0) in cases {
            let mut g = Graph::new();
            let x = g.input(x0);
            let y = op(&mut g, x);
            let d = g.backward(y).wrt(x);
            assert!((d - central_diff(f, x0)).abs() < 1e-6, "x0={x0}");
        }
    }

    #[test]
    fn relu_blocks_negative_inputs() {
        let mut g = Graph::new();
        let x = g.input(-1.0);
        let y = g.relu(x);
        assert_eq!(g.backward(y).wrt(x), 0.0);
    }

    #[test]
    fn shared_subexpressions_accumulate() {
        // y = (a + b) * (a - b) = a^2 - b^2
        let mut g = Graph::new();
        let a = g.input(2.0);
        let b = g.input(0.5);
        let s = g.add(a, b);
        let d = g.sub(a, b);
        let y = g.mul(s, d);
        let grads = g.backward(y);
        assert!((grads.wrt(a) - 4.0).abs() < 1e-12);
        assert!((grads.wrt(b) + 1.0).abs() < 1e-12);
    }

    #[test]
    fn sqrt_at_zero_has_zero_derivative() {
        let mut g = Graph::new();
        let x = g.input(0.0);
        let y = g.sqrt(x);
        assert_eq!(g.backward(y).wrt(x), 0.0);
    }

    #[test]
    fn straight_through_passes_adjoint() {
        let mut g = Graph::new();
        let x = g.input(0.3);
        let q = g.straight_through(x, 0.25);
        let y = g.scale(q, 2.0);
        assert_eq!(g.value(y), 0.5);
        assert_eq!(g.backward(y).wrt(x), 2.0);
    }
}

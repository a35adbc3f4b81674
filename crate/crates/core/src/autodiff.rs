//! Scalar reverse-mode automatic differentiation.
//!
//! A [`Tape`] records every elementary operation performed on [`Var`]s.
//! [`Tape::gradient`] sweeps the recording backwards from arbitrary seeded
//! outputs, so a scalar loss can mix tape-tracked pieces with adjoints that
//! were derived by hand for matrix-valued intermediates.

use std::cell::RefCell;
use std::ops::{Add, Div, Mul, Neg, Sub};

#[derive(Clone, Copy)]
struct Node {
    parents: [usize; 2],
    weights: [f64; 2],
}

/// Recording of a computation graph.
#[derive(Default)]
pub struct Tape {
    nodes: RefCell<Vec<Node>>,
}

/// A tracked scalar living on a [`Tape`].
#[derive(Clone, Copy)]
pub struct Var<'t> {
    tape: &'t Tape,
    index: usize,
    value: f64,
}

impl std::fmt::Debug for Var<'_> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Var({}, {})", self.index, self.value)
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    fn push(&self, parents: [usize; 2], weights: [f64; 2]) -> usize {
        let mut nodes = self.nodes.borrow_mut();
        nodes.push(Node { parents, weights });
        nodes.len() - 1
    }

    /// Registers an independent variable.
    pub fn var(&self, value: f64) -> Var<'_> {
        let index = self.push([usize::MAX; 2], [0.0; 2]);
        Var { tape: self, index, value }
    }

    /// Registers a constant (a leaf whose adjoint is simply ignored).
    pub fn constant(&self, value: f64) -> Var<'_> {
        self.var(value)
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Backward sweep. `seeds` holds `(output, d loss / d output)` pairs;
    /// the returned vector is indexed by node and holds total adjoints.
    pub fn gradient(&self, seeds: &[(Var<'_>, f64)]) -> Vec<f64> {
        let nodes = self.nodes.borrow();
        let mut adj = vec![0.0; nodes.len()];
        for (v, s) in seeds {
            adj[v.index] += s;
        }
        for i in (0..nodes.len()).rev() {
            let a = adj[i];
            if a == 0.0 {
                continue;
            }
            let node = nodes[i];
            for k in 0..2 {
                let p = node.parents[k];
                if p != usize::MAX {
                    adj[p] += a * node.weights[k];
                }
            }
        }
        adj
    }

    /// Sum of many variables.
    pub fn sum<'t>(&'t self, terms: &[Var<'t>]) -> Var<'t> {
        let mut acc = self.constant(0.0);
        for t in terms {
            acc = acc + *t;
        }
        acc
    }
}

impl<'t> Var<'t> {
    pub fn value(&self) -> f64 {
        self.value
    }

    pub fn index(&self) -> usize {
        self.index
    }

    pub fn tape(&self) -> &'t Tape {
        self.tape
    }

    fn unary(self, value: f64, d: f64) -> Var<'t> {
        let index = self.tape.push([self.index, usize::MAX], [d, 0.0]);
        Var { tape: self.tape, index, value }
    }

    fn binary(self, other: Var<'t>, value: f64, da: f64, db: f64) -> Var<'t> {
        let index = self.tape.push([self.index, other.index], [da, db]);
        Var { tape: self.tape, index, value }
    }

    pub fn exp(self) -> Var<'t> {
        let e = self.value.exp();
        self.unary(e, e)
    }

    pub fn ln(self) -> Var<'t> {
        self.unary(self.value.ln(), 1.0 / self.value)
    }

    pub fn tanh(self) -> Var<'t> {
        let t = self.value.tanh();
        self.unary(t, 1.0 - t * t)
    }

    pub fn sqrt(self) -> Var<'t> {
        let s = self.value.sqrt();
        self.unary(s, 0.5 / s)
    }

    pub fn powi(self, n: i32) -> Var<'t> {
        let d = if n == 0 { 0.0 } else { n as f64 * self.value.powi(n - 1) };
        self.unary(self.value.powi(n), d)
    }

    pub fn abs(self) -> Var<'t> {
        let d = if self.value > 0.0 {
            1.0
        } else if self.value < 0.0 {
            -1.0
        } else {
            0.0
        };
        self.unary(self.value.abs(), d)
    }

    pub fn sin(self) -> Var<'t> {
        self.unary(self.value.sin(), self.value.cos())
    }

    pub fn cos(self) -> Var<'t> {
        self.unary(self.value.cos(), -self.value.sin())
    }

    /// Logistic function.
    pub fn sigmoid(self) -> Var<'t> {
        let s = sigmoid(self.value);
        self.unary(s, s * (1.0 - s))
    }

    /// `ln(1 + e^x)`, evaluated stably.
    pub fn softplus(self) -> Var<'t> {
        self.unary(softplus(self.value), sigmoid(self.value))
    }

    /// `ln(ln(1 + c / x²))` for `x > 0`.
    pub fn log_log1p_inv_sq(self, c: f64) -> Var<'t> {
        let x = self.value;
        let q = c / (x * x);
        let inner = q.ln_1p();
        let d = (1.0 / inner) * (1.0 / (1.0 + q)) * (-2.0 * q / x);
        self.unary(inner.ln(), d)
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn softplus(x: f64) -> f64 {
    if x > 30.0 {
        x
    } else {
        x.exp().ln_1p()
    }
}

impl<'t> Add for Var<'t> {
    type Output = Var<'t>;
    fn add(self, o: Var<'t>) -> Var<'t> {
        self.binary(o, self.value + o.value, 1.0, 1.0)
    }
}

impl<'t> Sub for Var<'t> {
    type Output = Var<'t>;
    fn sub(self, o: Var<'t>) -> Var<'t> {
        self.binary(o, self.value - o.value, 1.0, -1.0)
    }
}

impl<'t> Mul for Var<'t> {
    type Output = Var<'t>;
    fn mul(self, o: Var<'t>) -> Var<'t> {
        self.binary(o, self.value * o.value, o.value, self.value)
    }
}

impl<'t> Div for Var<'t> {
    type Output = Var<'t>;
    fn div(self, o: Var<'t>) -> Var<'t> {
        let inv = 1.0 / o.value;
        self.binary(o, self.value * inv, inv, -self.value * inv * inv)
    }
}

impl<'t> Neg for Var<'t> {
    type Output = Var<'t>;
    fn neg(self) -> Var<'t> {
        self.unary(-self.value, -1.0)
    }
}

impl<'t> Add<f64> for Var<'t> {
    type Output = Var<'t>;
    fn add(self, c: f64) -> Var<'t> {
        self.unary(self.value + c, 1.0)
    }
}

impl<'t> Sub<f64> for Var<'t> {
    type Output = Var<'t>;
    fn sub(self, c: f64) -> Var<'t> {
        self.unary(self.value - c, 1.0)
    }
}

impl<'t> Mul<f64> for Var<'t> {
    type Output = Var<'t>;
    fn mul(self, c: f64) -> Var<'t> {
        self.unary(self.value * c, c)
    }
}

impl<'t> Div<f64> for Var<'t> {
    type Output = Var<'t>;
    fn div(self, c: f64) -> Var<'t> {
        self.unary(self.value / c, 1.0 / c)
    }
}

//! Prior encodings of categorical level combinations and the parametric
//! maps that turn them into latent coordinates.

use std::ops::{Add, Mul, Sub};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::autodiff::{softplus, Var};
use crate::error::{contract, Result};

/// Scalars that parametric maps can be evaluated on: plain `f64` or tape
/// variables.
pub trait Scalar:
    Copy + Add<Output = Self> + Sub<Output = Self> + Mul<Output = Self> + Mul<f64, Output = Self>
{
    fn lift(&self, c: f64) -> Self;
    fn tanh_s(self) -> Self;
    fn softplus_s(self) -> Self;
    fn value(&self) -> f64;
}

impl Scalar for f64 {
    fn lift(&self, c: f64) -> Self {
        c
    }
    fn tanh_s(self) -> Self {
        self.tanh()
    }
    fn softplus_s(self) -> Self {
        softplus(self)
    }
    fn value(&self) -> f64 {
        *self
    }
}

impl<'t> Scalar for Var<'t> {
    fn lift(&self, c: f64) -> Self {
        self.tape().constant(c)
    }
    fn tanh_s(self) -> Self {
        self.tanh()
    }
    fn softplus_s(self) -> Self {
        self.softplus()
    }
    fn value(&self) -> f64 {
        Var::value(self)
    }
}

/// Level counts of the categorical inputs, in column order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CategoricalSpec {
    pub levels: Vec<usize>,
}

impl CategoricalSpec {
    pub fn new(levels: Vec<usize>) -> Result<Self> {
        if let Some(l) = levels.iter().find(|l| **l < 2) {
            return contract(format!("categorical variable with {l} levels; at least 2 required"));
        }
        Ok(Self { levels })
    }

    pub fn num_combinations(&self) -> usize {
        self.levels.iter().product()
    }

    pub fn check(&self, t: &[usize]) -> Result<()> {
        if t.len() != self.levels.len() {
            return contract(format!("expected {} level indices, got {}", self.levels.len(), t.len()));
        }
        for (i, (v, l)) in t.iter().zip(&self.levels).enumerate() {
            if v >= l {
                return contract(format!("level {v} out of range for variable {i} with {l} levels"));
            }
        }
        Ok(())
    }

    /// Mixed-radix index of a level combination.
    pub fn combination_index(&self, t: &[usize]) -> usize {
        t.iter().zip(&self.levels).fold(0, |acc, (v, l)| acc * l + v)
    }

    pub fn combination(&self, mut index: usize) -> Vec<usize> {
        let mut t = vec![0; self.levels.len()];
        for i in (0..self.levels.len()).rev() {
            t[i] = index % self.levels[i];
            index /= self.levels[i];
        }
        t
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum PriorEncoding {
    GroupedOneHot,
    /// One standard-normal row per level combination, drawn from a
    /// counter-based generator keyed by `(seed, combination index)`.
    RandomMatrix {
        seed: u64,
        width: usize,
    },
    /// One one-hot block per variable, each feeding its own map.
    PerVariableOneHot,
}

impl PriorEncoding {
    /// Widths of the encoded blocks (one block unless per-variable).
    pub fn widths(&self, spec: &CategoricalSpec) -> Vec<usize> {
        match self {
            PriorEncoding::GroupedOneHot => vec![spec.levels.iter().sum()],
            PriorEncoding::RandomMatrix { width, .. } => vec![*width],
            PriorEncoding::PerVariableOneHot => spec.levels.clone(),
        }
    }
}

pub fn one_hot(levels: usize, level: usize) -> Vec<f64> {
    let mut v = vec![0.0; levels];
    v[level] = 1.0;
    v
}

/// Encodes a level combination; returns one vector per encoded block.
pub fn encode_prior(spec: &CategoricalSpec, enc: &PriorEncoding, t: &[usize]) -> Result<Vec<Vec<f64>>> {
    spec.check(t)?;
    Ok(match enc {
        PriorEncoding::GroupedOneHot => {
            let mut v = Vec::new();
            for (l, lv) in spec.levels.iter().zip(t) {
                v.extend(one_hot(*l, *lv));
            }
            vec![v]
        }
        PriorEncoding::RandomMatrix { seed, width } => {
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            rng.set_stream(spec.combination_index(t) as u64);
            vec![(0..*width).map(|_| StandardNormal.sample(&mut rng)).collect()]
        }
        PriorEncoding::PerVariableOneHot => spec.levels.iter().zip(t).map(|(l, lv)| one_hot(*l, *lv)).collect(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum MapKind {
    Linear,
    /// Hidden layer sizes; hidden layers use tanh, the output is linear.
    FeedForward {
        hidden: Vec<usize>,
    },
}

/// A parametric map from an encoded vector to latent coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingMap {
    pub kind: MapKind,
    pub input: usize,
    pub output: usize,
    pub params: Vec<f64>,
}

impl EmbeddingMap {
    pub fn new(kind: MapKind, input: usize, output: usize) -> Self {
        let n = map_param_count(&kind, input, output);
        Self { kind, input, output, params: vec![0.0; n] }
    }

    /// Linear map with `A` given row-major as `input × output`.
    pub fn linear(a: Vec<f64>, input: usize, output: usize) -> Result<Self> {
        if a.len() != input * output {
            return contract("A has the wrong number of entries");
        }
        Ok(Self { kind: MapKind::Linear, input, output, params: a })
    }

    pub fn apply(&self, pi: &[f64]) -> Result<Vec<f64>> {
        if pi.len() != self.input {
            return contract(format!("map expects width {}, got {}", self.input, pi.len()));
        }
        Ok(map_forward(&self.kind, self.input, self.output, &self.params, pi))
    }
}

/// Free-function form of [`EmbeddingMap::apply`].
pub fn map_latent(map: &EmbeddingMap, pi: &[f64]) -> Result<Vec<f64>> {
    map.apply(pi)
}

pub(crate) fn layer_sizes(kind: &MapKind, input: usize, output: usize) -> Vec<usize> {
    match kind {
        MapKind::Linear => vec![input, output],
        MapKind::FeedForward { hidden } => {
            let mut s = vec![input];
            s.extend(hidden);
            s.push(output);
            s
        }
    }
}

pub fn map_param_count(kind: &MapKind, input: usize, output: usize) -> usize {
    match kind {
        MapKind::Linear => input * output,
        MapKind::FeedForward { .. } => {
            let s = layer_sizes(kind, input, output);
            s.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
        }
    }
}

/// Fan-in of every parameter, used to scale initial draws.
pub(crate) fn map_param_fan_in(kind: &MapKind, input: usize, output: usize) -> Vec<Option<usize>> {
    match kind {
        MapKind::Linear => vec![None; input * output],
        MapKind::FeedForward { .. } => {
            let s = layer_sizes(kind, input, output);
            let mut v = Vec::new();
            for w in s.windows(2) {
                v.extend(std::iter::repeat_n(Some(w[0]), w[0] * w[1]));
                v.extend(std::iter::repeat_n(Some(w[0]), w[1]));
            }
            v
        }
    }
}

/// Evaluates a map on constant input.
pub(crate) fn map_forward<S: Scalar>(kind: &MapKind, input: usize, output: usize, params: &[S], x: &[f64]) -> Vec<S> {
    match kind {
        MapKind::Linear => {
            let zero = params[0].lift(0.0);
            let mut out = vec![zero; output];
            for (i, xi) in x.iter().enumerate() {
                if *xi == 0.0 {
                    continue;
                }
                for (j, o) in out.iter_mut().enumerate() {
                    let a = params[i * output + j];
                    *o = if *xi == 1.0 { *o + a } else { *o + a * *xi };
                }
            }
            out
        }
        MapKind::FeedForward { .. } => {
            let lifted: Vec<S> = x.iter().map(|v| params[0].lift(*v)).collect();
            network_forward(&layer_sizes(kind, input, output), params, &lifted)
        }
    }
}

/// Dense network: tanh hidden layers, linear output.
pub(crate) fn network_forward<S: Scalar>(sizes: &[usize], params: &[S], x: &[S]) -> Vec<S> {
    let mut a: Vec<S> = x.to_vec();
    let mut off = 0;
    let layers = sizes.len() - 1;
    for (li, w) in sizes.windows(2).enumerate() {
        let (nin, nout) = (w[0], w[1]);
        let weights = &params[off..off + nin * nout];
        let bias = &params[off + nin * nout..off + nin * nout + nout];
        off += nin * nout + nout;
        let mut next = Vec::with_capacity(nout);
        for j in 0..nout {
            let mut s = bias[j];
            for i in 0..nin {
                s = s + weights[j * nin + i] * a[i];
            }
            next.push(if li + 1 < layers { s.tanh_s() } else { s });
        }
        a = next;
    }
    a
}

/// Variational source embedding `z = μ_z(π_s) + L_z(π_s) ε`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbabilisticEmbedding {
    pub sources: usize,
    pub dim: usize,
    pub hidden: usize,
    pub params: Vec<f64>,
    pub train_draws: usize,
    pub predict_draws: usize,
}

impl ProbabilisticEmbedding {
    pub fn new(sources: usize, dim: usize) -> Self {
        let mut pe = Self { sources, dim, hidden: 5, params: vec![], train_draws: 20, predict_draws: 30 };
        pe.params = vec![0.0; pe.param_count()];
        pe
    }

    pub fn kind(&self) -> MapKind {
        MapKind::FeedForward { hidden: vec![self.hidden] }
    }

    pub fn head_width(&self) -> usize {
        self.dim + self.dim * (self.dim + 1) / 2
    }

    pub fn param_count(&self) -> usize {
        map_param_count(&self.kind(), self.sources, self.head_width())
    }

    /// Mean and lower-triangular factor (row-major, full `dim × dim`).
    pub fn moments(&self, pi: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        if pi.len() != self.sources {
            return contract("source encoding width mismatch");
        }
        Ok(generator_moments(self, &self.params, pi))
    }
}

pub(crate) fn generator_moments<S: Scalar>(pe: &ProbabilisticEmbedding, params: &[S], pi: &[f64]) -> (Vec<S>, Vec<S>) {
    let out = map_forward(&pe.kind(), pe.sources, pe.head_width(), params, pi);
    let d = pe.dim;
    let mu = out[..d].to_vec();
    let zero = params[0].lift(0.0);
    let mut l = vec![zero; d * d];
    let mut k = d;
    for i in 0..d {
        for j in 0..=i {
            l[i * d + j] = if i == j { out[k].softplus_s() } else { out[k] };
            k += 1;
        }
    }
    (mu, l)
}

pub(crate) fn reparameterize<S: Scalar>(mu: &[S], l: &[S], eps: &[f64]) -> Vec<S> {
    let d = mu.len();
    (0..d)
        .map(|i| {
            let mut z = mu[i];
            for j in 0..=i {
                z = z + l[i * d + j] * eps[j];
            }
            z
        })
        .collect()
}

/// Draws `z = μ_z + L_z ε` for one source encoding.
pub fn sample_latent(pe: &ProbabilisticEmbedding, pi_s: &[f64], eps: &[f64]) -> Result<Vec<f64>> {
    if eps.len() != pe.dim {
        return contract(format!("ε has length {}, expected {}", eps.len(), pe.dim));
    }
    let (mu, l) = pe.moments(pi_s)?;
    Ok(reparameterize(&mu, &l, eps))
}

/// Correlation between two sources implied by their latent positions.
pub fn source_correlation(z: &[f64], z2: &[f64]) -> Result<f64> {
    if z.len() != z2.len() {
        return contract("latent vectors differ in length");
    }
    let d: f64 = z.iter().zip(z2).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok((-d).exp())
}

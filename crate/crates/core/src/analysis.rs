//! Accuracy metrics and global sensitivity analysis.

use serde::{Deserialize, Serialize};

use crate::data::Inputs;
use crate::embedding::PriorEncoding;
use crate::error::{contract, Error, Result};
use crate::gp::TrainedModel;
use crate::qmc;
use crate::training::interval_score;

/// Sample standard deviation (`n - 1` denominator).
pub fn sample_std(v: &[f64]) -> f64 {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
}

fn normalizer(y: &[f64]) -> Result<f64> {
    if y.len() < 2 {
        return Err(Error::MetricUndefined("at least two responses are needed".into()));
    }
    let s = sample_std(y);
    if !(s > 0.0) {
        return Err(Error::MetricUndefined("responses have zero spread".into()));
    }
    Ok(s)
}

/// Root-mean-square error over the sample standard deviation of `y`.
pub fn nrmse(y: &[f64], mu: &[f64]) -> Result<f64> {
    if y.len() != mu.len() || y.is_empty() {
        return contract("nrmse needs equally sized, non-empty inputs");
    }
    let s = normalizer(y)?;
    let mse = y.iter().zip(mu).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / y.len() as f64;
    Ok(mse.sqrt() / s)
}

/// Mean interval score of the central `1 - v` intervals over the sample
/// standard deviation of `y`.
pub fn nis(y: &[f64], mu: &[f64], tau: &[f64], v: f64) -> Result<f64> {
    if tau.iter().any(|t| !(*t >= 0.0)) {
        return contract("predictive standard deviations must be non-negative");
    }
    let s = normalizer(y)?;
    Ok(interval_score(mu, tau, y, v)? / s)
}

/// Input domain for sensitivity analysis: numeric ranges followed by
/// categorical level counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputDomain {
    pub names: Vec<String>,
    pub ranges: Vec<(f64, f64)>,
    pub levels: Vec<usize>,
}

impl InputDomain {
    pub fn numeric(ranges: Vec<(f64, f64)>) -> Self {
        let names = (0..ranges.len()).map(|i| format!("x{}", i + 1)).collect();
        Self { names, ranges, levels: vec![] }
    }

    pub fn dim(&self) -> usize {
        self.ranges.len() + self.levels.len()
    }

    fn validate(&self) -> Result<()> {
        if self.dim() == 0 {
            return contract("the input domain is empty");
        }
        if self.names.len() != self.dim() {
            return contract("one name per input is required");
        }
        if self.ranges.iter().any(|(lo, hi)| !(lo.is_finite() && hi.is_finite() && lo <= hi)) {
            return contract("ranges must be finite and ordered");
        }
        if self.levels.contains(&0) {
            return contract("categorical inputs need at least one level");
        }
        Ok(())
    }

    /// Maps unit-cube coordinates to an input row; categorical columns use
    /// inverse-CDF binning.
    fn row(&self, u: &[f64], x: &mut Vec<Vec<f64>>, t: &mut Vec<Vec<usize>>) {
        let dx = self.ranges.len();
        x.push(self.ranges.iter().zip(u).map(|((lo, hi), v)| lo + v * (hi - lo)).collect());
        t.push(self.levels.iter().zip(&u[dx..]).map(|(l, v)| ((v * *l as f64) as usize).min(l - 1)).collect());
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityReport {
    pub names: Vec<String>,
    pub main: Vec<f64>,
    pub total: Vec<f64>,
    /// Latent-distance sensitivity per categorical input, when computed.
    pub s_cat: Vec<f64>,
    pub samples: usize,
    pub seed: u64,
    pub constant_output: bool,
}

impl SensitivityReport {
    /// Flat `key value` lines.
    pub fn to_table(&self) -> String {
        let mut s = format!("samples {}\nseed {}\nconstant_output {}\n", self.samples, self.seed, self.constant_output);
        for (i, n) in self.names.iter().enumerate() {
            s.push_str(&format!("{n}.main {}\n{n}.total {}\n", self.main[i], self.total[i]));
        }
        let dt = self.s_cat.len();
        for (k, v) in self.s_cat.iter().enumerate() {
            s.push_str(&format!("{}.s_cat {v}\n", self.names[self.names.len() - dt + k]));
        }
        s
    }
}

const CHUNK: usize = 4096;

/// Main and total Sobol indices by the pick-freeze estimator on two
/// quasi-random `n x d` base matrices `A` and `B`:
/// `S_i = mean(f_B (f_ABi - f_A)) / V` and
/// `S_Ti = mean((f_A - f_ABi)^2) / (2V)`, where `AB_i` is `A` with column
/// `i` taken from `B`. `f` maps a batch of inputs to responses.
pub fn sobol_indices<F>(f: F, domain: &InputDomain, n: usize, seed: u64) -> Result<SensitivityReport>
where
    F: Fn(&Inputs) -> Result<Vec<f64>>,
{
    domain.validate()?;
    if n < 2 {
        return contract("at least two base samples are needed");
    }
    let d = domain.dim();
    let mut seq = qmc::Sequence::seeded(2 * d, seed);
    let base: Vec<Vec<f64>> = seq.take_points(n);
    let eval = |pick: &dyn Fn(&[f64]) -> Vec<f64>| -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(n);
        for chunk in base.chunks(CHUNK) {
            let mut x = Vec::with_capacity(chunk.len());
            let mut t = Vec::with_capacity(chunk.len());
            for u in chunk {
                domain.row(&pick(u), &mut x, &mut t);
            }
            let len = x.len();
            let q = Inputs { x, t, s: vec![0; len], zeta: vec![None; len] };
            let y = f(&q)?;
            if y.len() != len {
                return contract("model returned the wrong number of responses");
            }
            out.extend(y);
        }
        Ok(out)
    };
    let fa = eval(&|u| u[..d].to_vec())?;
    let fb = eval(&|u| u[d..].to_vec())?;
    let all: Vec<f64> = fa.iter().chain(&fb).copied().collect();
    let shifted: Vec<f64> = all.iter().map(|v| v - all[0]).collect();
    let mean = shifted.iter().sum::<f64>() / all.len() as f64;
    let var = shifted.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / all.len() as f64;
    let scale = all.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
    let mut report = SensitivityReport {
        names: domain.names.clone(),
        main: vec![0.0; d],
        total: vec![0.0; d],
        s_cat: vec![],
        samples: n,
        seed,
        constant_output: var <= (1e-14 * scale).powi(2),
    };
    if report.constant_output {
        return Ok(report);
    }
    for i in 0..d {
        let fab = eval(&|u| {
            let mut r = u[..d].to_vec();
            r[i] = u[d + i];
            r
        })?;
        let nf = n as f64;
        report.main[i] = (0..n).map(|k| fb[k] * (fab[k] - fa[k])).sum::<f64>() / nf / var;
        report.total[i] = (0..n).map(|k| (fa[k] - fab[k]).powi(2)).sum::<f64>() / (2.0 * nf) / var;
    }
    Ok(report)
}

/// Mean pairwise Euclidean distance among latent points.
pub fn mean_pairwise_distance(points: &[Vec<f64>]) -> f64 {
    let mut total = 0.0;
    let mut count = 0usize;
    for i in 0..points.len() {
        for j in i + 1..points.len() {
            total += points[i].iter().zip(&points[j]).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            count += 1;
        }
    }
    if count == 0 {
        0.0
    } else {
        total / count as f64
    }
}

/// Latent positions of the levels of categorical input `variable`; the
/// model must give each categorical input its own embedding.
pub fn level_positions(model: &TrainedModel, variable: usize) -> Result<Vec<Vec<f64>>> {
    let cfg = model.config();
    if cfg.encoding != PriorEncoding::PerVariableOneHot {
        return contract("latent-distance sensitivity needs per-variable embeddings");
    }
    let levels = &cfg.categorical.levels;
    if variable >= levels.len() {
        return contract(format!("input {variable} is not categorical"));
    }
    let q = cfg.embedding_dim;
    (0..levels[variable])
        .map(|l| {
            let mut t = vec![0; levels.len()];
            t[variable] = l;
            Ok(model.latent_of(&t)?[variable * q..(variable + 1) * q].to_vec())
        })
        .collect()
}

/// Mean pairwise latent distance among the levels of a categorical input.
pub fn s_cat(model: &TrainedModel, variable: usize) -> Result<f64> {
    Ok(mean_pairwise_distance(&level_positions(model, variable)?))
}

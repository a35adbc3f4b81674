//! MAP estimation: multi-start optimization, noise-floor continuation and
//! the interval-score penalty.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{contract, Error, Result};
use crate::optim::{minimize, LbfgsConfig, Problem, Status, Step};
use crate::stats::norm_quantile;

/// Interval-score penalty settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntervalScoreConfig {
    /// Miss level of the central prediction interval.
    pub v: f64,
    /// Penalty scale.
    pub eps: f64,
}

impl Default for IntervalScoreConfig {
    fn default() -> Self {
        Self { v: 0.05, eps: 0.08 }
    }
}

impl IntervalScoreConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.v > 0.0 && self.v < 1.0) {
            return contract("interval miss level must lie in (0, 1)");
        }
        if !(self.eps >= 0.0) {
            return contract("interval penalty scale must be non-negative");
        }
        Ok(())
    }

    /// Critical value of the interval, quoted to two decimals as in
    /// standard tables (1.96 for `v = 0.05`).
    pub fn z(&self) -> f64 {
        (norm_quantile(1.0 - self.v / 2.0) * 100.0).round() / 100.0
    }
}

/// Mean interval score of predictions `(mu, tau)` against `y`.
pub fn interval_score(mu: &[f64], tau: &[f64], y: &[f64], v: f64) -> Result<f64> {
    if mu.len() != y.len() || tau.len() != y.len() || y.is_empty() {
        return contract("interval score needs equally sized, non-empty inputs");
    }
    let isc = IntervalScoreConfig { v, eps: 0.0 };
    isc.validate()?;
    let z = isc.z();
    let total: f64 = (0..y.len()).map(|i| crate::objective::interval_terms(y[i], mu[i], tau[i], z, v).0).sum();
    Ok(total / y.len() as f64)
}

/// `L + ε|L|·IS`.
pub fn penalized_loss(loss: f64, score: f64, eps: f64) -> f64 {
    loss + eps * loss.abs() * score
}

/// Multi-start optimizer settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    pub num_restarts: usize,
    pub lbfgs: LbfgsConfig,
    /// Worker threads; `None` uses the global pool.
    pub n_jobs: Option<usize>,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self { num_restarts: 32, lbfgs: LbfgsConfig::default(), n_jobs: None }
    }
}

impl OptimizerConfig {
    pub fn with_restarts(num_restarts: usize) -> Self {
        Self { num_restarts, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_restarts == 0 {
            return contract("at least one restart is required");
        }
        if self.n_jobs == Some(0) {
            return contract("n_jobs must be positive");
        }
        Ok(())
    }
}

/// Outcome of one optimizer start.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RestartRecord {
    pub index: usize,
    pub start: Vec<f64>,
    pub solution: Vec<f64>,
    /// Final loss; `None` when the run failed.
    pub loss: Option<f64>,
    pub iterations: usize,
    pub status: Status,
    pub trace: Vec<Step>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapFit {
    pub x: Vec<f64>,
    pub loss: f64,
    pub best: usize,
    pub restarts: Vec<RestartRecord>,
}

/// Iteration keys reserved per restart.
const KEY_STRIDE: usize = 1 << 20;
/// Key whose draws are used to compare restarts of a stochastic objective.
pub(crate) const SELECTION_KEY: usize = usize::MAX / 2;

/// Minimizes `problem` from every start and keeps the lowest final loss,
/// breaking ties by restart index.
pub fn fit_map<P: Problem>(
    problem: &P,
    bounds: (&[f64], &[f64]),
    starts: &[Vec<f64>],
    cfg: &OptimizerConfig,
) -> Result<MapFit> {
    cfg.validate()?;
    let (lo, hi) = bounds;
    if lo.len() != problem.dim() || hi.len() != problem.dim() {
        return contract("bounds do not match the problem dimension");
    }
    if starts.is_empty() {
        return contract("no optimizer starts given");
    }
    let run = |i: usize| -> RestartRecord {
        let r = minimize(problem, lo, hi, &starts[i], &cfg.lbfgs, i * KEY_STRIDE);
        let mut loss = (r.status != Status::EvaluationFailed && r.f.is_finite()).then_some(r.f);
        if loss.is_some() && problem.refreshes() {
            loss = problem.eval(&r.x, SELECTION_KEY).map(|(f, _)| f);
        }
        RestartRecord {
            index: i,
            start: starts[i].clone(),
            solution: r.x,
            loss,
            iterations: r.iterations,
            status: r.status,
            trace: r.trace,
        }
    };
    let records: Vec<RestartRecord> = match cfg.n_jobs {
        Some(1) => (0..starts.len()).map(run).collect(),
        Some(k) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(k)
                .build()
                .map_err(|e| Error::Contract(format!("thread pool: {e}")))?;
            pool.install(|| (0..starts.len()).into_par_iter().map(run).collect())
        }
        None => (0..starts.len()).into_par_iter().map(run).collect(),
    };
    let best = records
        .iter()
        .filter_map(|r| r.loss.map(|l| (l, r.index)))
        .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    match best {
        Some((loss, i)) => Ok(MapFit { x: records[i].solution.clone(), loss, best: i, restarts: records }),
        None => Err(Error::TrainingFailed {
            restarts: records.len(),
            diagnostics: records.iter().map(|r| format!("restart {}: {:?}", r.index, r.status)).collect(),
        }),
    }
}

/// `num_restarts` starts drawn uniformly inside the box; restart `i` uses
/// stream `i` of the seeded generator.
pub fn uniform_starts(lo: &[f64], hi: &[f64], num_restarts: usize, seed: u64) -> Vec<Vec<f64>> {
    use rand::Rng;
    (0..num_restarts)
        .map(|i| {
            let mut rng = restart_rng(seed, i);
            lo.iter().zip(hi).map(|(l, h)| rng.random_range(*l..=*h)).collect()
        })
        .collect()
}

pub(crate) fn restart_rng(seed: u64, i: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(i as u64);
    rng
}

/// Descending noise floors tried by [`crate::gp::continuation_fit`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContinuationSchedule {
    pub floors: Vec<f64>,
}

impl Default for ContinuationSchedule {
    fn default() -> Self {
        Self { floors: vec![1e-2, 1e-3, 1e-4, 1e-6] }
    }
}

impl ContinuationSchedule {
    pub fn validate(&self) -> Result<()> {
        if self.floors.is_empty() {
            return contract("continuation schedule is empty");
        }
        if self.floors.iter().any(|f| !(*f > 0.0)) {
            return contract("continuation floors must be positive");
        }
        if self.floors.windows(2).any(|w| w[1] >= w[0]) {
            return contract("continuation floors must be strictly decreasing");
        }
        Ok(())
    }
}

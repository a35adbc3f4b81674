//! Cost-aware single- and multi-fidelity Bayesian optimization.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::benchmarks::BenchmarkProblem;
use crate::config::ModelConfig;
use crate::data::{Inputs, MfDataset};
use crate::error::{contract, Error, Result};
use crate::gp::FitOptions;
use crate::multifidelity::Surrogate;
use crate::optim::{minimize, FnProblem, LbfgsConfig};
use crate::qmc;
use crate::stats::{norm_cdf, norm_pdf};
use crate::training::{IntervalScoreConfig, OptimizerConfig};

/// Smallest predictive standard deviation used by the acquisitions.
pub const TAU_FLOOR: f64 = 1e-12;
/// Change of the high-fidelity incumbent that counts as an improvement.
pub const IMPROVEMENT_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AcquisitionKind {
    /// Exploration density for low-fidelity sources and predicted
    /// improvement for the high-fidelity source, each per unit cost.
    CostAware,
    /// Expected improvement on the high-fidelity source only.
    ExpectedImprovement,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BOConfig {
    /// Query cost per source.
    pub costs: Vec<f64>,
    pub max_cost: f64,
    /// Iterations without high-fidelity improvement tolerated.
    pub stall_limit: usize,
    pub maximize: bool,
    /// Space-filling candidates per source.
    pub pool_size: usize,
    /// Best candidates refined by local search.
    pub polish: usize,
    /// Refit with the interval-score penalty.
    pub interval_score: bool,
    pub penalty: IntervalScoreConfig,
    pub acquisition: AcquisitionKind,
    /// Restarts of a refit are a quarter of `optimizer.num_restarts`.
    pub optimizer: OptimizerConfig,
    pub model: ModelConfig,
    pub max_iterations: Option<usize>,
}

impl Default for BOConfig {
    fn default() -> Self {
        Self {
            costs: vec![1.0],
            max_cost: 40000.0,
            stall_limit: 50,
            maximize: false,
            pool_size: 2000,
            polish: 5,
            interval_score: true,
            penalty: IntervalScoreConfig::default(),
            acquisition: AcquisitionKind::CostAware,
            optimizer: OptimizerConfig::default(),
            model: ModelConfig::default(),
            max_iterations: None,
        }
    }
}

impl BOConfig {
    pub fn validate(&self) -> Result<()> {
        if self.costs.is_empty() || self.costs.iter().any(|c| !(*c > 0.0 && c.is_finite())) {
            return contract("query costs must be positive");
        }
        if !(self.max_cost > 0.0) {
            return contract("the cost budget must be positive");
        }
        if self.pool_size == 0 {
            return contract("the candidate pool is empty");
        }
        if self.model.sources != self.costs.len() {
            return contract(format!("{} costs given for {} sources", self.costs.len(), self.model.sources));
        }
        self.penalty.validate()?;
        self.optimizer.validate()
    }

    /// Sources the acquisition ranges over.
    fn active_sources(&self) -> Vec<usize> {
        match self.acquisition {
            AcquisitionKind::CostAware => (0..self.costs.len()).collect(),
            AcquisitionKind::ExpectedImprovement => vec![0],
        }
    }
}

/// Value of a candidate with predictive mean `mu` and standard deviation
/// `tau` on the maximization scale, against incumbent `y_star`.
/// Low-fidelity sources score `τ φ((y* − μ)/τ) / O`; the high-fidelity
/// source (`hf`) scores `(μ − y*) / O`.
pub fn acquisition_value(mu: f64, tau: f64, y_star: f64, cost: f64, hf: bool) -> f64 {
    if hf {
        (mu - y_star) / cost
    } else {
        let tau = if tau > TAU_FLOOR { tau } else { TAU_FLOOR };
        tau * norm_pdf((y_star - mu) / tau) / cost
    }
}

/// Expected improvement over `y_star` on the maximization scale.
pub fn expected_improvement(mu: f64, tau: f64, y_star: f64) -> f64 {
    let tau = if tau > TAU_FLOOR { tau } else { TAU_FLOOR };
    let z = (mu - y_star) / tau;
    (mu - y_star) * norm_cdf(z) + tau * norm_pdf(z)
}

/// A queried value together with the input actually evaluated.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub x: Vec<f64>,
    pub t: Vec<usize>,
    pub y: f64,
}

/// Queryable data sources over a shared input domain.
pub trait Oracle {
    fn num_sources(&self) -> usize;
    fn ranges(&self) -> Vec<(f64, f64)>;
    fn levels(&self) -> Vec<usize>;
    fn query(&mut self, source: usize, x: &[f64], t: &[usize]) -> Result<Observation>;
}

/// Analytic benchmark sources with optional observation noise.
pub struct BenchmarkOracle {
    pub problem: BenchmarkProblem,
    pub with_noise: bool,
    rng: ChaCha8Rng,
}

impl BenchmarkOracle {
    pub fn new(problem: BenchmarkProblem, with_noise: bool, seed: u64) -> Self {
        Self { problem, with_noise, rng: ChaCha8Rng::seed_from_u64(seed) }
    }
}

impl Oracle for BenchmarkOracle {
    fn num_sources(&self) -> usize {
        self.problem.num_sources()
    }
    fn ranges(&self) -> Vec<(f64, f64)> {
        self.problem.ranges.clone()
    }
    fn levels(&self) -> Vec<usize> {
        self.problem.levels()
    }
    fn query(&mut self, source: usize, x: &[f64], t: &[usize]) -> Result<Observation> {
        if self.problem.calibration.is_some() {
            return contract("calibration problems cannot be optimized directly");
        }
        let mut y = self.problem.evaluate(source, x, t, None)?;
        if self.with_noise {
            let e: f64 = StandardNormal.sample(&mut self.rng);
            y += self.problem.sources[source].noise_std * e;
        }
        Ok(Observation { x: x.to_vec(), t: t.to_vec(), y })
    }
}

/// Sources backed by a finite table: a query returns the nearest unused
/// row of the requested source and removes it.
pub struct TableOracle {
    table: MfDataset,
    used: Vec<bool>,
    ranges: Vec<(f64, f64)>,
    levels: Vec<usize>,
}

impl TableOracle {
    pub fn new(table: MfDataset) -> Result<Self> {
        if table.is_empty() {
            return contract("the candidate table is empty");
        }
        let dx = table.inputs.dx();
        let ranges = (0..dx)
            .map(|k| {
                table
                    .inputs
                    .x
                    .iter()
                    .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), r| (lo.min(r[k]), hi.max(r[k])))
            })
            .collect();
        let levels =
            (0..table.inputs.dt()).map(|k| table.inputs.t.iter().map(|r| r[k] + 1).max().unwrap_or(1)).collect();
        let used = vec![false; table.len()];
        Ok(Self { table, used, ranges, levels })
    }

    /// Takes the first `counts[j]` unused rows of each source as initial
    /// data.
    pub fn initial(&mut self, counts: &[usize]) -> Result<MfDataset> {
        let mut out = MfDataset::default();
        for (j, n) in counts.iter().enumerate() {
            let rows: Vec<usize> =
                (0..self.table.len()).filter(|i| !self.used[*i] && self.table.inputs.s[*i] == j).take(*n).collect();
            if rows.len() < *n {
                return Err(Error::Data(format!("source {j} has fewer than {n} rows")));
            }
            for i in rows {
                self.used[i] = true;
                out.append(&self.table.select(&[i]));
            }
        }
        Ok(out)
    }

    pub fn remaining(&self) -> usize {
        self.used.iter().filter(|u| !**u).count()
    }
}

impl Oracle for TableOracle {
    fn num_sources(&self) -> usize {
        self.table.num_sources()
    }
    fn ranges(&self) -> Vec<(f64, f64)> {
        self.ranges.clone()
    }
    fn levels(&self) -> Vec<usize> {
        self.levels.clone()
    }
    fn query(&mut self, source: usize, x: &[f64], t: &[usize]) -> Result<Observation> {
        let inp = &self.table.inputs;
        let dist = |i: usize| -> f64 {
            let num: f64 = inp.x[i]
                .iter()
                .zip(x)
                .zip(&self.ranges)
                .map(|((a, b), (lo, hi))| ((a - b) / (hi - lo).max(f64::MIN_POSITIVE)).powi(2))
                .sum();
            let cat = inp.t[i].iter().zip(t).filter(|(a, b)| a != b).count() as f64;
            num + cat
        };
        let best = (0..self.table.len())
            .filter(|i| !self.used[*i] && inp.s[*i] == source)
            .min_by(|a, b| dist(*a).total_cmp(&dist(*b)).then(a.cmp(b)))
            .ok_or_else(|| Error::Query(format!("source {source} has no unused rows")))?;
        self.used[best] = true;
        Ok(Observation { x: inp.x[best].clone(), t: inp.t[best].clone(), y: self.table.y[best] })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub source: usize,
    pub x: Vec<f64>,
    pub t: Vec<usize>,
    pub y: f64,
    pub acquisition: f64,
    /// High-fidelity incumbent after this query.
    pub incumbent: Option<f64>,
    /// Accumulated cost after this query.
    pub cost: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum StopReason {
    Running,
    Budget,
    Stalled,
    IterationLimit,
    QueryFailed(String),
    ModelFailed(String),
}

#[derive(Debug, Clone)]
pub struct BOState {
    pub data: MfDataset,
    /// Best observed value per source under the active direction.
    pub incumbents: Vec<Option<f64>>,
    pub cost: f64,
    pub log: Vec<IterationRecord>,
    pub stall: usize,
    pub stop: StopReason,
    maximize: bool,
}

impl BOState {
    pub fn new(data: MfDataset, sources: usize, maximize: bool) -> Self {
        let mut s = Self {
            data,
            incumbents: vec![None; sources],
            cost: 0.0,
            log: vec![],
            stall: 0,
            stop: StopReason::Running,
            maximize,
        };
        for i in 0..s.data.len() {
            let (j, y) = (s.data.inputs.s[i], s.data.y[i]);
            if j < sources {
                s.update_incumbent(j, y);
            }
        }
        s
    }

    fn better(&self, a: f64, b: f64) -> bool {
        if self.maximize {
            a > b + IMPROVEMENT_TOL
        } else {
            a < b - IMPROVEMENT_TOL
        }
    }

    /// Records `y` for source `j`; returns whether the incumbent improved.
    fn update_incumbent(&mut self, j: usize, y: f64) -> bool {
        match self.incumbents[j] {
            Some(cur) if !self.better(y, cur) => false,
            _ => {
                self.incumbents[j] = Some(y);
                true
            }
        }
    }

    /// Sum of the costs of the logged queries.
    pub fn replay_cost(&self, costs: &[f64]) -> f64 {
        self.log.iter().map(|r| costs[r.source]).sum()
    }

    /// Incumbent on the maximization scale.
    fn oriented_incumbent(&self, j: usize) -> Option<f64> {
        self.incumbents[j].map(|v| if self.maximize { v } else { -v })
    }

    /// Training data on the maximization scale.
    fn oriented_data(&self) -> MfDataset {
        let mut d = self.data.clone();
        if !self.maximize {
            d.y.iter_mut().for_each(|v| *v = -*v);
        }
        d
    }
}

/// Candidate chosen by [`propose_next`].
#[derive(Debug, Clone, PartialEq)]
pub struct Proposal {
    pub source: usize,
    pub x: Vec<f64>,
    pub t: Vec<usize>,
    pub value: f64,
}

/// Scores a batch of candidates of source `j`.
pub fn acquisition_batch(model: &Surrogate, q: &Inputs, j: usize, state: &BOState, cfg: &BOConfig) -> Result<Vec<f64>> {
    scores(model, q, j, state, cfg, cfg.costs[j])
}

/// Acquisition values with the cost of source `j` replaced by `cost`.
fn scores(model: &Surrogate, q: &Inputs, j: usize, state: &BOState, cfg: &BOConfig, cost: f64) -> Result<Vec<f64>> {
    let y_star =
        state.oriented_incumbent(j).ok_or_else(|| Error::Contract(format!("source {j} has no observations")))?;
    let p = model.predict(q, false)?;
    let tau = p.std();
    Ok((0..q.len())
        .map(|i| match cfg.acquisition {
            AcquisitionKind::CostAware => acquisition_value(p.mean[i], tau[i], y_star, cost, j == 0),
            AcquisitionKind::ExpectedImprovement => expected_improvement(p.mean[i], tau[i], y_star),
        })
        .collect())
}

/// Acquisition value of one candidate.
pub fn acquisition(
    model: &Surrogate,
    x: &[f64],
    t: &[usize],
    j: usize,
    state: &BOState,
    cfg: &BOConfig,
) -> Result<f64> {
    let q = Inputs { x: vec![x.to_vec()], t: vec![t.to_vec()], s: vec![j], zeta: vec![None] };
    Ok(acquisition_batch(model, &q, j, state, cfg)?[0])
}

/// Source index, numeric inputs, levels and acquisition values of one
/// source's candidates.
pub type ScoredCandidates = (usize, Vec<Vec<f64>>, Vec<Vec<usize>>, Vec<f64>);

/// Selects the best scoring candidate among the candidates of every
/// active source; ties go to the lower source, then the earlier
/// candidate.
pub fn select(scored: &[ScoredCandidates]) -> Result<Proposal> {
    let mut best: Option<Proposal> = None;
    for (j, xs, ts, vals) in scored {
        for (i, v) in vals.iter().enumerate() {
            if v.is_nan() {
                continue;
            }
            if best.as_ref().is_none_or(|b| *v > b.value) {
                best = Some(Proposal { source: *j, x: xs[i].clone(), t: ts[i].clone(), value: *v });
            }
        }
    }
    best.ok_or_else(|| Error::Contract("the candidate pool is empty".into()))
}

fn pool(ranges: &[(f64, f64)], levels: &[usize], n: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<Vec<usize>>) {
    let dx = ranges.len();
    let mut seq = qmc::Sequence::seeded(dx + levels.len(), seed);
    let mut xs = Vec::with_capacity(n);
    let mut ts = Vec::with_capacity(n);
    for _ in 0..n {
        let u = seq.next_point();
        xs.push(ranges.iter().zip(&u).map(|((lo, hi), v)| lo + v * (hi - lo)).collect());
        ts.push(levels.iter().zip(&u[dx..]).map(|(l, v)| ((v * *l as f64) as usize).min(l - 1)).collect());
    }
    (xs, ts)
}

/// Local ascent on the acquisition over the numeric inputs with the
/// categorical levels held fixed, run on cost-free values; gradients by
/// central differences.
fn polish(
    model: &Surrogate,
    x0: &[f64],
    t: &[usize],
    j: usize,
    state: &BOState,
    cfg: &BOConfig,
    ranges: &[(f64, f64)],
) -> Option<(Vec<f64>, f64)> {
    let dx = x0.len();
    let lo: Vec<f64> = ranges.iter().map(|r| r.0).collect();
    let hi: Vec<f64> = ranges.iter().map(|r| r.1).collect();
    let steps: Vec<f64> = ranges.iter().map(|(a, b)| 1e-6 * (b - a).max(1e-12)).collect();
    let f = |x: &[f64]| -> (f64, Vec<f64>) {
        let mut pts = vec![x.to_vec()];
        for k in 0..dx {
            for sign in [1.0, -1.0] {
                let mut p = x.to_vec();
                p[k] = (p[k] + sign * steps[k]).clamp(lo[k], hi[k]);
                pts.push(p);
            }
        }
        let n = pts.len();
        let q = Inputs { x: pts.clone(), t: vec![t.to_vec(); n], s: vec![j; n], zeta: vec![None; n] };
        match scores(model, &q, j, state, cfg, 1.0) {
            Ok(v) => {
                let g =
                    (0..dx).map(|k| -(v[1 + 2 * k] - v[2 + 2 * k]) / (pts[1 + 2 * k][k] - pts[2 + 2 * k][k])).collect();
                (-v[0], g)
            }
            Err(_) => (f64::NAN, vec![f64::NAN; dx]),
        }
    };
    let problem = FnProblem { dim: dx, f };
    let lb = LbfgsConfig { max_iter: 50, ..LbfgsConfig::default() };
    let r = minimize(&problem, &lo, &hi, x0, &lb, 0);
    if !r.f.is_finite() {
        return None;
    }
    let v = match cfg.acquisition {
        AcquisitionKind::CostAware => -r.f / cfg.costs[j],
        AcquisitionKind::ExpectedImprovement => -r.f,
    };
    Some((r.x, v))
}

/// Next `(input, source)` to query.
pub fn propose_next(
    model: &Surrogate,
    state: &BOState,
    cfg: &BOConfig,
    ranges: &[(f64, f64)],
    levels: &[usize],
    seed: u64,
) -> Result<Proposal> {
    let mut scored = Vec::new();
    for j in cfg.active_sources() {
        let (mut xs, mut ts) = pool(ranges, levels, cfg.pool_size, seed.wrapping_add(j as u64));
        let n = xs.len();
        let q = Inputs { x: xs.clone(), t: ts.clone(), s: vec![j; n], zeta: vec![None; n] };
        let mut vals = acquisition_batch(model, &q, j, state, cfg)?;
        if !ranges.is_empty() && cfg.polish > 0 {
            let mut order: Vec<usize> = (0..n).filter(|i| vals[*i].is_finite()).collect();
            order.sort_by(|a, b| vals[*b].total_cmp(&vals[*a]).then(a.cmp(b)));
            for i in order.into_iter().take(cfg.polish) {
                if let Some((x, v)) = polish(model, &xs[i], &ts[i], j, state, cfg, ranges) {
                    if v > vals[i] {
                        let t = ts[i].clone();
                        xs.push(x);
                        ts.push(t);
                        vals.push(v);
                    }
                }
            }
        }
        scored.push((j, xs, ts, vals));
    }
    select(&scored)
}

/// Runs the loop: refit, propose, query, update, until the budget is
/// exceeded, the incumbent stalls or the iteration limit is reached.
/// A failed query or refit ends the run with the history so far.
pub fn run_bo<O: Oracle>(oracle: &mut O, init: MfDataset, cfg: &BOConfig, seed: u64) -> Result<BOState> {
    cfg.validate()?;
    let sources = cfg.costs.len();
    if sources > oracle.num_sources() {
        return contract(format!("{} costs given for {} sources", sources, oracle.num_sources()));
    }
    if init.inputs.s.iter().any(|s| *s >= sources) {
        return contract("initial data contains sources outside the model");
    }
    let counts = init.source_counts();
    for j in cfg.active_sources() {
        if counts.get(j).copied().unwrap_or(0) < 2 {
            return contract(format!("source {j} needs at least two initial points"));
        }
    }
    let ranges = oracle.ranges();
    let levels = oracle.levels();
    let mut state = BOState::new(init, sources, cfg.maximize);
    let refit = OptimizerConfig { num_restarts: (cfg.optimizer.num_restarts / 4).max(1), ..cfg.optimizer };
    let mut previous: Option<Vec<f64>> = None;
    let mut iteration = 0;
    loop {
        if state.cost > cfg.max_cost {
            state.stop = StopReason::Budget;
            break;
        }
        if cfg.max_iterations.is_some_and(|m| iteration >= m) {
            state.stop = StopReason::IterationLimit;
            break;
        }
        let fo = FitOptions {
            penalty: cfg.interval_score.then_some(cfg.penalty),
            warm_starts: previous.iter().cloned().collect(),
            ..FitOptions::default()
        };
        let data = state.oriented_data();
        let iter_seed = seed.wrapping_add(iteration as u64 * 7919);
        let model = match Surrogate::fit(&cfg.model, &data, &refit, iter_seed, &fo) {
            Ok(m) => m,
            Err(e) => {
                state.stop = StopReason::ModelFailed(e.to_string());
                break;
            }
        };
        previous = Some(model.theta().to_vec());
        let p = match propose_next(&model, &state, cfg, &ranges, &levels, iter_seed) {
            Ok(p) => p,
            Err(e) => {
                state.stop = StopReason::ModelFailed(e.to_string());
                break;
            }
        };
        let obs = match oracle.query(p.source, &p.x, &p.t) {
            Ok(o) => o,
            Err(e) => {
                state.stop = StopReason::QueryFailed(e.to_string());
                break;
            }
        };
        state.data.push(obs.x.clone(), obs.t.clone(), p.source, None, obs.y);
        state.cost += cfg.costs[p.source];
        let improved = state.update_incumbent(p.source, obs.y) && p.source == 0;
        state.stall = if improved { 0 } else { state.stall + 1 };
        state.log.push(IterationRecord {
            iteration,
            source: p.source,
            x: obs.x,
            t: obs.t,
            y: obs.y,
            acquisition: p.value,
            incumbent: state.incumbents[0],
            cost: state.cost,
        });
        iteration += 1;
        if state.stall > cfg.stall_limit {
            state.stop = StopReason::Stalled;
            break;
        }
    }
    Ok(state)
}

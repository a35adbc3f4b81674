//! Covariance assembly, MAP fitting and posterior prediction.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::autodiff::Tape;
use crate::config::{MeanSpec, ModelConfig, NoiseSpec};
use crate::data::{Inputs, MfDataset, Standardization};
use crate::embedding::{encode_prior, map_forward};
use crate::error::{contract, Error, Result};
use crate::kernel::{KernelConfig, KernelFamily, UnifiedInput};
use crate::linalg::{factorize, Factor};
use crate::objective::{
    assemble, member_values, row_noise, DrawPlan, Draws, Evaluation, MemberValues, Objective, Rows,
};
use crate::optim::Problem;
use crate::params::{BlockKind, Layout};
use crate::training::{
    fit_map, restart_rng, ContinuationSchedule, IntervalScoreConfig, MapFit, OptimizerConfig, SELECTION_KEY,
};

/// Nugget structure with natural-scale values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum NoiseModel {
    Single(f64),
    PerSource(Vec<f64>),
    Fixed(f64),
}

impl NoiseModel {
    pub fn of(&self, source: usize) -> Option<f64> {
        match self {
            NoiseModel::Single(d) | NoiseModel::Fixed(d) => Some(*d),
            NoiseModel::PerSource(v) => v.get(source).copied(),
        }
    }

    pub fn validate(&self, lb_noise: f64) -> Result<()> {
        let values: Vec<f64> = match self {
            NoiseModel::Single(d) | NoiseModel::Fixed(d) => vec![*d],
            NoiseModel::PerSource(v) => v.clone(),
        };
        if values.iter().any(|d| !(*d >= lb_noise && *d > 0.0)) {
            return contract(format!("noise values {values:?} fall below the floor {lb_noise}"));
        }
        Ok(())
    }
}

/// `C_δ` with `C_ij = σ² r(u_i, u_j)` and the nugget of each row's source
/// on the diagonal. Any jitter needed for a stable factorization is
/// included in the returned matrix.
pub fn build_covariance(
    cfg: &KernelConfig,
    sigma2: f64,
    inputs: &[UnifiedInput],
    noise: &NoiseModel,
    source_of: &[usize],
) -> Result<DMatrix<f64>> {
    if !(sigma2 > 0.0) {
        return contract("process variance must be positive");
    }
    if source_of.len() != inputs.len() {
        return contract("one source index per input is required");
    }
    noise.validate(f64::MIN_POSITIVE)?;
    let n = inputs.len();
    let mut c = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        let d = noise
            .of(source_of[i])
            .ok_or_else(|| Error::Contract(format!("no noise value for source {}", source_of[i])))?;
        c[(i, i)] = sigma2 + d;
        for j in 0..i {
            let v = sigma2 * cfg.correlation(&inputs[i], &inputs[j])?;
            c[(i, j)] = v;
            c[(j, i)] = v;
        }
    }
    let f = factorize(&c)?;
    for i in 0..n {
        c[(i, i)] += f.jitter();
    }
    Ok(c)
}

/// Posterior predictive moments in the original response units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictiveDistribution {
    pub mean: Vec<f64>,
    pub variance: Vec<f64>,
    pub covariance: Option<DMatrix<f64>>,
    pub includes_noise: bool,
}

impl PredictiveDistribution {
    pub fn std(&self) -> Vec<f64> {
        self.variance.iter().map(|v| v.max(0.0).sqrt()).collect()
    }
}

/// Extra settings for a MAP fit.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FitOptions {
    pub penalty: Option<IntervalScoreConfig>,
    /// Starts tried before the prior-based ones.
    pub warm_starts: Vec<Vec<f64>>,
    /// Replaces the prior-based starts with `warm_starts` alone.
    pub warm_only: bool,
    pub standardization: Option<Standardization>,
}

/// Configuration, data and standardized rows shared by fitted models.
#[derive(Debug, Clone)]
pub(crate) struct Core {
    pub cfg: ModelConfig,
    pub layout: Layout,
    pub st: Standardization,
    pub data: MfDataset,
    pub rows: Rows,
    pub y: DVector<f64>,
}

impl Core {
    pub fn new(cfg: &ModelConfig, data: &MfDataset, st: Option<Standardization>) -> Result<Self> {
        if data.is_empty() {
            return contract("training data is empty");
        }
        let dx = data.inputs.dx();
        cfg.validate(dx)?;
        let st = st.unwrap_or_else(|| Standardization::fit(data, cfg.dzeta()));
        if st.x_mean.len() != dx || st.zeta_mean.len() != cfg.dzeta() {
            return contract("standardization does not match the data layout");
        }
        let rows = Rows::new(cfg, &st, &data.inputs)?;
        let y = DVector::from_iterator(data.len(), data.y.iter().map(|v| st.y(*v)));
        Ok(Self { cfg: cfg.clone(), layout: Layout::new(cfg, dx), st, data: data.clone(), rows, y })
    }

    pub fn objective(&self, draws: DrawPlan, penalty: Option<IntervalScoreConfig>) -> Objective<'_> {
        Objective { cfg: &self.cfg, layout: &self.layout, rows: &self.rows, y: &self.y, draws, penalty }
    }

    /// Starts for a fit: warm starts first, then the prior center, then
    /// prior draws. Restart `i` draws from stream `i` of the seed.
    pub fn starts(&self, opt: &OptimizerConfig, seed: u64, fo: &FitOptions) -> Result<Vec<Vec<f64>>> {
        for w in &fo.warm_starts {
            if w.len() != self.layout.dim {
                return contract("warm start has the wrong length");
            }
        }
        let mut starts = fo.warm_starts.clone();
        if fo.warm_only && !starts.is_empty() {
            return Ok(starts);
        }
        let mut i = 0;
        while starts.len() < opt.num_restarts.max(fo.warm_starts.len() + 1) {
            let mut rng = restart_rng(seed, i);
            starts.push(self.layout.start(&self.cfg, &mut rng, i > 0));
            i += 1;
        }
        Ok(starts)
    }

    pub fn query_rows(&self, q: &Inputs) -> Result<Rows> {
        if q.dx() != self.layout.dx && !q.is_empty() {
            return contract(format!("queries have {} numeric columns, expected {}", q.dx(), self.layout.dx));
        }
        Rows::new(&self.cfg, &self.st, q)
    }
}

impl Problem for Objective<'_> {
    fn dim(&self) -> usize {
        self.layout.dim
    }

    fn eval(&self, x: &[f64], key: usize) -> Option<(f64, Vec<f64>)> {
        self.evaluate(x, key).ok().map(|e| (e.loss, e.grad))
    }

    fn refreshes(&self) -> bool {
        self.is_stochastic()
    }
}

pub(crate) fn draw_plan(cfg: &ModelConfig, seed: u64) -> DrawPlan {
    if cfg.is_ensemble() {
        DrawPlan::PerIteration { seed: seed ^ 0x9e37_79b9_7f4a_7c15, members: cfg.train_draws() }
    } else {
        DrawPlan::Single
    }
}

/// Runs the multi-start MAP fit and returns the core and optimizer result.
pub(crate) fn train(
    cfg: &ModelConfig,
    data: &MfDataset,
    opt: &OptimizerConfig,
    seed: u64,
    fo: &FitOptions,
) -> Result<(Core, MapFit)> {
    let core = Core::new(cfg, data, fo.standardization.clone())?;
    if let Some(p) = &fo.penalty {
        p.validate()?;
    }
    let starts = core.starts(opt, seed, fo)?;
    let (lo, hi) = core.layout.bounds();
    let fit = {
        let obj = core.objective(draw_plan(cfg, seed), fo.penalty);
        fit_map(&obj, (&lo, &hi), &starts, opt)?
    };
    Ok((core, fit))
}

/// Natural-scale parameter values of a fitted model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Estimates {
    pub omega: Vec<f64>,
    pub sigma2: f64,
    /// Nugget per source on the standardized response scale.
    pub noise: Vec<f64>,
    /// Source latent positions (or generator means).
    pub z: Vec<Vec<f64>>,
    /// Calibration estimate on the standardized scale.
    pub zeta: Vec<f64>,
}

pub(crate) fn estimates_of(core: &Core, theta: &[f64]) -> Result<Estimates> {
    let cfg = &core.cfg;
    let tape = Tape::new();
    let draws = Draws::zero(cfg);
    let a = assemble(&tape, cfg, &core.layout, theta, &core.rows, &draws)?;
    let noise = (0..cfg.sources)
        .map(|s| match cfg.noise {
            NoiseSpec::Fixed(v) => v,
            NoiseSpec::Single => a.noise_values[0],
            NoiseSpec::PerSource => a.noise_values[s],
        })
        .collect();
    let m = &a.members[0];
    Ok(Estimates {
        omega: a.omega.iter().map(|v| v.value()).collect(),
        sigma2: a.sigma2.value(),
        noise,
        z: m.z.iter().map(|z| z.iter().map(|v| v.value()).collect()).collect(),
        zeta: m.zeta.iter().map(|v| v.value()).collect(),
    })
}

/// Cross-correlation between training rows (rows of the result) and
/// query rows (columns).
pub(crate) fn cross_correlation(
    family: &KernelFamily,
    weights: &[f64],
    train: &MemberValues,
    query: &MemberValues,
) -> DMatrix<f64> {
    let (n, m) = (train.scaled.len(), query.scaled.len());
    DMatrix::from_fn(n, m, |i, j| {
        let (a, b) = (&train.scaled[i], &query.scaled[j]);
        let mut s = 0.0;
        for k in 0..weights.len() {
            s += weights[k] * family.coord(a[k] - b[k]).0;
        }
        let (la, lb) = (&train.latent[i], &query.latent[j]);
        for k in 0..la.len() {
            let d = la[k] - lb[k];
            s += d * d;
        }
        family.profile(s).0
    })
}

pub(crate) fn query_correlation(family: &KernelFamily, weights: &[f64], q: &MemberValues) -> DMatrix<f64> {
    crate::objective::correlation_matrix(family, weights, &q.scaled, &q.latent, false).0
}

/// Predictive moments of one GP member on the standardized scale.
pub(crate) struct MemberPrediction {
    pub mean: DVector<f64>,
    pub variance: Vec<f64>,
    pub covariance: Option<DMatrix<f64>>,
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn member_predict(
    family: &KernelFamily,
    weights: &[f64],
    sigma2: f64,
    factor: &Factor,
    alpha: &DVector<f64>,
    train: &MemberValues,
    query: &MemberValues,
    query_noise: Option<&[f64]>,
    full: bool,
) -> MemberPrediction {
    let m = query.scaled.len();
    let cross = cross_correlation(family, weights, train, query) * sigma2;
    let mut mean = DVector::from_column_slice(&query.mean);
    mean += cross.transpose() * alpha;
    let l = factor.lower();
    let v = l.solve_lower_triangular(&cross).unwrap_or_else(|| DMatrix::zeros(cross.nrows(), m));
    let mut variance: Vec<f64> = (0..m).map(|j| sigma2 - v.column(j).norm_squared()).collect();
    let covariance = full.then(|| {
        let mut k = query_correlation(family, weights, query) * sigma2 - v.transpose() * &v;
        if let Some(d) = query_noise {
            for j in 0..m {
                k[(j, j)] += d[j];
            }
        }
        k = (&k + k.transpose()) * 0.5;
        k
    });
    for j in 0..m {
        variance[j] = variance[j].max(0.0);
        if let Some(d) = query_noise {
            variance[j] += d[j];
        }
    }
    MemberPrediction { mean, variance, covariance }
}

/// A deterministic GP fitted by MAP.
#[derive(Debug, Clone)]
pub struct TrainedModel {
    pub(crate) core: Core,
    pub theta: Vec<f64>,
    /// Objective value at `theta` (standardized responses).
    pub loss: f64,
    pub estimates: Estimates,
    /// Optimizer record, present when the model was trained here.
    pub fit: Option<MapFit>,
    pub(crate) train: MemberValues,
    pub(crate) factor: Factor,
    pub(crate) alpha: DVector<f64>,
    pub(crate) weights: Vec<f64>,
}

impl TrainedModel {
    /// Rebuilds a model from a parameter vector without optimizing.
    pub fn from_theta(
        cfg: &ModelConfig,
        data: &MfDataset,
        theta: &[f64],
        standardization: Option<Standardization>,
    ) -> Result<Self> {
        let core = Core::new(cfg, data, standardization)?;
        Self::from_core(core, theta.to_vec(), None)
    }

    pub(crate) fn from_core(core: Core, theta: Vec<f64>, fit: Option<MapFit>) -> Result<Self> {
        if core.cfg.is_ensemble() {
            return contract("configuration needs an ensemble model");
        }
        let cfg = &core.cfg;
        let tape = Tape::new();
        let a = assemble(&tape, cfg, &core.layout, &theta, &core.rows, &Draws::single())?;
        let weights: Vec<f64> = a.omega.iter().map(|v| 10f64.powf(v.value())).collect();
        let sigma2 = a.sigma2.value();
        let noise = row_noise(cfg, &a, &core.rows);
        let train = member_values(&core.rows, &a, 0);
        let st = crate::objective::stage(
            &cfg.kernel,
            &weights,
            sigma2,
            &noise,
            std::slice::from_ref(&train),
            &core.y,
            false,
        )?;
        let loss = core.objective(DrawPlan::Single, None).evaluate(&theta, 0)?.loss;
        let estimates = estimates_of(&core, &theta)?;
        drop(a);
        Ok(Self { estimates, loss, fit, train, factor: st.factor, alpha: st.alpha, weights, theta, core })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.core.cfg
    }

    pub fn layout(&self) -> &Layout {
        &self.core.layout
    }

    pub fn standardization(&self) -> &Standardization {
        &self.core.st
    }

    pub fn data(&self) -> &MfDataset {
        &self.core.data
    }

    /// Marginal predictions.
    pub fn predict(&self, q: &Inputs, include_noise: bool) -> Result<PredictiveDistribution> {
        self.predict_impl(q, include_noise, false)
    }

    /// Predictions with the full covariance across queries.
    pub fn predict_full(&self, q: &Inputs, include_noise: bool) -> Result<PredictiveDistribution> {
        self.predict_impl(q, include_noise, true)
    }

    /// Standardized-scale predictions.
    pub(crate) fn predict_standardized(&self, q: &Inputs, include_noise: bool, full: bool) -> Result<MemberPrediction> {
        let core = &self.core;
        let qrows = core.query_rows(q)?;
        let tape = Tape::new();
        let a = assemble(&tape, &core.cfg, &core.layout, &self.theta, &qrows, &Draws::single())?;
        let qv = member_values(&qrows, &a, 0);
        let noise = row_noise(&core.cfg, &a, &qrows);
        Ok(member_predict(
            &core.cfg.kernel,
            &self.weights,
            self.estimates.sigma2,
            &self.factor,
            &self.alpha,
            &self.train,
            &qv,
            include_noise.then_some(noise.as_slice()),
            full,
        ))
    }

    fn predict_impl(&self, q: &Inputs, include_noise: bool, full: bool) -> Result<PredictiveDistribution> {
        let p = self.predict_standardized(q, include_noise, full)?;
        Ok(to_original(&self.core.st, p, include_noise))
    }

    /// Leave-one-out residuals `α_i / [C⁻¹]_ii` on the standardized scale.
    pub fn loo_residuals(&self) -> Vec<f64> {
        let p = self.factor.inverse();
        (0..self.alpha.len()).map(|i| self.alpha[i] / p[(i, i)]).collect()
    }

    pub fn loo_mse(&self) -> f64 {
        let r = self.loo_residuals();
        r.iter().map(|e| e * e).sum::<f64>() / r.len() as f64
    }

    /// Nugget of each source in original response units.
    pub fn noise_original(&self) -> Vec<f64> {
        let s2 = self.core.st.y_std.powi(2);
        self.estimates.noise.iter().map(|d| d * s2).collect()
    }

    /// Calibration estimate in original units.
    pub fn calibration_estimate(&self) -> Option<Vec<f64>> {
        self.core.cfg.calibration.as_ref().map(|_| self.core.st.zeta_back(&self.estimates.zeta))
    }

    /// Latent position of a categorical level combination.
    pub fn latent_of(&self, t: &[usize]) -> Result<Vec<f64>> {
        latent_of(&self.core, &self.theta, t)
    }

    /// Mean-function parameters.
    pub fn mean_params(&self) -> &[f64] {
        self.core.layout.slice(BlockKind::Mean, &self.theta)
    }

    /// Mean-function basis coefficients in original response units, one
    /// list per source, for constant and polynomial means.
    pub fn mean_coefficients(&self) -> Option<Vec<Vec<f64>>> {
        mean_coefficients(&self.core, &self.theta)
    }
}

pub(crate) fn latent_of(core: &Core, theta: &[f64], t: &[usize]) -> Result<Vec<f64>> {
    let cfg = &core.cfg;
    if !cfg.has_h() {
        return Ok(vec![]);
    }
    let encoded = encode_prior(&cfg.categorical, &cfg.encoding, t)?;
    let mut h = Vec::new();
    for (b, pi) in encoded.iter().enumerate() {
        let params = core.layout.slice(BlockKind::EmbedT(b), theta);
        h.extend(map_forward(&cfg.map, pi.len(), cfg.embedding_dim, params, pi));
    }
    Ok(h)
}

pub(crate) fn mean_coefficients(core: &Core, theta: &[f64]) -> Option<Vec<Vec<f64>>> {
    let beta = core.layout.slice(BlockKind::Mean, theta);
    let st = &core.st;
    let sources = core.cfg.sources;
    match &core.cfg.mean {
        MeanSpec::Zero => Some(vec![vec![st.y_mean]; sources]),
        MeanSpec::SingleConstant => Some(vec![vec![st.y_back(beta[0])]; sources]),
        MeanSpec::PerSourceConstants => {
            Some((0..sources).map(|s| vec![st.y_back(if s == 0 { 0.0 } else { beta[s - 1] })]).collect())
        }
        MeanSpec::PolynomialBases { terms } => {
            let mut at = 0;
            let mut out: Vec<Vec<f64>> = Vec::new();
            for t in terms {
                out.push(beta[at..at + t.len()].iter().map(|b| b * st.y_std).collect());
                at += t.len();
            }
            if terms.len() == 1 {
                out = vec![out[0].clone(); sources];
            }
            Some(out)
        }
        MeanSpec::FeedForward { .. } => None,
    }
}

pub(crate) fn to_original(st: &Standardization, p: MemberPrediction, includes_noise: bool) -> PredictiveDistribution {
    let s2 = st.y_std * st.y_std;
    PredictiveDistribution {
        mean: p.mean.iter().map(|m| st.y_back(*m)).collect(),
        variance: p.variance.iter().map(|v| v * s2).collect(),
        covariance: p.covariance.map(|c| c * s2),
        includes_noise,
    }
}

/// Fits a deterministic model by multi-start MAP.
pub fn fit(cfg: &ModelConfig, data: &MfDataset, opt: &OptimizerConfig, seed: u64) -> Result<TrainedModel> {
    fit_with(cfg, data, opt, seed, &FitOptions::default())
}

pub fn fit_with(
    cfg: &ModelConfig,
    data: &MfDataset,
    opt: &OptimizerConfig,
    seed: u64,
    fo: &FitOptions,
) -> Result<TrainedModel> {
    if cfg.is_ensemble() {
        return contract("probabilistic configurations are fitted with fit_probabilistic_mf");
    }
    let (core, fit) = train(cfg, data, opt, seed, fo)?;
    let x = fit.x.clone();
    TrainedModel::from_core(core, x, Some(fit))
}

/// Objective value and gradient at `theta`; the standardization is fitted
/// to `data`.
pub fn evaluate_map(
    cfg: &ModelConfig,
    data: &MfDataset,
    theta: &[f64],
    draws: &Draws,
    penalty: Option<IntervalScoreConfig>,
) -> Result<Evaluation> {
    let core = Core::new(cfg, data, None)?;
    let plan = if draws.z.is_empty() && draws.zeta.is_empty() && draws.members == 1 && !cfg.is_ensemble() {
        DrawPlan::Single
    } else {
        DrawPlan::Fixed(draws.clone())
    };
    core.objective(plan, penalty).evaluate(theta, 0)
}

/// `½log|C_δ| + ½rᵀC_δ⁻¹r − log p(θ)` on the standardized scale.
pub fn log_map_loss(cfg: &ModelConfig, data: &MfDataset, theta: &[f64]) -> Result<f64> {
    let draws = if cfg.is_ensemble() { Draws::sample(cfg, cfg.train_draws(), 0, 0) } else { Draws::single() };
    Ok(evaluate_map(cfg, data, theta, &draws, None)?.loss)
}

/// Sum of prior log-densities at `theta`.
pub fn log_prior(cfg: &ModelConfig, dx: usize, theta: &[f64]) -> Result<f64> {
    let layout = Layout::new(cfg, dx);
    let rows = Rows::empty();
    let tape = Tape::new();
    let a = assemble(&tape, cfg, &layout, theta, &rows, &Draws::zero(cfg))?;
    Ok(a.log_prior.value())
}

/// One rung of a continuation fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rung {
    pub floor: f64,
    pub starts: Vec<Vec<f64>>,
    pub theta: Option<Vec<f64>>,
    pub loss: Option<f64>,
    pub loo_mse: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct ContinuationResult {
    pub model: TrainedModel,
    pub selected: usize,
    pub rungs: Vec<Rung>,
}

/// Fits at the largest noise floor, warm-starts each smaller floor from the
/// previous solution and keeps the rung with the lowest leave-one-out error.
pub fn continuation_fit(
    cfg: &ModelConfig,
    data: &MfDataset,
    schedule: &ContinuationSchedule,
    opt: &OptimizerConfig,
    seed: u64,
) -> Result<ContinuationResult> {
    schedule.validate()?;
    let mut rungs = Vec::new();
    let mut models: Vec<Option<TrainedModel>> = Vec::new();
    let mut prev: Option<(Vec<f64>, Vec<f64>)> = None;
    for &floor in &schedule.floors {
        let mut rc = cfg.clone();
        rc.lb_noise = floor;
        let mut fo = FitOptions::default();
        if let Some((theta, noise)) = &prev {
            let layout = Layout::new(&rc, data.inputs.dx());
            let mut w = theta.clone();
            if let Some(b) = layout.block(BlockKind::Noise) {
                for (k, i) in b.range().enumerate() {
                    w[i] = (noise[k] - floor).max(1e-300).ln();
                }
            }
            let (lo, hi) = layout.bounds();
            crate::optim::project(&mut w, &lo, &hi);
            fo.warm_starts = vec![w];
            fo.warm_only = true;
        }
        let starts = match fo.warm_only {
            true => fo.warm_starts.clone(),
            false => vec![],
        };
        match fit_with(&rc, data, opt, seed, &fo) {
            Ok(m) => {
                let starts = if starts.is_empty() {
                    m.fit.as_ref().map(|f| f.restarts.iter().map(|r| r.start.clone()).collect()).unwrap_or_default()
                } else {
                    starts
                };
                let noise_params: Vec<f64> = match rc.noise {
                    NoiseSpec::Fixed(_) => vec![],
                    NoiseSpec::Single => vec![m.estimates.noise[0]],
                    NoiseSpec::PerSource => m.estimates.noise.clone(),
                };
                prev = Some((m.theta.clone(), noise_params));
                let loo = m.loo_mse();
                rungs.push(Rung {
                    floor,
                    starts,
                    theta: Some(m.theta.clone()),
                    loss: Some(m.loss),
                    loo_mse: loo.is_finite().then_some(loo),
                });
                models.push(Some(m));
            }
            Err(_) => {
                rungs.push(Rung { floor, starts, theta: None, loss: None, loo_mse: None });
                models.push(None);
            }
        }
    }
    let selected = rungs
        .iter()
        .enumerate()
        .filter_map(|(i, r)| r.loo_mse.map(|l| (l, i)))
        .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)))
        .map(|(_, i)| i)
        .ok_or_else(|| Error::TrainingFailed {
            restarts: schedule.floors.len(),
            diagnostics: vec!["every continuation rung failed".into()],
        })?;
    let model = models.swap_remove(selected).expect("selected rung has a model");
    Ok(ContinuationResult { model, selected, rungs })
}

/// Re-evaluates the ensemble objective at `theta` under the selection draws.
pub(crate) fn selection_draws(cfg: &ModelConfig, seed: u64) -> Draws {
    match draw_plan(cfg, seed) {
        DrawPlan::PerIteration { seed, members } => Draws::sample(cfg, members, seed, SELECTION_KEY as u64),
        _ => Draws::single(),
    }
}

//! Multi-source fusion: deterministic fits over stacked sources and
//! ensemble models induced by probabilistic source embeddings or
//! probabilistic calibration parameters.

use nalgebra::{DMatrix, DVector};

use crate::autodiff::Tape;
use crate::config::ModelConfig;
use crate::data::{Inputs, MfDataset, Standardization};
use crate::embedding::one_hot;
use crate::error::{contract, Result};
use crate::gp::{
    fit_with, member_predict, selection_draws, to_original, train, Core, Estimates, FitOptions, MemberPrediction,
    PredictiveDistribution, TrainedModel,
};
use crate::linalg::factorize;
use crate::objective::{assemble, member_values, row_noise, stage, DrawPlan, Draws, MemberValues, Rows};
use crate::params::{generator, BlockKind};
use crate::training::{MapFit, OptimizerConfig};

/// `m̄ = (1/M)Σ m_k`, `C̄ = (1/M)Σ [C_k + (m_k − m̄)(m_k − m̄)ᵀ]`.
pub fn ensemble_moments(members: &[(DVector<f64>, DMatrix<f64>)]) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let Some((m0, _)) = members.first() else {
        return contract("an ensemble needs at least one member");
    };
    let n = m0.len();
    if members.iter().any(|(m, c)| m.len() != n || c.nrows() != n || c.ncols() != n) {
        return contract("ensemble members differ in dimension");
    }
    let k = members.len() as f64;
    let mut mbar = DVector::zeros(n);
    for (m, _) in members {
        mbar += m;
    }
    mbar /= k;
    let mut cbar = DMatrix::zeros(n, n);
    for (m, c) in members {
        let d = m - &mbar;
        cbar += c + &d * d.transpose();
    }
    cbar /= k;
    Ok((mbar, cbar))
}

/// Mixture moments of member predictions: the mean of the means and
/// `(1/Q)Σ(τ_k² + μ_k²) − μ̄²`.
pub fn combine_predictions(means: &[Vec<f64>], variances: &[Vec<f64>]) -> Result<(Vec<f64>, Vec<f64>)> {
    let Some(first) = means.first() else {
        return contract("at least one member prediction is required");
    };
    let m = first.len();
    if variances.len() != means.len() || means.iter().chain(variances).any(|v| v.len() != m) {
        return contract("member predictions differ in shape");
    }
    let q = means.len() as f64;
    let mut mean = vec![0.0; m];
    let mut var = vec![0.0; m];
    for j in 0..m {
        let mu: f64 = means.iter().map(|v| v[j]).sum::<f64>() / q;
        // spread around the mixture mean avoids cancellation in E[μ²] − μ̄²
        let spread: f64 = means.iter().map(|v| (v[j] - mu).powi(2)).sum::<f64>() / q;
        let within: f64 = variances.iter().map(|v| v[j]).sum::<f64>() / q;
        mean[j] = mu;
        var[j] = (within + spread).max(0.0);
    }
    Ok((mean, var))
}

/// An ensemble of GPs sharing every parameter except the latent draws.
#[derive(Debug, Clone)]
pub struct EnsembleModel {
    pub(crate) core: Core,
    pub theta: Vec<f64>,
    /// Objective value under the stored training draws.
    pub loss: f64,
    pub estimates: Estimates,
    pub fit: Option<MapFit>,
    pub train_draws: Draws,
    /// Ensemble mean of the training rows (standardized scale).
    pub mbar: DVector<f64>,
    /// Ensemble covariance of the training rows (standardized scale).
    pub cbar: DMatrix<f64>,
    pub seed: u64,
}

impl EnsembleModel {
    pub fn from_theta(
        cfg: &ModelConfig,
        data: &MfDataset,
        theta: &[f64],
        standardization: Option<Standardization>,
        seed: u64,
    ) -> Result<Self> {
        let core = Core::new(cfg, data, standardization)?;
        Self::from_core(core, theta.to_vec(), None, seed)
    }

    pub(crate) fn from_core(core: Core, theta: Vec<f64>, fit: Option<MapFit>, seed: u64) -> Result<Self> {
        let cfg = &core.cfg;
        if !cfg.is_ensemble() {
            return contract("configuration has no probabilistic component");
        }
        let draws = selection_draws(cfg, seed);
        let tape = Tape::new();
        let a = assemble(&tape, cfg, &core.layout, &theta, &core.rows, &draws)?;
        let weights: Vec<f64> = a.omega.iter().map(|v| 10f64.powf(v.value())).collect();
        let sigma2 = a.sigma2.value();
        let noise = row_noise(cfg, &a, &core.rows);
        let members: Vec<MemberValues> = (0..draws.members).map(|k| member_values(&core.rows, &a, k)).collect();
        let mut parts = Vec::with_capacity(members.len());
        for m in &members {
            let st = stage(&cfg.kernel, &weights, sigma2, &noise, std::slice::from_ref(m), &core.y, false)?;
            let mut c = st.corr[0].clone() * sigma2;
            for i in 0..c.nrows() {
                c[(i, i)] += noise[i];
            }
            parts.push((DVector::from_column_slice(&m.mean), c));
        }
        let (mbar, cbar) = ensemble_moments(&parts)?;
        let loss = core.objective(DrawPlan::Fixed(draws.clone()), None).evaluate(&theta, 0)?.loss;
        drop(a);
        let estimates = crate::gp::estimates_of(&core, &theta)?;
        Ok(Self { core, theta, loss, estimates, fit, train_draws: draws, mbar, cbar, seed })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.core.cfg
    }

    pub fn standardization(&self) -> &Standardization {
        &self.core.st
    }

    pub fn data(&self) -> &MfDataset {
        &self.core.data
    }

    /// Mixture prediction over `draws` members seeded by `seed`.
    pub fn predict(&self, q: &Inputs, draws: usize, seed: u64, include_noise: bool) -> Result<PredictiveDistribution> {
        let members = self.member_predictions(q, draws, seed, include_noise)?;
        let means: Vec<Vec<f64>> = members.iter().map(|p| p.mean.iter().copied().collect()).collect();
        let vars: Vec<Vec<f64>> = members.iter().map(|p| p.variance.clone()).collect();
        let (mean, variance) = combine_predictions(&means, &vars)?;
        let p = MemberPrediction { mean: DVector::from_vec(mean), variance, covariance: None };
        Ok(to_original(&self.core.st, p, include_noise))
    }

    /// Prediction with the configured number of draws and the model seed.
    pub fn predict_default(&self, q: &Inputs, include_noise: bool) -> Result<PredictiveDistribution> {
        self.predict(q, self.core.cfg.predict_draws(), self.seed, include_noise)
    }

    /// Standardized-scale predictions of each member.
    pub(crate) fn member_predictions(
        &self,
        q: &Inputs,
        draws: usize,
        seed: u64,
        include_noise: bool,
    ) -> Result<Vec<MemberPrediction>> {
        if draws == 0 {
            return contract("at least one draw is required");
        }
        let core = &self.core;
        let cfg = &core.cfg;
        core.query_rows(q)?;
        let n = core.data.len();
        let mut all = core.data.inputs.clone();
        all.extend(q);
        let rows = Rows::new(cfg, &core.st, &all)?;
        let sample = Draws::sample(cfg, draws, seed, 0);
        let tape = Tape::new();
        let a = assemble(&tape, cfg, &core.layout, &self.theta, &rows, &sample)?;
        let weights: Vec<f64> = a.omega.iter().map(|v| 10f64.powf(v.value())).collect();
        let sigma2 = a.sigma2.value();
        let noise = row_noise(cfg, &a, &rows);
        let mut out = Vec::with_capacity(draws);
        for k in 0..draws {
            let v = member_values(&rows, &a, k);
            let (train, query) = split(v, n);
            let st = stage(&cfg.kernel, &weights, sigma2, &noise[..n], std::slice::from_ref(&train), &core.y, false)?;
            out.push(member_predict(
                &cfg.kernel,
                &weights,
                sigma2,
                &st.factor,
                &st.alpha,
                &train,
                &query,
                include_noise.then_some(&noise[n..]),
                false,
            ));
        }
        Ok(out)
    }

    /// Mean and lower factor of every source's latent distribution.
    pub fn source_distributions(&self) -> Vec<(Vec<f64>, Vec<f64>)> {
        let cfg = &self.core.cfg;
        match generator(cfg) {
            Some(mut pe) => {
                pe.params = self.core.layout.slice(BlockKind::EmbedS, &self.theta).to_vec();
                (0..cfg.sources)
                    .map(|j| pe.moments(&one_hot(cfg.sources, j)).expect("encoding width matches"))
                    .collect()
            }
            None => self.estimates.z.iter().map(|z| (z.clone(), vec![0.0; z.len() * z.len()])).collect(),
        }
    }

    /// Calibration posterior in original units.
    pub fn calibration_posterior(&self) -> Option<crate::calibration::CalibrationPosterior> {
        crate::calibration::posterior_of(&self.core, &self.theta)
    }

    pub fn factor_ok(&self) -> bool {
        factorize(&self.cbar).is_ok()
    }
}

fn split(v: MemberValues, n: usize) -> (MemberValues, MemberValues) {
    let MemberValues { mut scaled, mut latent, mut mean } = v;
    let q = MemberValues { scaled: scaled.split_off(n), latent: latent.split_off(n), mean: mean.split_off(n) };
    (MemberValues { scaled, latent, mean }, q)
}

fn check_sources(cfg: &ModelConfig, data: &MfDataset) -> Result<()> {
    if data.num_sources() > cfg.sources {
        return contract(format!("data has {} sources but the model has {}", data.num_sources(), cfg.sources));
    }
    Ok(())
}

/// Deterministic fit over the stacked sources.
pub fn fit_deterministic_mf(
    cfg: &ModelConfig,
    data: &MfDataset,
    opt: &OptimizerConfig,
    seed: u64,
) -> Result<TrainedModel> {
    check_sources(cfg, data)?;
    fit_with(cfg, data, opt, seed, &FitOptions::default())
}

/// Ensemble fit; the latent draws are refreshed every optimizer iteration.
pub fn fit_probabilistic_mf(
    cfg: &ModelConfig,
    data: &MfDataset,
    opt: &OptimizerConfig,
    seed: u64,
) -> Result<EnsembleModel> {
    fit_probabilistic_with(cfg, data, opt, seed, &FitOptions::default())
}

pub fn fit_probabilistic_with(
    cfg: &ModelConfig,
    data: &MfDataset,
    opt: &OptimizerConfig,
    seed: u64,
    fo: &FitOptions,
) -> Result<EnsembleModel> {
    check_sources(cfg, data)?;
    if !cfg.is_ensemble() {
        return contract("configuration has no probabilistic component");
    }
    if fo.penalty.is_some() {
        return contract("the interval-score penalty requires a deterministic model");
    }
    let (core, fit) = train(cfg, data, opt, seed, fo)?;
    let x = fit.x.clone();
    EnsembleModel::from_core(core, x, Some(fit), seed)
}

/// Free-function form of [`EnsembleModel::predict`] (without noise).
pub fn ensemble_predict(model: &EnsembleModel, q: &Inputs, draws: usize, seed: u64) -> Result<PredictiveDistribution> {
    model.predict(q, draws, seed, false)
}

/// Either kind of fitted model.
#[derive(Debug, Clone)]
pub enum Surrogate {
    Deterministic(TrainedModel),
    Ensemble(EnsembleModel),
}

impl Surrogate {
    pub fn fit(cfg: &ModelConfig, data: &MfDataset, opt: &OptimizerConfig, seed: u64, fo: &FitOptions) -> Result<Self> {
        check_sources(cfg, data)?;
        if cfg.is_ensemble() {
            Ok(Surrogate::Ensemble(fit_probabilistic_with(cfg, data, opt, seed, fo)?))
        } else {
            Ok(Surrogate::Deterministic(fit_with(cfg, data, opt, seed, fo)?))
        }
    }

    pub fn predict(&self, q: &Inputs, include_noise: bool) -> Result<PredictiveDistribution> {
        match self {
            Surrogate::Deterministic(m) => m.predict(q, include_noise),
            Surrogate::Ensemble(m) => m.predict_default(q, include_noise),
        }
    }

    pub fn config(&self) -> &ModelConfig {
        match self {
            Surrogate::Deterministic(m) => m.config(),
            Surrogate::Ensemble(m) => m.config(),
        }
    }

    pub fn theta(&self) -> &[f64] {
        match self {
            Surrogate::Deterministic(m) => &m.theta,
            Surrogate::Ensemble(m) => &m.theta,
        }
    }

    pub fn loss(&self) -> f64 {
        match self {
            Surrogate::Deterministic(m) => m.loss,
            Surrogate::Ensemble(m) => m.loss,
        }
    }

    pub fn estimates(&self) -> &Estimates {
        match self {
            Surrogate::Deterministic(m) => &m.estimates,
            Surrogate::Ensemble(m) => &m.estimates,
        }
    }

    pub fn standardization(&self) -> &Standardization {
        match self {
            Surrogate::Deterministic(m) => m.standardization(),
            Surrogate::Ensemble(m) => m.standardization(),
        }
    }

    pub fn data(&self) -> &MfDataset {
        match self {
            Surrogate::Deterministic(m) => m.data(),
            Surrogate::Ensemble(m) => m.data(),
        }
    }

    pub(crate) fn core(&self) -> &Core {
        match self {
            Surrogate::Deterministic(m) => &m.core,
            Surrogate::Ensemble(m) => &m.core,
        }
    }

    /// Mean-function coefficients per source in original units.
    pub fn mean_coefficients(&self) -> Option<Vec<Vec<f64>>> {
        crate::gp::mean_coefficients(self.core(), self.theta())
    }
}

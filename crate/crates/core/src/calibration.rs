//! Inverse estimation of calibration parameters shared by low-fidelity
//! models and unobserved in high-fidelity data.

use serde::{Deserialize, Serialize};

use crate::config::{CalibrationMode, CalibrationSpec, ModelConfig};
use crate::data::{Inputs, MfDataset, Standardization};
use crate::error::{contract, Result};
use crate::gp::{Core, FitOptions, TrainedModel};
use crate::multifidelity::{EnsembleModel, Surrogate};
use crate::params::BlockKind;
use crate::training::OptimizerConfig;

/// Calibration settings in the units of the data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationConfig {
    pub mode: CalibrationMode,
    /// Per-parameter `(mean, std)` prior in original units; `None` uses
    /// a standard normal on the standardized scale.
    pub prior: Option<Vec<(f64, f64)>>,
    pub hf_sources: Vec<usize>,
}

impl CalibrationConfig {
    pub fn new(mode: CalibrationMode) -> Self {
        Self { mode, prior: None, hf_sources: vec![0] }
    }
}

/// Normal posterior over calibration parameters, in original units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationPosterior {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    /// Optional row-major lower factor; when present draws use it instead
    /// of the diagonal.
    pub factor: Option<Vec<f64>>,
}

/// `ζ = μ + τ ε` (or `μ + L ε` with a full factor).
pub fn sample_zeta(post: &CalibrationPosterior, eps: &[f64]) -> Result<Vec<f64>> {
    let d = post.mean.len();
    if eps.len() != d || post.std.len() != d {
        return contract(format!("ε has length {}, expected {d}", eps.len()));
    }
    Ok(match &post.factor {
        Some(l) => {
            if l.len() != d * d {
                return contract("posterior factor has the wrong size");
            }
            (0..d).map(|i| post.mean[i] + (0..=i).map(|j| l[i * d + j] * eps[j]).sum::<f64>()).collect()
        }
        None => (0..d).map(|i| post.mean[i] + post.std[i] * eps[i]).collect(),
    })
}

/// Numeric features followed by calibration values for each row:
/// low-fidelity rows keep their recorded values, high-fidelity rows get
/// `zeta`.
pub fn complete_inputs(inputs: &Inputs, spec: &CalibrationSpec, zeta: &[f64]) -> Result<Vec<Vec<f64>>> {
    if zeta.len() != spec.dims {
        return contract(format!("{} calibration values given, expected {}", zeta.len(), spec.dims));
    }
    let mut out = Vec::with_capacity(inputs.len());
    for i in 0..inputs.len() {
        let hf = spec.hf_sources.contains(&inputs.s[i]);
        let mut row = inputs.x[i].clone();
        match (hf, &inputs.zeta[i]) {
            (true, Some(_)) => return contract(format!("high-fidelity row {i} carries recorded calibration values")),
            (true, None) => row.extend_from_slice(zeta),
            (false, Some(z)) if z.len() == spec.dims => row.extend_from_slice(z),
            (false, _) => return contract(format!("low-fidelity row {i} lacks calibration values")),
        }
        out.push(row);
    }
    Ok(out)
}

pub(crate) fn posterior_of(core: &Core, theta: &[f64]) -> Option<CalibrationPosterior> {
    let c = core.cfg.calibration.as_ref()?;
    let st = &core.st;
    let mu = core.layout.slice(BlockKind::ZetaMean, theta);
    let log_std = core.layout.slice(BlockKind::ZetaLogStd, theta);
    let mean = st.zeta_back(mu);
    let std = (0..c.dims)
        .map(|k| match log_std.get(k) {
            Some(l) => l.exp() * st.zeta_std[k],
            None => 0.0,
        })
        .collect();
    Some(CalibrationPosterior { mean, std, factor: None })
}

/// Model and estimates returned by [`calibrate`].
#[derive(Debug, Clone)]
pub struct CalibrationResult {
    pub model: Surrogate,
    /// Point estimate (deterministic) or posterior mean, original units.
    pub estimate: Vec<f64>,
    pub posterior: Option<CalibrationPosterior>,
}

/// Adds the calibration block to `base` and converts an original-unit
/// prior to the standardized scale used by the model.
pub fn calibration_model_config(base: &ModelConfig, cal: &CalibrationConfig, data: &MfDataset) -> Result<ModelConfig> {
    let dims = data.inputs.zeta.iter().flatten().map(|z| z.len()).next().unwrap_or(0);
    if dims == 0 {
        return contract("no calibration values are recorded in the data");
    }
    let sources = data.num_sources().max(base.sources);
    let hf_rows = data.inputs.s.iter().filter(|s| cal.hf_sources.contains(s)).count();
    if hf_rows == 0 {
        return contract("calibration needs at least one high-fidelity row");
    }
    if hf_rows == data.len() {
        return contract("calibration needs low-fidelity rows");
    }
    let mut spec = CalibrationSpec::new(dims, cal.mode);
    spec.hf_sources = cal.hf_sources.clone();
    let mut cfg = base.clone();
    cfg.sources = sources;
    cfg.calibration = Some(spec.clone());
    let st = Standardization::fit(data, dims);
    if let Some(p) = &cal.prior {
        if p.len() != dims {
            return contract(format!("{} prior entries given for {dims} calibration parameters", p.len()));
        }
        spec.prior = p
            .iter()
            .enumerate()
            .map(|(k, (m, s))| ((m - st.zeta_mean[k]) / st.zeta_std[k], s / st.zeta_std[k]))
            .collect();
    }
    cfg.calibration = Some(spec);
    Ok(cfg)
}

/// Jointly estimates the calibration parameters with the fused model.
pub fn calibrate(
    base: &ModelConfig,
    cal: &CalibrationConfig,
    data: &MfDataset,
    opt: &OptimizerConfig,
    seed: u64,
) -> Result<CalibrationResult> {
    let cfg = calibration_model_config(base, cal, data)?;
    let model = Surrogate::fit(&cfg, data, opt, seed, &FitOptions::default())?;
    let (estimate, posterior) = match &model {
        Surrogate::Deterministic(m) => (m.calibration_estimate().unwrap_or_default(), None),
        Surrogate::Ensemble(m) => {
            let post = m.calibration_posterior();
            match post {
                Some(p) if cal.mode == CalibrationMode::Probabilistic => (p.mean.clone(), Some(p)),
                Some(p) => (p.mean, None),
                None => (vec![], None),
            }
        }
    };
    Ok(CalibrationResult { model, estimate, posterior })
}

impl TrainedModel {
    pub fn calibration_posterior(&self) -> Option<CalibrationPosterior> {
        posterior_of(&self.core, &self.theta)
    }
}

impl EnsembleModel {
    pub fn calibration_estimate(&self) -> Option<Vec<f64>> {
        self.calibration_posterior().map(|p| p.mean)
    }
}

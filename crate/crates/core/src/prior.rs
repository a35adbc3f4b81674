//! Prior densities on natural-scale hyperparameters.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::autodiff::Var;

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Prior {
    Flat,
    Normal {
        mean: f64,
        std: f64,
    },
    /// `ln v ~ N(mu, sigma²)`.
    LogNormal {
        mu: f64,
        sigma: f64,
    },
    /// Half-horseshoe surrogate with the given scale, supported on `v > 0`.
    HalfHorseshoe {
        scale: f64,
    },
}

impl Prior {
    /// Log-density; `-∞` outside the support.
    pub fn log_density(&self, v: f64) -> f64 {
        match *self {
            Prior::Flat => 0.0,
            Prior::Normal { mean, std } => {
                let z = (v - mean) / std;
                -0.5 * z * z - std.ln() - LN_SQRT_2PI
            }
            Prior::LogNormal { mu, sigma } => {
                if v <= 0.0 || !v.is_finite() {
                    return f64::NEG_INFINITY;
                }
                let z = (v.ln() - mu) / sigma;
                -0.5 * z * z - sigma.ln() - LN_SQRT_2PI - v.ln()
            }
            Prior::HalfHorseshoe { scale } => {
                if v <= 0.0 || !v.is_finite() {
                    return f64::NEG_INFINITY;
                }
                let q = 2.0 * (scale / v).powi(2);
                q.ln_1p().ln() + horseshoe_const(scale)
            }
        }
    }

    pub(crate) fn log_density_var<'t>(&self, v: Var<'t>) -> Var<'t> {
        match *self {
            Prior::Flat => v * 0.0,
            Prior::Normal { mean, std } => {
                let z = (v - mean) / std;
                z * z * -0.5 - (std.ln() + LN_SQRT_2PI)
            }
            Prior::LogNormal { mu, sigma } => {
                let l = v.ln();
                let z = (l - mu) / sigma;
                z * z * -0.5 - l - (sigma.ln() + LN_SQRT_2PI)
            }
            Prior::HalfHorseshoe { scale } => v.log_log1p_inv_sq(2.0 * scale * scale) + horseshoe_const(scale),
        }
    }

    /// Location used for the first optimization start.
    pub fn center(&self) -> f64 {
        match *self {
            Prior::Flat => 0.0,
            Prior::Normal { mean, .. } => mean,
            Prior::LogNormal { mu, .. } => mu.exp(),
            Prior::HalfHorseshoe { scale } => scale,
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let z: f64 = StandardNormal.sample(rng);
        match *self {
            Prior::Flat => z,
            Prior::Normal { mean, std } => mean + std * z,
            Prior::LogNormal { mu, sigma } => (mu + sigma * z).exp(),
            Prior::HalfHorseshoe { scale } => {
                let c: f64 = StandardNormal.sample(rng);
                let d: f64 = StandardNormal.sample(rng);
                let lambda = (c / d).abs();
                (scale * lambda * z.abs()).clamp(1e-8, 1.0)
            }
        }
    }
}

fn horseshoe_const(scale: f64) -> f64 {
    (2.0 / (scale * (2.0 * std::f64::consts::PI.powi(3)).sqrt())).ln()
}

/// Priors for every parameter group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriorSpec {
    pub omega: Prior,
    pub sigma2: Prior,
    pub noise: Prior,
    pub mean: Prior,
    pub latent: Prior,
    pub network: Prior,
    pub calibration: Prior,
    pub calibration_log_std: Prior,
}

impl Default for PriorSpec {
    fn default() -> Self {
        Self {
            omega: Prior::Normal { mean: -3.0, std: 3.0 },
            sigma2: Prior::LogNormal { mu: 0.0, sigma: 1.0 },
            noise: Prior::HalfHorseshoe { scale: 0.01 },
            mean: Prior::Normal { mean: 0.0, std: 1.0 },
            latent: Prior::Normal { mean: 0.0, std: 1.0 },
            network: Prior::Normal { mean: 0.0, std: 1.0 },
            calibration: Prior::Normal { mean: 0.0, std: 1.0 },
            calibration_log_std: Prior::Normal { mean: -3.0, std: 2.0 },
        }
    }
}

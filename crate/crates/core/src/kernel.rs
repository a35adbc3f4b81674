//! Correlation functions over a unified input.
//!
//! A unified input has a scaled block (numeric features followed by
//! calibration coordinates), each coordinate weighted by `10^ω`, and an
//! unscaled latent block (categorical embedding `h` followed by the source
//! embedding `z`) whose squared distances enter unweighted.

use serde::{Deserialize, Serialize};

use crate::error::{contract, Result};

pub const OMEGA_MIN: f64 = -10.0;
pub const OMEGA_MAX: f64 = 4.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum MaternNu {
    Half,
    ThreeHalves,
    FiveHalves,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum KernelFamily {
    Gaussian,
    /// Exponent `p` in `[1, 2]` applied to scaled coordinate distances.
    PowerExponential(f64),
    Matern(MaternNu),
}

impl KernelFamily {
    pub fn validate(&self) -> Result<()> {
        if let KernelFamily::PowerExponential(p) = self {
            if !(1.0..=2.0).contains(p) {
                return contract(format!("power exponent {p} outside [1, 2]"));
            }
        }
        Ok(())
    }

    /// Per-coordinate distance transform `φ(Δ)` and its derivative.
    #[inline]
    pub(crate) fn coord(&self, d: f64) -> (f64, f64) {
        match self {
            KernelFamily::PowerExponential(p) if *p != 2.0 => {
                let a = d.abs();
                if a == 0.0 {
                    (0.0, 0.0)
                } else {
                    let v = a.powf(*p);
                    (v, p * v / d)
                }
            }
            _ => (d * d, 2.0 * d),
        }
    }

    /// Correlation as a function of the accumulated weighted distance `s`,
    /// together with `dr/ds`.
    #[inline]
    pub(crate) fn profile(&self, s: f64) -> (f64, f64) {
        match self {
            KernelFamily::Gaussian | KernelFamily::PowerExponential(_) => {
                let e = (-s).exp();
                (e, -e)
            }
            KernelFamily::Matern(nu) => {
                let d = s.max(0.0).sqrt();
                match nu {
                    MaternNu::Half => {
                        let e = (-d).exp();
                        let g = if d > 0.0 { -e / (2.0 * d) } else { 0.0 };
                        (e, g)
                    }
                    MaternNu::ThreeHalves => {
                        let k = 3f64.sqrt() * d;
                        let e = (-k).exp();
                        ((1.0 + k) * e, -1.5 * e)
                    }
                    MaternNu::FiveHalves => {
                        let k = 5f64.sqrt() * d;
                        let e = (-k).exp();
                        ((1.0 + k + k * k / 3.0) * e, -(5.0 / 6.0) * (1.0 + k) * e)
                    }
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelConfig {
    pub family: KernelFamily,
    /// Log10 length-scale weights, one per scaled coordinate.
    pub omega: Vec<f64>,
}

/// One row as seen by the kernel.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct UnifiedInput {
    pub scaled: Vec<f64>,
    pub latent: Vec<f64>,
}

impl UnifiedInput {
    pub fn new(scaled: Vec<f64>, latent: Vec<f64>) -> Self {
        Self { scaled, latent }
    }
}

impl KernelConfig {
    pub fn new(family: KernelFamily, omega: Vec<f64>) -> Self {
        Self { family, omega }
    }

    pub fn validate(&self) -> Result<()> {
        self.family.validate()?;
        if let Some(w) = self.omega.iter().find(|w| !(OMEGA_MIN..=OMEGA_MAX).contains(*w)) {
            return contract(format!("omega {w} outside [{OMEGA_MIN}, {OMEGA_MAX}]"));
        }
        Ok(())
    }

    /// Weighted distance `s` between two inputs given precomputed `10^ω`.
    #[inline]
    pub(crate) fn distance(&self, weights: &[f64], a: &UnifiedInput, b: &UnifiedInput) -> f64 {
        let mut s = 0.0;
        for (w, (u, v)) in weights.iter().zip(a.scaled.iter().zip(&b.scaled)) {
            s += w * self.family.coord(u - v).0;
        }
        for k in 0..a.latent.len() {
            let d = a.latent[k] - b.latent[k];
            s += d * d;
        }
        s
    }

    pub fn weights(&self) -> Vec<f64> {
        self.omega.iter().map(|w| 10f64.powf(*w)).collect()
    }

    /// Correlation `r(a, b)` in `(0, 1]`.
    pub fn correlation(&self, a: &UnifiedInput, b: &UnifiedInput) -> Result<f64> {
        if a.scaled.len() != self.omega.len() || b.scaled.len() != self.omega.len() {
            return contract(format!(
                "scaled block of width {} and {} does not match {} omega values",
                a.scaled.len(),
                b.scaled.len(),
                self.omega.len()
            ));
        }
        if a.latent.len() != b.latent.len() {
            return contract("latent blocks differ in width");
        }
        let s = self.distance(&self.weights(), a, b);
        Ok(self.family.profile(s).0)
    }
}

/// Free-function form of [`KernelConfig::correlation`].
pub fn eval_correlation(cfg: &KernelConfig, a: &UnifiedInput, b: &UnifiedInput) -> Result<f64> {
    cfg.correlation(a, b)
}

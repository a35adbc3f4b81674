//! Model configuration.

use serde::{Deserialize, Serialize};

use crate::embedding::{CategoricalSpec, MapKind, PriorEncoding};
use crate::error::{contract, Result};
use crate::kernel::KernelFamily;
use crate::prior::{Prior, PriorSpec};

/// A basis function of the raw (unstandardized) numeric features.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum BasisTerm {
    Constant,
    Power { col: usize, power: i32 },
    Sin { col: usize },
    Cos { col: usize },
}

impl BasisTerm {
    pub fn eval(&self, x: &[f64]) -> f64 {
        match *self {
            BasisTerm::Constant => 1.0,
            BasisTerm::Power { col, power } => x[col].powi(power),
            BasisTerm::Sin { col } => x[col].sin(),
            BasisTerm::Cos { col } => x[col].cos(),
        }
    }

    fn column(&self) -> Option<usize> {
        match *self {
            BasisTerm::Constant => None,
            BasisTerm::Power { col, .. } | BasisTerm::Sin { col } | BasisTerm::Cos { col } => Some(col),
        }
    }
}

/// Polynomial basis `1, x_col, …, x_col^degree`.
pub fn polynomial(col: usize, degree: i32) -> Vec<BasisTerm> {
    let mut v = vec![BasisTerm::Constant];
    v.extend((1..=degree).map(|p| BasisTerm::Power { col, power: p }));
    v
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum MeanSpec {
    Zero,
    SingleConstant,
    /// One constant per source; source 0 is fixed at zero.
    PerSourceConstants,
    /// Per-source linear combinations of basis terms on the original
    /// response scale; an empty list gives that source a zero mean. A
    /// single list is shared by all sources.
    PolynomialBases {
        terms: Vec<Vec<BasisTerm>>,
    },
    /// Network over the scaled features and latent coordinates.
    FeedForward {
        hidden: Vec<usize>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum NoiseSpec {
    Single,
    PerSource,
    Fixed(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum SourceEmbedding {
    Deterministic,
    Probabilistic { hidden: usize, train_draws: usize, predict_draws: usize },
}

impl SourceEmbedding {
    pub fn probabilistic() -> Self {
        SourceEmbedding::Probabilistic { hidden: 5, train_draws: 20, predict_draws: 30 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CalibrationMode {
    Deterministic,
    Probabilistic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationSpec {
    pub dims: usize,
    pub mode: CalibrationMode,
    /// Sources whose rows receive the estimated values.
    pub hf_sources: Vec<usize>,
    /// Per-dimension `(mean, std)` prior on the standardized scale.
    pub prior: Vec<(f64, f64)>,
}

impl CalibrationSpec {
    pub fn new(dims: usize, mode: CalibrationMode) -> Self {
        Self { dims, mode, hf_sources: vec![0], prior: vec![(0.0, 1.0); dims] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub kernel: KernelFamily,
    pub categorical: CategoricalSpec,
    pub encoding: PriorEncoding,
    pub map: MapKind,
    pub embedding_dim: usize,
    pub sources: usize,
    pub source_embedding: SourceEmbedding,
    pub source_dim: usize,
    pub mean: MeanSpec,
    pub noise: NoiseSpec,
    pub lb_noise: f64,
    pub calibration: Option<CalibrationSpec>,
    pub priors: PriorSpec,
    /// Overrides the prior on linear embedding weights.
    pub latent_prior: Option<Prior>,
    /// `(L1, L2)` penalty on embedding and mean parameters.
    pub regularization: [f64; 2],
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            kernel: KernelFamily::Gaussian,
            categorical: CategoricalSpec { levels: vec![] },
            encoding: PriorEncoding::GroupedOneHot,
            map: MapKind::Linear,
            embedding_dim: 2,
            sources: 1,
            source_embedding: SourceEmbedding::Deterministic,
            source_dim: 2,
            mean: MeanSpec::SingleConstant,
            noise: NoiseSpec::Single,
            lb_noise: 1e-8,
            calibration: None,
            priors: PriorSpec::default(),
            latent_prior: None,
            regularization: [0.0, 0.0],
        }
    }
}

/// Combination count above which linear embedding weights get a tighter prior.
pub const TIGHT_PRIOR_COMBINATIONS: usize = 200;

impl ModelConfig {
    /// Defaults for fusing `sources` sources: per-source noise.
    pub fn multi_fidelity(sources: usize) -> Self {
        Self { sources, noise: if sources > 1 { NoiseSpec::PerSource } else { NoiseSpec::Single }, ..Self::default() }
    }

    pub fn with_categorical(mut self, levels: Vec<usize>) -> Result<Self> {
        self.categorical = CategoricalSpec::new(levels)?;
        Ok(self)
    }

    pub fn dzeta(&self) -> usize {
        self.calibration.as_ref().map_or(0, |c| c.dims)
    }

    pub fn has_h(&self) -> bool {
        !self.categorical.levels.is_empty()
    }

    pub fn has_z(&self) -> bool {
        self.sources > 1
    }

    /// Width of the categorical latent block.
    pub fn h_width(&self) -> usize {
        if !self.has_h() {
            0
        } else if self.encoding == PriorEncoding::PerVariableOneHot {
            self.embedding_dim * self.categorical.levels.len()
        } else {
            self.embedding_dim
        }
    }

    pub fn z_width(&self) -> usize {
        if self.has_z() {
            self.source_dim
        } else {
            0
        }
    }

    pub fn is_ensemble(&self) -> bool {
        let prob_z = self.has_z() && matches!(self.source_embedding, SourceEmbedding::Probabilistic { .. });
        let prob_zeta = self.calibration.as_ref().is_some_and(|c| c.mode == CalibrationMode::Probabilistic);
        prob_z || prob_zeta
    }

    pub fn train_draws(&self) -> usize {
        match self.source_embedding {
            SourceEmbedding::Probabilistic { train_draws, .. } if self.has_z() => train_draws,
            _ => 20,
        }
    }

    pub fn predict_draws(&self) -> usize {
        match self.source_embedding {
            SourceEmbedding::Probabilistic { predict_draws, .. } if self.has_z() => predict_draws,
            _ => 30,
        }
    }

    pub fn latent_prior(&self) -> Prior {
        if let Some(p) = self.latent_prior {
            return p;
        }
        if self.has_h() && self.categorical.num_combinations() > TIGHT_PRIOR_COMBINATIONS {
            Prior::Normal { mean: 0.0, std: 0.1 }
        } else {
            self.priors.latent
        }
    }

    /// Number of noise parameters that are estimated.
    pub fn noise_params(&self) -> usize {
        match self.noise {
            NoiseSpec::Fixed(_) => 0,
            NoiseSpec::Single => 1,
            NoiseSpec::PerSource => self.sources.max(1),
        }
    }

    pub fn validate(&self, dx: usize) -> Result<()> {
        self.kernel.validate()?;
        if self.sources == 0 {
            return contract("at least one source is required");
        }
        if self.lb_noise <= 0.0 {
            return contract("lb_noise must be positive");
        }
        if let NoiseSpec::Fixed(v) = self.noise {
            if v <= 0.0 {
                return contract("fixed noise must be positive");
            }
        }
        if self.has_h() && self.embedding_dim == 0 {
            return contract("embedding dimension must be positive");
        }
        if self.has_z() && self.source_dim == 0 {
            return contract("source embedding dimension must be positive");
        }
        if let PriorEncoding::RandomMatrix { width, .. } = self.encoding {
            if width == 0 {
                return contract("random encoding width must be positive");
            }
        }
        if let MeanSpec::PolynomialBases { terms } = &self.mean {
            if terms.len() != 1 && terms.len() != self.sources {
                return contract(format!("{} basis lists given for {} sources", terms.len(), self.sources));
            }
            for t in terms.iter().flatten() {
                if t.column().is_some_and(|c| c >= dx) {
                    return contract(format!("basis term {t:?} refers to a missing column"));
                }
            }
        }
        if let MeanSpec::FeedForward { hidden } = &self.mean {
            if hidden.contains(&0) {
                return contract("hidden layers must be non-empty");
            }
        }
        if let Some(c) = &self.calibration {
            if c.dims == 0 {
                return contract("calibration needs at least one parameter");
            }
            if c.prior.len() != c.dims {
                return contract("calibration prior length differs from the number of parameters");
            }
            if c.hf_sources.is_empty() || c.hf_sources.iter().any(|s| *s >= self.sources) {
                return contract("calibration high-fidelity sources are invalid");
            }
            if c.prior.iter().any(|(_, s)| *s <= 0.0) {
                return contract("calibration prior std must be positive");
            }
        }
        Ok(())
    }
}

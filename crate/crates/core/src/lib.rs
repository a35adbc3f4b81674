//! Gaussian-process emulation with learned embeddings for categorical
//! inputs and data sources: multi-fidelity fusion, calibration, cost-aware
//! Bayesian optimization and sensitivity analysis.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod autodiff;
pub mod bayesopt;
pub mod benchmarks;
pub mod calibration;
pub mod config;
pub mod data;
pub mod embedding;
pub mod error;
pub mod gp;
pub mod kernel;
pub mod linalg;
pub mod multifidelity;
mod objective;
pub mod optim;
pub mod params;
pub mod persist;
pub mod prior;
pub mod qmc;
pub mod stats;
pub mod training;

pub use analysis::{nis, nrmse, s_cat, sobol_indices, InputDomain, SensitivityReport};
pub use bayesopt::{run_bo, AcquisitionKind, BOConfig, BOState};
pub use benchmarks::BenchmarkProblem;
pub use calibration::{calibrate, CalibrationConfig, CalibrationPosterior};
pub use config::{CalibrationMode, CalibrationSpec, MeanSpec, ModelConfig, NoiseSpec, SourceEmbedding};
pub use data::{augment_sources, Inputs, MfDataset, SourceData, Standardization};
pub use error::{Error, Result};
pub use gp::{fit, PredictiveDistribution, TrainedModel};
pub use multifidelity::{EnsembleModel, Surrogate};
pub use objective::{Draws, Evaluation};
pub use persist::ModelFile;
pub use training::{IntervalScoreConfig, OptimizerConfig};

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/introduction.md")]
pub mod chapter1 {}
#[cfg(doctest)]
#[doc = include_str!("../../../book/src/emulation.md")]
pub mod chapter2 {}
#[cfg(doctest)]
#[doc = include_str!("../../../book/src/categorical.md")]
pub mod chapter3 {}
#[cfg(doctest)]
#[doc = include_str!("../../../book/src/multifidelity.md")]
pub mod chapter4 {}
#[cfg(doctest)]
#[doc = include_str!("../../../book/src/calibration.md")]
pub mod chapter5 {}
#[cfg(doctest)]
#[doc = include_str!("../../../book/src/optimization.md")]
pub mod chapter6 {}
#[cfg(doctest)]
#[doc = include_str!("../../../book/src/sensitivity.md")]
pub mod chapter7 {}
#[cfg(doctest)]
#[doc = include_str!("../../../book/src/persistence.md")]
pub mod chapter8 {}
#[cfg(doctest)]
#[doc = include_str!("../../../book/src/cli.md")]
pub mod chapter9 {}

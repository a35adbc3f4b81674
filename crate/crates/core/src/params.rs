//! Flat unconstrained parameter vector and its named blocks.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::autodiff::sigmoid;
use crate::config::{MeanSpec, ModelConfig, NoiseSpec, SourceEmbedding};
use crate::embedding::{layer_sizes, map_param_count, map_param_fan_in, MapKind, ProbabilisticEmbedding};
use crate::kernel::{OMEGA_MAX, OMEGA_MIN};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BlockKind {
    Omega,
    LogSigma2,
    Noise,
    Mean,
    /// Categorical embedding map; index of the encoded block.
    EmbedT(usize),
    EmbedS,
    ZetaMean,
    ZetaLogStd,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Block {
    pub kind: BlockKind,
    pub start: usize,
    pub len: usize,
}

impl Block {
    pub fn range(&self) -> std::ops::Range<usize> {
        self.start..self.start + self.len
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layout {
    pub blocks: Vec<Block>,
    pub dim: usize,
    pub dx: usize,
    /// Input widths of the categorical maps (one per encoded block).
    pub t_inputs: Vec<usize>,
}

const OMEGA_SPAN: f64 = OMEGA_MAX - OMEGA_MIN;

pub fn omega_from_raw(raw: f64) -> f64 {
    OMEGA_MIN + OMEGA_SPAN * sigmoid(raw)
}

pub fn omega_to_raw(omega: f64) -> f64 {
    let p = ((omega - OMEGA_MIN) / OMEGA_SPAN).clamp(1e-12, 1.0 - 1e-12);
    (p / (1.0 - p)).ln()
}

/// Input width of the mean network.
pub(crate) fn mean_network_input(cfg: &ModelConfig, dx: usize) -> usize {
    dx + cfg.dzeta() + cfg.h_width() + cfg.z_width()
}

pub(crate) fn mean_network_sizes(cfg: &ModelConfig, dx: usize, hidden: &[usize]) -> Vec<usize> {
    layer_sizes(&MapKind::FeedForward { hidden: hidden.to_vec() }, mean_network_input(cfg, dx), 1)
}

pub(crate) fn generator(cfg: &ModelConfig) -> Option<ProbabilisticEmbedding> {
    match cfg.source_embedding {
        SourceEmbedding::Probabilistic { hidden, train_draws, predict_draws } if cfg.has_z() => {
            let mut pe = ProbabilisticEmbedding::new(cfg.sources, cfg.source_dim);
            pe.hidden = hidden;
            pe.train_draws = train_draws;
            pe.predict_draws = predict_draws;
            pe.params = vec![];
            Some(pe)
        }
        _ => None,
    }
}

impl Layout {
    pub fn new(cfg: &ModelConfig, dx: usize) -> Self {
        let mut blocks = Vec::new();
        let mut at = 0;
        let mut push = |kind, len: usize, blocks: &mut Vec<Block>| {
            if len > 0 {
                blocks.push(Block { kind, start: at, len });
                at += len;
            }
        };
        push(BlockKind::Omega, dx + cfg.dzeta(), &mut blocks);
        push(BlockKind::LogSigma2, 1, &mut blocks);
        push(BlockKind::Noise, cfg.noise_params(), &mut blocks);
        let mean_len = match &cfg.mean {
            MeanSpec::Zero => 0,
            MeanSpec::SingleConstant => 1,
            MeanSpec::PerSourceConstants => cfg.sources - 1,
            MeanSpec::PolynomialBases { terms } => terms.iter().map(|t| t.len()).sum(),
            MeanSpec::FeedForward { hidden } => {
                let s = mean_network_sizes(cfg, dx, hidden);
                s.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
            }
        };
        push(BlockKind::Mean, mean_len, &mut blocks);
        let t_inputs = if cfg.has_h() { cfg.encoding.widths(&cfg.categorical) } else { vec![] };
        for (b, w) in t_inputs.iter().enumerate() {
            push(BlockKind::EmbedT(b), map_param_count(&cfg.map, *w, cfg.embedding_dim), &mut blocks);
        }
        if cfg.has_z() {
            let len = match generator(cfg) {
                Some(pe) => pe.param_count(),
                None => cfg.sources * cfg.source_dim,
            };
            push(BlockKind::EmbedS, len, &mut blocks);
        }
        if let Some(c) = &cfg.calibration {
            push(BlockKind::ZetaMean, c.dims, &mut blocks);
            if c.mode == crate::config::CalibrationMode::Probabilistic {
                push(BlockKind::ZetaLogStd, c.dims, &mut blocks);
            }
        }
        Self { blocks, dim: at, dx, t_inputs }
    }

    pub fn block(&self, kind: BlockKind) -> Option<Block> {
        self.blocks.iter().copied().find(|b| b.kind == kind)
    }

    pub fn slice<'a, T>(&self, kind: BlockKind, theta: &'a [T]) -> &'a [T] {
        match self.block(kind) {
            Some(b) => &theta[b.range()],
            None => &[],
        }
    }

    /// Human-readable name of every coordinate.
    pub fn names(&self) -> Vec<String> {
        let mut names = Vec::with_capacity(self.dim);
        for b in &self.blocks {
            let base = match b.kind {
                BlockKind::Omega => "omega".to_string(),
                BlockKind::LogSigma2 => "log_sigma2".to_string(),
                BlockKind::Noise => "noise_raw".to_string(),
                BlockKind::Mean => "mean".to_string(),
                BlockKind::EmbedT(k) => format!("embed_t{k}"),
                BlockKind::EmbedS => "embed_s".to_string(),
                BlockKind::ZetaMean => "zeta_mean".to_string(),
                BlockKind::ZetaLogStd => "zeta_log_std".to_string(),
            };
            for i in 0..b.len {
                names.push(format!("{base}[{i}]"));
            }
        }
        names
    }

    /// Box bounds on the unconstrained scale.
    pub fn bounds(&self) -> (Vec<f64>, Vec<f64>) {
        let mut lo = vec![0.0; self.dim];
        let mut hi = vec![0.0; self.dim];
        for b in &self.blocks {
            let (l, h) = match b.kind {
                BlockKind::Omega => (-14.0, 14.0),
                BlockKind::LogSigma2 => (-14.0, 12.0),
                BlockKind::Noise => (-25.0, 6.0),
                BlockKind::Mean => (-1e3, 1e3),
                BlockKind::EmbedT(_) | BlockKind::EmbedS => (-50.0, 50.0),
                BlockKind::ZetaMean => (-20.0, 20.0),
                BlockKind::ZetaLogStd => (-15.0, 3.0),
            };
            for i in b.range() {
                lo[i] = l;
                hi[i] = h;
            }
        }
        (lo, hi)
    }

    /// Parameters covered by the regularization penalty.
    pub fn regularized(&self) -> Vec<usize> {
        self.blocks
            .iter()
            .filter(|b| matches!(b.kind, BlockKind::Mean | BlockKind::EmbedT(_) | BlockKind::EmbedS))
            .flat_map(|b| b.range())
            .collect()
    }

    /// Fan-in per embedding parameter, `None` for linear maps.
    fn fan_in(&self, cfg: &ModelConfig, kind: BlockKind) -> Vec<Option<usize>> {
        match kind {
            BlockKind::EmbedT(k) => map_param_fan_in(&cfg.map, self.t_inputs[k], cfg.embedding_dim),
            BlockKind::EmbedS => match generator(cfg) {
                Some(pe) => map_param_fan_in(&pe.kind(), pe.sources, pe.head_width()),
                None => vec![None; cfg.sources * cfg.source_dim],
            },
            BlockKind::Mean => match &cfg.mean {
                MeanSpec::FeedForward { hidden } => {
                    let s = mean_network_sizes(cfg, self.dx, hidden);
                    map_param_fan_in(&MapKind::FeedForward { hidden: hidden.clone() }, s[0], 1)
                }
                _ => vec![None; self.block(kind).map_or(0, |b| b.len)],
            },
            _ => vec![],
        }
    }

    /// Starting point. With `sample = false` every prior-governed
    /// parameter sits at its prior center; embedding weights are always
    /// drawn, since a zero embedding is a stationary point.
    pub fn start<R: Rng + ?Sized>(&self, cfg: &ModelConfig, rng: &mut R, sample: bool) -> Vec<f64> {
        let (lo, hi) = self.bounds();
        let mut theta = vec![0.0; self.dim];
        let priors = &cfg.priors;
        let latent_prior = cfg.latent_prior();
        for b in &self.blocks {
            let fan = self.fan_in(cfg, b.kind);
            for (k, i) in b.range().enumerate() {
                let draw = |p: &crate::prior::Prior, rng: &mut R| if sample { p.sample(rng) } else { p.center() };
                let v = match b.kind {
                    BlockKind::Omega => {
                        omega_to_raw(draw(&priors.omega, rng).clamp(OMEGA_MIN + 1e-6, OMEGA_MAX - 1e-6))
                    }
                    BlockKind::LogSigma2 => draw(&priors.sigma2, rng).abs().max(1e-8).ln(),
                    BlockKind::Noise => {
                        let delta = match cfg.noise {
                            NoiseSpec::Fixed(v) => v,
                            _ => draw(&priors.noise, rng).abs(),
                        };
                        (delta - cfg.lb_noise).max(1e-10).ln()
                    }
                    BlockKind::Mean => match fan[k] {
                        Some(f) => gauss(rng) / (f as f64).sqrt(),
                        None => draw(&priors.mean, rng),
                    },
                    BlockKind::EmbedT(_) | BlockKind::EmbedS => match fan[k] {
                        Some(f) => gauss(rng) / (f as f64).sqrt(),
                        None => latent_prior.sample(rng),
                    },
                    BlockKind::ZetaMean => {
                        let (m, s) = cfg.calibration.as_ref().map_or((0.0, 1.0), |c| c.prior[k]);
                        if sample {
                            m + s * gauss(rng)
                        } else {
                            m
                        }
                    }
                    BlockKind::ZetaLogStd => draw(&priors.calibration_log_std, rng),
                };
                theta[i] = v.clamp(lo[i], hi[i]);
            }
        }
        theta
    }
}

fn gauss<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}

#![allow(dead_code)]

use latentgp::config::{polynomial, CalibrationMode, CalibrationSpec, MeanSpec, NoiseSpec, SourceEmbedding};
use latentgp::embedding::{MapKind, PriorEncoding};
use latentgp::gp::evaluate_map;
use latentgp::kernel::{KernelFamily, MaternNu};
use latentgp::params::Layout;
use latentgp::{Draws, IntervalScoreConfig, MfDataset, ModelConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn dataset(rng: &mut ChaCha8Rng, n: usize, dx: usize, levels: &[usize], sources: usize, dzeta: usize) -> MfDataset {
    let mut d = MfDataset::default();
    for i in 0..n {
        let x: Vec<f64> = (0..dx).map(|_| rng.random_range(-1.0..2.0)).collect();
        let t: Vec<usize> = levels.iter().map(|l| rng.random_range(0..*l)).collect();
        let s = i % sources;
        let zeta = (dzeta > 0 && s != 0).then(|| (0..dzeta).map(|_| rng.random_range(0.0..3.0)).collect());
        let y = x.iter().map(|v| v.sin()).sum::<f64>() + t.iter().sum::<usize>() as f64 * 0.3 + s as f64;
        d.push(x, t, s, zeta, y + 0.1 * rng.random_range(-1.0..1.0));
    }
    d
}

/// Compares the analytic loss gradient with central differences at 20
/// prior draws.
pub fn gradient_check(
    name: &str,
    cfg: &ModelConfig,
    data: &MfDataset,
    draws: &Draws,
    penalty: Option<IntervalScoreConfig>,
) -> Result<(), String> {
    let layout = Layout::new(cfg, data.inputs.dx());
    let (lo, hi) = layout.bounds();
    let loss = |theta: &[f64]| evaluate_map(cfg, data, theta, draws, penalty).map_err(|e| format!("{name}: {e}"));
    for trial in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(100 + trial);
        let mut theta = layout.start(cfg, &mut rng, true);
        for (i, v) in theta.iter_mut().enumerate() {
            *v = v.clamp(lo[i] + 1e-3, hi[i] - 1e-3);
        }
        let e = loss(&theta)?;
        let h = 1e-5;
        let mut fds = Vec::with_capacity(theta.len());
        for k in 0..theta.len() {
            let mut tp = theta.clone();
            tp[k] += h;
            let mut tm = theta.clone();
            tm[k] -= h;
            fds.push((loss(&tp)?.loss - loss(&tm)?.loss) / (2.0 * h));
        }
        // components far below the gradient scale are limited by roundoff in the loss
        let scale = fds.iter().fold(1e-2f64, |m, v| m.max(1e-3 * v.abs()));
        for (k, fd) in fds.iter().enumerate() {
            let err = (e.grad[k] - fd).abs() / fd.abs().max(scale);
            if err.is_nan() || err >= 1e-4 {
                return Err(format!(
                    "{name} trial {trial} coordinate {k} ({}): analytic {} vs fd {fd}",
                    layout.names()[k],
                    e.grad[k]
                ));
            }
        }
    }
    Ok(())
}

pub struct GradientCase {
    pub group: &'static str,
    pub name: String,
    pub cfg: ModelConfig,
    pub data: MfDataset,
    pub draws: Draws,
    pub penalty: Option<IntervalScoreConfig>,
}

impl GradientCase {
    pub fn check(&self) -> Result<(), String> {
        gradient_check(&self.name, &self.cfg, &self.data, &self.draws, self.penalty)
    }
}

/// Every registered loss configuration.
pub fn gradient_cases() -> Vec<GradientCase> {
    let mut out = vec![];
    let mut add = |group, name: &str, cfg: &ModelConfig, data: &MfDataset, draws: Draws, penalty| {
        out.push(GradientCase { group, name: name.into(), cfg: cfg.clone(), data: data.clone(), draws, penalty })
    };

    let data = dataset(&mut ChaCha8Rng::seed_from_u64(1), 9, 2, &[], 1, 0);
    for family in [
        KernelFamily::Gaussian,
        KernelFamily::PowerExponential(1.5),
        KernelFamily::Matern(MaternNu::Half),
        KernelFamily::Matern(MaternNu::ThreeHalves),
        KernelFamily::Matern(MaternNu::FiveHalves),
    ] {
        let cfg = ModelConfig { kernel: family, ..ModelConfig::default() };
        add("kernels", &format!("{family:?}"), &cfg, &data, Draws::single(), None);
    }

    let data = dataset(&mut ChaCha8Rng::seed_from_u64(2), 12, 1, &[3, 2], 1, 0);
    let base = ModelConfig::default().with_categorical(vec![3, 2]).unwrap();
    add("categorical", "grouped", &base, &data, Draws::single(), None);
    let per = ModelConfig { encoding: PriorEncoding::PerVariableOneHot, ..base.clone() };
    add("categorical", "per-variable", &per, &data, Draws::single(), None);
    let rnd = ModelConfig { encoding: PriorEncoding::RandomMatrix { seed: 3, width: 4 }, ..base.clone() };
    add("categorical", "random", &rnd, &data, Draws::single(), None);
    let net = ModelConfig { map: MapKind::FeedForward { hidden: vec![3] }, regularization: [0.01, 0.02], ..base };
    add("categorical", "network map", &net, &data, Draws::single(), None);

    let data = dataset(&mut ChaCha8Rng::seed_from_u64(3), 12, 1, &[], 3, 0);
    let mut cfg = ModelConfig::multi_fidelity(3);
    cfg.mean = MeanSpec::PerSourceConstants;
    add("fusion", "mf constants", &cfg, &data, Draws::single(), None);
    cfg.mean = MeanSpec::PolynomialBases { terms: vec![vec![], polynomial(0, 2), polynomial(0, 1)] };
    add("fusion", "mf bases", &cfg, &data, Draws::single(), None);
    cfg.mean = MeanSpec::FeedForward { hidden: vec![3] };
    add("fusion", "mf network mean", &cfg, &data, Draws::single(), None);

    let data = dataset(&mut ChaCha8Rng::seed_from_u64(4), 10, 1, &[], 2, 0);
    let mut cfg = ModelConfig::multi_fidelity(2);
    cfg.source_embedding = SourceEmbedding::probabilistic();
    cfg.mean = MeanSpec::PerSourceConstants;
    let draws = Draws::sample(&cfg, 4, 9, 0);
    add("ensemble", "ensemble", &cfg, &data, draws.clone(), None);
    cfg.mean = MeanSpec::FeedForward { hidden: vec![2] };
    add("ensemble", "ensemble network mean", &cfg, &data, draws, None);

    let data = dataset(&mut ChaCha8Rng::seed_from_u64(5), 10, 1, &[], 2, 2);
    let mut cfg = ModelConfig::multi_fidelity(2);
    cfg.calibration = Some(CalibrationSpec::new(2, CalibrationMode::Deterministic));
    cfg.mean = MeanSpec::PerSourceConstants;
    add("calibration", "calibration", &cfg, &data, Draws::single(), None);
    cfg.calibration = Some(CalibrationSpec::new(2, CalibrationMode::Probabilistic));
    let draws = Draws::sample(&cfg, 3, 2, 0);
    add("calibration", "probabilistic calibration", &cfg, &data, draws, None);

    let data = dataset(&mut ChaCha8Rng::seed_from_u64(6), 9, 2, &[], 2, 0);
    let mut cfg = ModelConfig::multi_fidelity(2);
    cfg.noise = NoiseSpec::PerSource;
    add("penalty", "penalized", &cfg, &data, Draws::single(), Some(IntervalScoreConfig::default()));
    out
}

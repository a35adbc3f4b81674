use latentgp::config::{MeanSpec, NoiseSpec};
use latentgp::gp::{build_covariance, log_map_loss, log_prior, NoiseModel};
use latentgp::kernel::{eval_correlation, KernelConfig, KernelFamily, MaternNu, UnifiedInput};
use latentgp::params::{omega_to_raw, BlockKind, Layout};
use latentgp::prior::{Prior, PriorSpec};
use latentgp::training::OptimizerConfig;
use latentgp::{fit, Inputs, MfDataset, ModelConfig, Standardization, TrainedModel};
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const FAMILIES: [KernelFamily; 6] = [
    KernelFamily::Gaussian,
    KernelFamily::PowerExponential(1.0),
    KernelFamily::PowerExponential(1.5),
    KernelFamily::Matern(MaternNu::Half),
    KernelFamily::Matern(MaternNu::ThreeHalves),
    KernelFamily::Matern(MaternNu::FiveHalves),
];

fn flat_priors() -> PriorSpec {
    PriorSpec {
        omega: Prior::Flat,
        sigma2: Prior::Flat,
        noise: Prior::Flat,
        mean: Prior::Flat,
        latent: Prior::Flat,
        network: Prior::Flat,
        calibration: Prior::Flat,
        calibration_log_std: Prior::Flat,
    }
}

fn identity_standardization(dx: usize) -> Standardization {
    Standardization {
        x_mean: vec![0.0; dx],
        x_std: vec![1.0; dx],
        zeta_mean: vec![],
        zeta_std: vec![],
        y_mean: 0.0,
        y_std: 1.0,
    }
}

/// Unconstrained parameter vector from natural values of a numeric model
/// with a single constant mean.
fn theta_of(cfg: &ModelConfig, omega: &[f64], sigma2: f64, delta: Option<f64>, beta: Option<f64>) -> Vec<f64> {
    let layout = Layout::new(cfg, omega.len());
    let mut theta = vec![0.0; layout.dim];
    for (i, w) in layout.block(BlockKind::Omega).unwrap().range().zip(omega) {
        theta[i] = omega_to_raw(*w);
    }
    theta[layout.block(BlockKind::LogSigma2).unwrap().start] = sigma2.ln();
    if let (Some(b), Some(d)) = (layout.block(BlockKind::Noise), delta) {
        theta[b.start] = (d - cfg.lb_noise).ln();
    }
    if let (Some(b), Some(m)) = (layout.block(BlockKind::Mean), beta) {
        theta[b.start] = m;
    }
    theta
}

fn numeric_data(x: Vec<Vec<f64>>, y: Vec<f64>) -> MfDataset {
    MfDataset::new(Inputs::numeric(x), y).unwrap()
}

fn gaussian_oracle(omega: &[f64], a: &[f64], b: &[f64]) -> f64 {
    let s: f64 = omega.iter().zip(a.iter().zip(b)).map(|(w, (u, v))| 10f64.powf(*w) * (u - v).powi(2)).sum();
    (-s).exp()
}

#[test]
fn correlation_of_identical_inputs_is_one() {
    let a = UnifiedInput::new(vec![0.3, -1.2], vec![0.5, 0.1]);
    for family in FAMILIES {
        let cfg = KernelConfig::new(family, vec![0.7, -2.0]);
        assert_eq!(eval_correlation(&cfg, &a, &a).unwrap(), 1.0);
    }
}

#[test]
fn gaussian_unit_distance_correlation() {
    let cfg = KernelConfig::new(KernelFamily::Gaussian, vec![0.0]);
    let r =
        eval_correlation(&cfg, &UnifiedInput::new(vec![0.0], vec![]), &UnifiedInput::new(vec![1.0], vec![])).unwrap();
    assert!((r - 0.367879).abs() < 1e-6);
}

#[test]
fn latent_offset_correlation() {
    let cfg = KernelConfig::new(KernelFamily::Gaussian, vec![1.3]);
    let a = UnifiedInput::new(vec![0.4], vec![0.2, 0.0, 0.0]);
    let b = UnifiedInput::new(vec![0.4], vec![0.2, 1.0, 1.0]);
    let r = eval_correlation(&cfg, &a, &b).unwrap();
    assert!((r - 0.135335).abs() < 1e-6);
}

#[test]
fn omega_width_mismatch_rejected() {
    let cfg = KernelConfig::new(KernelFamily::Gaussian, vec![0.0, 0.0]);
    let a = UnifiedInput::new(vec![0.0], vec![]);
    assert!(matches!(eval_correlation(&cfg, &a, &a), Err(latentgp::Error::Contract(_))));
}

#[test]
fn single_point_covariance() {
    let cfg = KernelConfig::new(KernelFamily::Gaussian, vec![0.0]);
    let c =
        build_covariance(&cfg, 2.0, &[UnifiedInput::new(vec![0.5], vec![])], &NoiseModel::Single(0.1), &[0]).unwrap();
    assert_eq!(c.nrows(), 1);
    assert!((c[(0, 0)] - 2.1).abs() < 1e-15);
}

#[test]
fn duplicated_point_covariance() {
    let cfg = KernelConfig::new(KernelFamily::Gaussian, vec![0.0]);
    let u = UnifiedInput::new(vec![0.5], vec![]);
    let c = build_covariance(&cfg, 1.0, &[u.clone(), u], &NoiseModel::Single(1e-6), &[0, 0]).unwrap();
    let expect = DMatrix::from_row_slice(2, 2, &[1.0 + 1e-6, 1.0, 1.0, 1.0 + 1e-6]);
    assert!((c - expect).abs().max() < 1e-15);
}

#[test]
fn per_source_nugget_on_diagonal() {
    let cfg = KernelConfig::new(KernelFamily::Gaussian, vec![0.0]);
    let pts: Vec<UnifiedInput> = (0..3).map(|i| UnifiedInput::new(vec![i as f64 * 3.0], vec![])).collect();
    let c = build_covariance(&cfg, 1.0, &pts, &NoiseModel::PerSource(vec![0.1, 0.4]), &[0, 1, 1]).unwrap();
    assert!((c[(0, 0)] - 1.1).abs() < 1e-15);
    assert!((c[(1, 1)] - 1.4).abs() < 1e-15);
    assert!((c[(2, 2)] - 1.4).abs() < 1e-15);
}

#[test]
fn random_covariance_positive_definite() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..20 {
        let pts: Vec<UnifiedInput> = (0..5)
            .map(|_| UnifiedInput::new(vec![rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)], vec![]))
            .collect();
        let cfg =
            KernelConfig::new(KernelFamily::Gaussian, vec![rng.random_range(-2.0..1.0), rng.random_range(-2.0..1.0)]);
        let c = build_covariance(&cfg, 1.5, &pts, &NoiseModel::Single(1e-6), &[0; 5]).unwrap();
        let eig = c.symmetric_eigen().eigenvalues;
        assert!(eig.iter().all(|v| *v > 0.0), "{eig}");
    }
}

#[test]
fn unit_loss_at_zero_response() {
    let cfg = ModelConfig {
        mean: MeanSpec::Zero,
        noise: NoiseSpec::Fixed(0.5),
        priors: flat_priors(),
        ..ModelConfig::default()
    };
    let data = numeric_data(vec![vec![0.0]], vec![0.0]);
    let theta = theta_of(&cfg, &[0.0], 0.5, None, None);
    assert_eq!(log_map_loss(&cfg, &data, &theta).unwrap(), 0.0);
}

fn dense_likelihood(omega: &[f64], sigma2: f64, delta: f64, beta: f64, x: &[Vec<f64>], y: &[f64]) -> f64 {
    let n = y.len();
    let c =
        DMatrix::from_fn(n, n, |i, j| sigma2 * gaussian_oracle(omega, &x[i], &x[j]) + if i == j { delta } else { 0.0 });
    let r = nalgebra::DVector::from_iterator(n, y.iter().map(|v| v - beta));
    let lu = c.clone().lu();
    let det = lu.determinant();
    let sol = lu.solve(&r).unwrap();
    0.5 * det.ln() + 0.5 * r.dot(&sol)
}

#[test]
fn loss_matches_dense_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for trial in 0..10 {
        let x: Vec<Vec<f64>> = (0..5).map(|_| vec![rng.random_range(0.0..4.0), rng.random_range(-2.0..2.0)]).collect();
        let y: Vec<f64> = (0..5).map(|_| rng.random_range(-3.0..3.0)).collect();
        let data = numeric_data(x.clone(), y.clone());
        let st = Standardization::fit(&data, 0);
        let xs: Vec<Vec<f64>> = x.iter().map(|r| st.x(r)).collect();
        let ys: Vec<f64> = y.iter().map(|v| st.y(*v)).collect();
        let omega = [rng.random_range(-2.0..1.0), rng.random_range(-2.0..1.0)];
        let (sigma2, delta, beta) =
            (rng.random_range(0.3..3.0), rng.random_range(1e-3..0.5), rng.random_range(-1.0..1.0));

        let flat = ModelConfig { priors: flat_priors(), ..ModelConfig::default() };
        let theta = theta_of(&flat, &omega, sigma2, Some(delta), Some(beta));
        let want = dense_likelihood(&omega, sigma2, delta, beta, &xs, &ys);
        let got = log_map_loss(&flat, &data, &theta).unwrap();
        assert!((got - want).abs() <= 1e-9 * want.abs().max(1.0), "trial {trial}: {got} vs {want}");

        let cfg = ModelConfig::default();
        let theta = theta_of(&cfg, &omega, sigma2, Some(delta), Some(beta));
        let p = &cfg.priors;
        let prior = omega.iter().map(|w| p.omega.log_density(*w)).sum::<f64>()
            + p.sigma2.log_density(sigma2)
            + p.noise.log_density(delta)
            + (delta - cfg.lb_noise).ln()
            + p.mean.log_density(beta);
        let want = want - prior;
        let got = log_map_loss(&cfg, &data, &theta).unwrap();
        assert!((got - want).abs() <= 1e-9 * want.abs().max(1.0), "trial {trial}: {got} vs {want}");
    }
}

#[test]
fn log_prior_closed_forms() {
    let cfg = ModelConfig { noise: NoiseSpec::Fixed(1e-5), ..ModelConfig::default() };
    let theta = theta_of(&cfg, &[-3.0], 1.0, None, Some(0.0));
    let ln_sqrt_2pi = 0.5 * (2.0 * std::f64::consts::PI).ln();
    let omega_term = -(3.0 * (2.0 * std::f64::consts::PI).sqrt()).ln();
    let beta_term = -ln_sqrt_2pi;
    let sigma_term = -ln_sqrt_2pi;
    let got = log_prior(&cfg, 1, &theta).unwrap();
    let want = omega_term + beta_term + sigma_term;
    assert!((got - want).abs() < 1e-6, "{got} vs {want}");
}

#[test]
fn horseshoe_spike_is_monotone() {
    let p = Prior::HalfHorseshoe { scale: 0.01 };
    let mut prev = p.log_density(0.01);
    for k in 1..40 {
        let d = 0.01 * 0.7f64.powi(k);
        let v = p.log_density(d);
        assert!(v > prev, "{d}: {v} <= {prev}");
        prev = v;
    }
    assert!(p.log_density(1e-300) > p.log_density(1e-100));
    assert_eq!(p.log_density(-1.0), f64::NEG_INFINITY);
    assert_eq!(p.log_density(0.0), f64::NEG_INFINITY);
}

#[test]
fn interpolates_training_points() {
    let x: Vec<Vec<f64>> = (0..8).map(|i| vec![i as f64 * 0.45]).collect();
    let y: Vec<f64> = x.iter().map(|r| (2.0 * r[0]).sin() + 0.5 * r[0]).collect();
    let data = numeric_data(x.clone(), y.clone());
    let cfg = ModelConfig { noise: NoiseSpec::Fixed(1e-8), lb_noise: 1e-10, ..ModelConfig::default() };
    let m = fit(&cfg, &data, &OptimizerConfig::with_restarts(4), 0).unwrap();
    let p = m.predict(&Inputs::numeric(x), false).unwrap();
    let range = y.iter().cloned().fold(f64::MIN, f64::max) - y.iter().cloned().fold(f64::MAX, f64::min);
    let sigma2 = m.estimates.sigma2 * m.standardization().y_std.powi(2);
    for (i, yi) in y.iter().enumerate() {
        assert!((p.mean[i] - yi).abs() <= 1e-6 * range, "row {i}: {} vs {yi}", p.mean[i]);
        assert!(p.variance[i] <= 1e-6 * sigma2, "row {i}: variance {}", p.variance[i]);
    }
}

#[test]
fn single_point_prediction_formula() {
    let cfg = ModelConfig::default();
    let (omega, sigma2, delta, beta) = (-0.5, 1.7, 0.2, 0.3);
    let data = numeric_data(vec![vec![0.4]], vec![2.0]);
    let theta = theta_of(&cfg, &[omega], sigma2, Some(delta), Some(beta));
    let m = TrainedModel::from_theta(&cfg, &data, &theta, Some(identity_standardization(1))).unwrap();
    for xq in [0.4, 0.9, -1.3, 3.0] {
        let c = sigma2 * gaussian_oracle(&[omega], &[xq], &[0.4]);
        let want = beta + c * (2.0 - beta) / (sigma2 + delta);
        let p = m.predict(&Inputs::numeric(vec![vec![xq]]), false).unwrap();
        assert!((p.mean[0] - want).abs() < 1e-12, "{xq}: {} vs {want}", p.mean[0]);
        let var = sigma2 - c * c / (sigma2 + delta);
        assert!((p.variance[0] - var).abs() < 1e-12);
    }
}

#[test]
fn far_query_reverts_to_prior() {
    let cfg = ModelConfig::default();
    let (sigma2, delta, beta) = (1.3, 0.05, -0.4);
    let data = numeric_data(vec![vec![0.0], vec![0.5], vec![1.0]], vec![1.0, 2.0, 0.5]);
    let theta = theta_of(&cfg, &[0.0], sigma2, Some(delta), Some(beta));
    let m = TrainedModel::from_theta(&cfg, &data, &theta, Some(identity_standardization(1))).unwrap();
    let q = Inputs::numeric(vec![vec![40.0]]);
    let p = m.predict(&q, false).unwrap();
    assert!((p.mean[0] - beta).abs() < 1e-12);
    assert!((p.variance[0] - sigma2).abs() < 1e-12);
    let p = m.predict(&q, true).unwrap();
    assert!((p.variance[0] - sigma2 - delta).abs() < 1e-12);
    assert!(p.includes_noise);
}

#[test]
fn constant_shift_moves_mean_only() {
    let x: Vec<Vec<f64>> = vec![vec![0.0], vec![0.7], vec![1.1], vec![2.0], vec![2.6]];
    let y: Vec<f64> = vec![0.3, 1.2, 0.8, -0.4, 0.1];
    let shift = 17.25;
    let base = fit(&ModelConfig::default(), &numeric_data(x.clone(), y.clone()), &OptimizerConfig::with_restarts(4), 5)
        .unwrap();
    let ys: Vec<f64> = y.iter().map(|v| v + shift).collect();
    let moved = fit(&ModelConfig::default(), &numeric_data(x, ys), &OptimizerConfig::with_restarts(4), 5).unwrap();
    let q = Inputs::numeric(vec![vec![-0.5], vec![0.35], vec![1.9], vec![4.0]]);
    let a = base.predict_full(&q, false).unwrap();
    let b = moved.predict_full(&q, false).unwrap();
    for i in 0..4 {
        assert!((b.mean[i] - a.mean[i] - shift).abs() < 1e-9, "{} vs {}", b.mean[i], a.mean[i]);
    }
    let (ca, cb) = (a.covariance.unwrap(), b.covariance.unwrap());
    assert!((ca - cb).abs().max() < 1e-12);
}

#[test]
fn loo_residuals_match_refits() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for n in [4usize, 7, 12] {
        let x: Vec<Vec<f64>> = (0..n).map(|_| vec![rng.random_range(0.0..3.0), rng.random_range(0.0..1.0)]).collect();
        let y: Vec<f64> = x.iter().map(|r| r[0].cos() + r[1] * r[1] + 0.05 * rng.random_range(-1.0..1.0)).collect();
        let data = numeric_data(x.clone(), y.clone());
        let cfg = ModelConfig::default();
        let theta = theta_of(&cfg, &[-0.3, -0.8], 1.2, Some(0.01), Some(0.1));
        let st = Standardization::fit(&data, 0);
        let full = TrainedModel::from_theta(&cfg, &data, &theta, Some(st.clone())).unwrap();
        let loo = full.loo_residuals();
        for i in 0..n {
            let keep: Vec<usize> = (0..n).filter(|k| *k != i).collect();
            let m = TrainedModel::from_theta(&cfg, &data.select(&keep), &theta, Some(st.clone())).unwrap();
            let p = m.predict(&Inputs::numeric(vec![x[i].clone()]), false).unwrap();
            let brute = st.y(y[i]) - st.y(p.mean[0]);
            assert!((loo[i] - brute).abs() <= 1e-6 * brute.abs().max(1e-3), "n={n} row {i}: {} vs {brute}", loo[i]);
        }
    }
}

fn unified(dim: usize, latent: usize) -> impl Strategy<Value = UnifiedInput> {
    (prop::collection::vec(-3.0..3.0f64, dim), prop::collection::vec(-2.0..2.0f64, latent))
        .prop_map(|(s, l)| UnifiedInput::new(s, l))
}

proptest! {
    #[test]
    fn correlation_in_unit_interval(
        a in unified(3, 2),
        b in unified(3, 2),
        omega in prop::collection::vec(-10.0..4.0f64, 3),
        fam in 0usize..6,
    ) {
        let cfg = KernelConfig::new(FAMILIES[fam], omega);
        let r = eval_correlation(&cfg, &a, &b).unwrap();
        prop_assert!((0.0..=1.0).contains(&r));
        prop_assert_eq!(eval_correlation(&cfg, &a, &a).unwrap(), 1.0);
        prop_assert_eq!(r, eval_correlation(&cfg, &b, &a).unwrap());
    }

    #[test]
    fn correlation_positive_for_moderate_distances(
        a in unified(2, 1),
        b in unified(2, 1),
        omega in prop::collection::vec(-10.0..0.0f64, 2),
        fam in 0usize..6,
    ) {
        let cfg = KernelConfig::new(FAMILIES[fam], omega);
        prop_assert!(eval_correlation(&cfg, &a, &b).unwrap() > 0.0);
    }

    #[test]
    fn gaussian_equals_power_two(
        a in unified(3, 2),
        b in unified(3, 2),
        omega in prop::collection::vec(-10.0..4.0f64, 3),
    ) {
        let g = KernelConfig::new(KernelFamily::Gaussian, omega.clone());
        let p = KernelConfig::new(KernelFamily::PowerExponential(2.0), omega);
        prop_assert_eq!(eval_correlation(&g, &a, &b).unwrap(), eval_correlation(&p, &a, &b).unwrap());
    }

    #[test]
    fn covariance_symmetric_and_factorizable(
        pts in prop::collection::vec(unified(2, 0), 2..9),
        omega in prop::collection::vec(-3.0..2.0f64, 2),
        sigma2 in 0.1..5.0f64,
        fam in 0usize..6,
    ) {
        let n = pts.len();
        let cfg = KernelConfig::new(FAMILIES[fam], omega);
        let c = build_covariance(&cfg, sigma2, &pts, &NoiseModel::Single(1e-8), &vec![0; n]).unwrap();
        prop_assert!((&c - c.transpose()).abs().max() <= 1e-12);
        prop_assert!(c.clone().cholesky().is_some());
    }
}

use latentgp::gp::{continuation_fit, fit_with, FitOptions};
use latentgp::optim::FnProblem;
use latentgp::training::{
    fit_map, interval_score, penalized_loss, uniform_starts, ContinuationSchedule, OptimizerConfig,
};
use latentgp::{fit, BenchmarkProblem, IntervalScoreConfig, ModelConfig};
use proptest::prelude::*;

fn rosenbrock(x: &[f64]) -> (f64, Vec<f64>) {
    let (a, b) = (x[0], x[1]);
    let f = (1.0 - a).powi(2) + 100.0 * (b - a * a).powi(2);
    (f, vec![-2.0 * (1.0 - a) - 400.0 * a * (b - a * a), 200.0 * (b - a * a)])
}

#[test]
fn convex_quadratic() {
    let p = FnProblem { dim: 1, f: |x: &[f64]| ((x[0] - 3.0).powi(2), vec![2.0 * (x[0] - 3.0)]) };
    let starts = uniform_starts(&[-10.0], &[10.0], 5, 1);
    let fit = fit_map(&p, (&[-10.0], &[10.0]), &starts, &OptimizerConfig::with_restarts(5)).unwrap();
    assert!((fit.x[0] - 3.0).abs() < 1e-6);
}

#[test]
fn rosenbrock_from_32_starts() {
    let p = FnProblem { dim: 2, f: rosenbrock };
    let (lo, hi) = ([-2.0, -2.0], [2.0, 2.0]);
    let starts = uniform_starts(&lo, &hi, 32, 3);
    let fit = fit_map(&p, (&lo, &hi), &starts, &OptimizerConfig::default()).unwrap();
    let (f, _) = rosenbrock(&fit.x);
    assert!(f < 1e-8, "f = {f} at {:?}", fit.x);
    assert!((fit.x[0] - 1.0).abs() < 1e-3 && (fit.x[1] - 1.0).abs() < 1e-3);
}

#[test]
fn model_fit_is_deterministic() {
    let data = BenchmarkProblem::sinusoidal().sample(0, 10, 3, true).unwrap();
    let opt = OptimizerConfig::with_restarts(4);
    let a = fit(&ModelConfig::default(), &data, &opt, 9).unwrap();
    let b = fit(&ModelConfig::default(), &data, &opt, 9).unwrap();
    assert_eq!(a.theta, b.theta);
    let serial = OptimizerConfig { n_jobs: Some(1), ..opt };
    let c = fit(&ModelConfig::default(), &data, &serial, 9).unwrap();
    assert_eq!(a.theta, c.theta);
}

#[test]
fn single_rung_schedule_is_a_floored_fit() {
    let data = BenchmarkProblem::sinusoidal().sample(0, 10, 3, true).unwrap();
    let opt = OptimizerConfig::with_restarts(3);
    let r = continuation_fit(&ModelConfig::default(), &data, &ContinuationSchedule { floors: vec![1e-3] }, &opt, 1)
        .unwrap();
    let cfg = ModelConfig { lb_noise: 1e-3, ..ModelConfig::default() };
    let m = fit_with(&cfg, &data, &opt, 1, &FitOptions::default()).unwrap();
    assert_eq!(r.selected, 0);
    assert_eq!(r.model.theta, m.theta);
    assert!(r.model.estimates.noise[0] >= 1e-3);
}

#[test]
fn rungs_warm_start_from_previous_solution() {
    let data = BenchmarkProblem::sinusoidal().sample(0, 12, 5, false).unwrap();
    let r = continuation_fit(
        &ModelConfig::default(),
        &data,
        &ContinuationSchedule::default(),
        &OptimizerConfig::with_restarts(3),
        2,
    )
    .unwrap();
    assert_eq!(r.rungs.len(), 4);
    for k in 1..r.rungs.len() {
        let prev = r.rungs[k - 1].theta.as_ref().unwrap();
        let start = &r.rungs[k].starts[0];
        assert_eq!(r.rungs[k].starts.len(), 1);
        // everything except the re-floored noise coordinate carries over
        let differing = prev.iter().zip(start).filter(|(a, b)| a != b).count();
        assert!(differing <= 1, "rung {k}: {differing} coordinates differ");
    }
}

#[test]
fn noise_free_data_selects_smallest_floor() {
    let problem = BenchmarkProblem::sinusoidal();
    let mut smallest = 0;
    for seed in 0..10 {
        let data = problem.sample(0, 20, 100 + seed, false).unwrap();
        let r = continuation_fit(
            &ModelConfig::default(),
            &data,
            &ContinuationSchedule::default(),
            &OptimizerConfig::with_restarts(2),
            seed,
        )
        .unwrap();
        if r.selected == r.rungs.len() - 1 {
            smallest += 1;
        }
    }
    assert!(smallest >= 8, "smallest floor chosen in {smallest}/10 trials");
}

#[test]
fn interval_score_examples() {
    let width = 2.0 * 1.96;
    let inside = interval_score(&[0.0, 1.0], &[1.0, 1.0], &[0.5, 1.2], 0.05).unwrap();
    assert!((inside - width).abs() < 1e-12);
    let one = interval_score(&[0.0], &[1.0], &[3.0], 0.05).unwrap();
    assert!((one - 45.52).abs() < 1e-9, "{one}");
    assert!(interval_score(&[0.0], &[1.0], &[3.0], 1.5).is_err());
}

#[test]
fn penalized_loss_examples() {
    assert_eq!(penalized_loss(-3.7, 5.0, 0.0), -3.7);
    assert_eq!(penalized_loss(-3.7, 0.0, 0.08), -3.7);
    assert!((penalized_loss(-10.0, 2.0, 0.08) - -8.4).abs() < 1e-12);
    let d = IntervalScoreConfig::default();
    assert_eq!((d.v, d.eps), (0.05, 0.08));
}

proptest! {
    #[test]
    fn wider_intervals_score_higher(
        mu in prop::collection::vec(-5.0..5.0f64, 1..10),
        tau in 0.5..3.0f64,
        grow in 1.01..3.0f64,
    ) {
        let y: Vec<f64> = mu.iter().map(|m| m + 0.1 * tau).collect();
        let a = interval_score(&mu, &vec![tau; mu.len()], &y, 0.05).unwrap();
        let b = interval_score(&mu, &vec![tau * grow; mu.len()], &y, 0.05).unwrap();
        prop_assert!(b > a);
    }

    #[test]
    fn solutions_stay_in_bounds(
        c in prop::collection::vec(-5.0..5.0f64, 3),
        half in prop::collection::vec(0.1..2.0f64, 3),
        seed in 0u64..1000,
    ) {
        let target = c.clone();
        let p = FnProblem {
            dim: 3,
            f: move |x: &[f64]| {
                let f = x.iter().zip(&target).map(|(a, b)| (a - b).powi(2)).sum();
                (f, x.iter().zip(&target).map(|(a, b)| 2.0 * (a - b)).collect())
            },
        };
        let lo: Vec<f64> = half.iter().map(|h| -h).collect();
        let starts = uniform_starts(&lo, &half, 3, seed);
        let fit = fit_map(&p, (&lo, &half), &starts, &OptimizerConfig::with_restarts(3)).unwrap();
        for (k, r) in fit.restarts.iter().enumerate() {
            for i in 0..3 {
                prop_assert!(r.solution[i] >= lo[i] && r.solution[i] <= half[i], "restart {k}");
            }
        }
        for i in 0..3 {
            prop_assert!((fit.x[i] - c[i].clamp(lo[i], half[i])).abs() < 1e-6);
        }
    }
}

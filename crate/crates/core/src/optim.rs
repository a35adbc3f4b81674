//! Box-constrained limited-memory quasi-Newton minimization.
//!
//! Projected L-BFGS: the search direction comes from the two-loop recursion
//! restricted to variables that are not held at an active bound, and steps
//! are projected back into the box and accepted by Armijo backtracking.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

/// A differentiable objective. `key` identifies the optimizer iteration so
/// that stochastic objectives can hold their random draws fixed within one
/// line search.
pub trait Problem: Sync {
    fn dim(&self) -> usize;
    fn eval(&self, x: &[f64], key: usize) -> Option<(f64, Vec<f64>)>;
    /// Whether the objective changes with `key`.
    fn refreshes(&self) -> bool {
        false
    }
}

/// Adapter turning a closure into a [`Problem`].
pub struct FnProblem<F> {
    pub dim: usize,
    pub f: F,
}

impl<F: Fn(&[f64]) -> (f64, Vec<f64>) + Sync> Problem for FnProblem<F> {
    fn dim(&self) -> usize {
        self.dim
    }
    fn eval(&self, x: &[f64], _key: usize) -> Option<(f64, Vec<f64>)> {
        let (f, g) = (self.f)(x);
        (f.is_finite() && g.iter().all(|v| v.is_finite())).then_some((f, g))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LbfgsConfig {
    pub max_iter: usize,
    pub memory: usize,
    /// Tolerance on the infinity norm of the projected gradient.
    pub gtol: f64,
    /// Tolerance on the infinity norm of an accepted step.
    pub xtol: f64,
    /// Relative decrease below which progress counts as stalled.
    pub ftol: f64,
}

impl Default for LbfgsConfig {
    fn default() -> Self {
        Self { max_iter: 500, memory: 10, gtol: 1e-6, xtol: 1e-9, ftol: 1e-12 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Status {
    GradientTolerance,
    StepTolerance,
    FunctionTolerance,
    MaxIterations,
    LineSearchFailed,
    EvaluationFailed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Step {
    pub before: f64,
    pub after: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub x: Vec<f64>,
    pub f: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub status: Status,
    /// Objective before and after every accepted step, evaluated with the
    /// draws of that iteration.
    pub trace: Vec<Step>,
}

pub fn project(x: &mut [f64], lo: &[f64], hi: &[f64]) {
    for i in 0..x.len() {
        x[i] = x[i].clamp(lo[i], hi[i]);
    }
}

fn projected_gradient_norm(x: &[f64], g: &[f64], lo: &[f64], hi: &[f64]) -> f64 {
    let mut m: f64 = 0.0;
    for i in 0..x.len() {
        let p = (x[i] - g[i]).clamp(lo[i], hi[i]) - x[i];
        m = m.max(p.abs());
    }
    m
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Minimizes `problem` from `x0` inside `[lo, hi]`.
pub fn minimize<P: Problem + ?Sized>(
    problem: &P,
    lo: &[f64],
    hi: &[f64],
    x0: &[f64],
    cfg: &LbfgsConfig,
    key_base: usize,
) -> RunResult {
    let n = x0.len();
    let mut x = x0.to_vec();
    project(&mut x, lo, hi);
    let mut evaluations = 1;
    let Some((mut f, mut g)) = problem.eval(&x, key_base) else {
        return RunResult {
            x,
            f: f64::INFINITY,
            iterations: 0,
            evaluations,
            status: Status::EvaluationFailed,
            trace: vec![],
        };
    };
    let mut mem: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::new();
    let mut trace = Vec::new();
    let mut status = Status::MaxIterations;
    let mut iterations = 0;
    for it in 0..cfg.max_iter {
        iterations = it;
        let key = key_base + it;
        if it > 0 && problem.refreshes() {
            evaluations += 1;
            match problem.eval(&x, key) {
                Some((nf, ng)) => {
                    f = nf;
                    g = ng;
                }
                None => {
                    status = Status::EvaluationFailed;
                    break;
                }
            }
        }
        if projected_gradient_norm(&x, &g, lo, hi) < cfg.gtol {
            status = Status::GradientTolerance;
            break;
        }
        let free: Vec<bool> =
            (0..n).map(|i| !((x[i] <= lo[i] && g[i] > 0.0) || (x[i] >= hi[i] && g[i] < 0.0))).collect();
        let mut q: Vec<f64> = (0..n).map(|i| if free[i] { g[i] } else { 0.0 }).collect();
        let mut alphas = Vec::with_capacity(mem.len());
        for (s, y, rho) in mem.iter().rev() {
            let a = rho * dot(s, &q);
            for i in 0..n {
                q[i] -= a * y[i];
            }
            alphas.push(a);
        }
        if let Some((s, y, _)) = mem.back() {
            let gamma = dot(s, y) / dot(y, y);
            for v in q.iter_mut() {
                *v *= gamma;
            }
        }
        for ((s, y, rho), a) in mem.iter().zip(alphas.iter().rev()) {
            let b = rho * dot(y, &q);
            for i in 0..n {
                q[i] += s[i] * (a - b);
            }
        }
        let mut d: Vec<f64> = (0..n).map(|i| if free[i] { -q[i] } else { 0.0 }).collect();
        if dot(&d, &g) >= 0.0 {
            mem.clear();
            d = (0..n).map(|i| if free[i] { -g[i] } else { 0.0 }).collect();
        }
        let mut t = if mem.is_empty() {
            let gmax = d.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            if gmax > 1.0 {
                1.0 / gmax
            } else {
                1.0
            }
        } else {
            1.0
        };
        let mut accepted = None;
        let mut tiny = false;
        for _ in 0..50 {
            let mut xn: Vec<f64> = (0..n).map(|i| x[i] + t * d[i]).collect();
            project(&mut xn, lo, hi);
            let step = xn.iter().zip(&x).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
            if step < cfg.xtol {
                tiny = true;
                break;
            }
            evaluations += 1;
            match problem.eval(&xn, key) {
                Some((fnew, gnew)) => {
                    let dec: f64 = (0..n).map(|i| g[i] * (xn[i] - x[i])).sum();
                    if fnew <= f + 1e-4 * dec {
                        accepted = Some((xn, fnew, gnew));
                        break;
                    }
                    t *= 0.5;
                }
                None => t *= 0.25,
            }
        }
        let Some((xn, fnew, gnew)) = accepted else {
            status = if tiny { Status::StepTolerance } else { Status::LineSearchFailed };
            break;
        };
        let s: Vec<f64> = (0..n).map(|i| xn[i] - x[i]).collect();
        let y: Vec<f64> = (0..n).map(|i| gnew[i] - g[i]).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 * dot(&y, &y).sqrt() * dot(&s, &s).sqrt() && sy > 0.0 {
            mem.push_back((s.clone(), y, 1.0 / sy));
            if mem.len() > cfg.memory {
                mem.pop_front();
            }
        }
        trace.push(Step { before: f, after: fnew });
        let step = s.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let rel = (f - fnew) / f.abs().max(fnew.abs()).max(1.0);
        x = xn;
        f = fnew;
        g = gnew;
        iterations = it + 1;
        if step < cfg.xtol {
            status = Status::StepTolerance;
            break;
        }
        if rel <= cfg.ftol && !problem.refreshes() {
            status = Status::FunctionTolerance;
            break;
        }
    }
    RunResult { x, f, iterations, evaluations, status, trace }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rosen(x: &[f64]) -> (f64, Vec<f64>) {
        let (a, b) = (x[0], x[1]);
        let f = (1.0 - a).powi(2) + 100.0 * (b - a * a).powi(2);
        let g = vec![-2.0 * (1.0 - a) - 400.0 * a * (b - a * a), 200.0 * (b - a * a)];
        (f, g)
    }

    #[test]
    fn rosenbrock_from_standard_start() {
        let p = FnProblem { dim: 2, f: rosen };
        let r = minimize(&p, &[-5.0, -5.0], &[5.0, 5.0], &[-1.2, 1.0], &LbfgsConfig::default(), 0);
        assert!(r.f < 1e-10, "{r:?}");
    }

    #[test]
    fn active_bound() {
        let p = FnProblem {
            dim: 2,
            f: |x: &[f64]| ((x[0] + 1.0).powi(2) + (x[1] - 0.5).powi(2), vec![2.0 * (x[0] + 1.0), 2.0 * (x[1] - 0.5)]),
        };
        let r = minimize(&p, &[0.0, 0.0], &[1.0, 1.0], &[0.7, 0.9], &LbfgsConfig::default(), 0);
        assert_eq!(r.x[0], 0.0);
        assert!((r.x[1] - 0.5).abs() < 1e-7);
    }

    #[test]
    fn accepted_steps_decrease() {
        let p = FnProblem { dim: 2, f: rosen };
        let r = minimize(&p, &[-5.0, -5.0], &[5.0, 5.0], &[1.5, -1.0], &LbfgsConfig::default(), 0);
        assert!(r.trace.iter().all(|s| s.after <= s.before));
    }
}

//! Cholesky factorization with diagonal jitter escalation.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};

/// Lower-triangular factor of a symmetric positive definite matrix.
#[derive(Debug, Clone)]
pub struct Factor {
    chol: Cholesky<f64, Dyn>,
    jitter: f64,
}

/// Relative jitter levels tried in order after a plain factorization fails.
pub const JITTER_LADDER: [f64; 5] = [1e-8, 1e-7, 1e-6, 1e-5, 1e-4];

/// Factorizes `c`, adding `k·mean(diag)` to the diagonal for increasing `k`
/// from [`JITTER_LADDER`] until the factorization succeeds.
pub fn factorize(c: &DMatrix<f64>) -> Result<Factor> {
    if c.iter().any(|v| !v.is_finite()) {
        return Err(Error::Singular { ladder: vec![] });
    }
    if let Some(chol) = Cholesky::new(c.clone()) {
        if pivots_ok(&chol) {
            return Ok(Factor { chol, jitter: 0.0 });
        }
    }
    let n = c.nrows();
    let mean_diag = (0..n).map(|i| c[(i, i)]).sum::<f64>() / n.max(1) as f64;
    let mut ladder = Vec::new();
    for rel in JITTER_LADDER {
        let jitter = rel * mean_diag.abs().max(f64::MIN_POSITIVE);
        ladder.push(jitter);
        let mut m = c.clone();
        for i in 0..n {
            m[(i, i)] += jitter;
        }
        if let Some(chol) = Cholesky::new(m) {
            if pivots_ok(&chol) {
                return Ok(Factor { chol, jitter });
            }
        }
    }
    Err(Error::Singular { ladder })
}

fn pivots_ok(chol: &Cholesky<f64, Dyn>) -> bool {
    let l = chol.l_dirty();
    (0..l.nrows()).all(|i| l[(i, i)].is_finite() && l[(i, i)] > 0.0)
}

impl Factor {
    pub fn dim(&self) -> usize {
        self.chol.l_dirty().nrows()
    }

    /// Diagonal increment that was needed for the factorization to succeed.
    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    pub fn log_det(&self) -> f64 {
        let l = self.chol.l_dirty();
        2.0 * (0..l.nrows()).map(|i| l[(i, i)].ln()).sum::<f64>()
    }

    pub fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        self.chol.solve(b)
    }

    pub fn solve_mat(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        self.chol.solve(b)
    }

    /// Solves `L v = b` with the lower factor only.
    pub fn solve_lower(&self, b: &DVector<f64>) -> DVector<f64> {
        let l = self.chol.l_dirty();
        let n = l.nrows();
        let mut v = b.clone();
        for i in 0..n {
            let mut s = v[i];
            for k in 0..i {
                s -= l[(i, k)] * v[k];
            }
            v[i] = s / l[(i, i)];
        }
        v
    }

    pub fn inverse(&self) -> DMatrix<f64> {
        self.chol.inverse()
    }

    pub fn lower(&self) -> DMatrix<f64> {
        self.chol.l()
    }
}

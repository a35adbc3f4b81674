//! Seeded low-discrepancy points on the unit cube (additive recurrence
//! with the generalized golden ratio).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Root of `x^(d+1) = x + 1`.
fn generalized_golden(d: usize) -> f64 {
    let mut x = 2.0f64;
    for _ in 0..64 {
        x = (1.0 + x).powf(1.0 / (d as f64 + 1.0));
    }
    x
}

/// Additive-recurrence sequence `u_n = frac(shift + n·α)`.
#[derive(Debug, Clone)]
pub struct Sequence {
    alpha: Vec<f64>,
    shift: Vec<f64>,
    index: u64,
}

impl Sequence {
    /// Unshifted sequence starting at `n = 1`.
    pub fn new(dim: usize) -> Self {
        let g = generalized_golden(dim);
        let alpha = (1..=dim).map(|k| 1.0 / g.powi(k as i32)).collect();
        Self { alpha, shift: vec![0.5; dim], index: 0 }
    }

    /// Sequence with a uniformly random shift drawn from `seed`.
    pub fn seeded(dim: usize, seed: u64) -> Self {
        let mut s = Self::new(dim);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        s.shift = (0..dim).map(|_| rng.random::<f64>()).collect();
        s
    }

    pub fn dim(&self) -> usize {
        self.alpha.len()
    }

    pub fn next_point(&mut self) -> Vec<f64> {
        self.index += 1;
        let n = self.index as f64;
        self.alpha.iter().zip(&self.shift).map(|(a, s)| (s + n * a).fract()).collect()
    }

    pub fn take_points(&mut self, n: usize) -> Vec<Vec<f64>> {
        (0..n).map(|_| self.next_point()).collect()
    }
}

/// `n` seeded points mapped onto the box `ranges`.
pub fn sample_box(ranges: &[(f64, f64)], n: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut seq = Sequence::seeded(ranges.len(), seed);
    (0..n).map(|_| seq.next_point().iter().zip(ranges).map(|(u, (lo, hi))| lo + u * (hi - lo)).collect()).collect()
}

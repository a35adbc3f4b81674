//! Analytic multi-fidelity test problems: Borehole, Wing, Sinusoidal and
//! beam deflection, plus mixed-input and calibration variants.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::MfDataset;
use crate::error::{contract, Result};
use crate::qmc;

/// Formula family shared by all sources of a problem.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Family {
    Borehole,
    Wing,
    Sinusoidal,
    Beam,
}

const BOREHOLE_VARS: [&str; 8] = ["r_w", "r", "T_u", "H_u", "T_l", "H_l", "L", "k_w"];
const BOREHOLE_RANGES: [(f64, f64); 8] = [
    (0.05, 0.15),
    (100.0, 50000.0),
    (63070.0, 115600.0),
    (990.0, 1110.0),
    (63.1, 116.0),
    (700.0, 820.0),
    (1120.0, 1680.0),
    (9855.0, 12045.0),
];
const WING_VARS: [&str; 10] = ["S_w", "W_fw", "A", "Lambda", "q", "lambda", "t_c", "N_z", "W_dg", "W_p"];
const WING_RANGES: [(f64, f64); 10] = [
    (150.0, 200.0),
    (220.0, 300.0),
    (6.0, 10.0),
    (-10.0, 10.0),
    (16.0, 45.0),
    (0.5, 1.0),
    (0.08, 0.18),
    (2.5, 6.0),
    (1700.0, 2500.0),
    (0.025, 0.08),
];
const BEAM_VARS: [&str; 5] = ["p", "b", "h", "L", "E"];
const BEAM_NOMINAL: [f64; 4] = [12000.0, 0.15, 0.3, 5.0];
const BEAM_E_TRUE: f64 = 30.0;

impl Family {
    pub fn num_sources(&self) -> usize {
        match self {
            Family::Borehole => 5,
            Family::Wing => 4,
            Family::Sinusoidal | Family::Beam => 2,
        }
    }

    /// Noise-free value of `source` at the full input vector.
    pub fn eval(&self, source: usize, v: &[f64]) -> f64 {
        match self {
            Family::Borehole => borehole(source, v),
            Family::Wing => wing(source, v),
            Family::Sinusoidal => {
                let x = v[0];
                let hf = 2.0 * x.sin();
                if source == 0 {
                    hf
                } else {
                    hf + 0.3 * x * x - 0.7 * x + 1.0
                }
            }
            // deflection in millimetres with the modulus given in GPa
            Family::Beam => {
                let (p, b, h, l, e) = (v[0], v[1], v[2], v[3], v[4]);
                5.0 / 32.0 * p * l.powi(4) / (e * 1e9 * b * h.powi(3)) * 1e3
            }
        }
    }
}

fn borehole(source: usize, v: &[f64]) -> f64 {
    let (rw, r, tu, hu, tl, hl, l, kw) = (v[0], v[1], v[2], v[3], v[4], v[5], v[6], v[7]);
    let lr = (r / rw).ln();
    let flow = |head: f64, log_term: f64, lcoef: f64, tcoef: f64| {
        2.0 * PI * tu * head / (log_term * (1.0 + lcoef * l * tu / (lr * rw * rw * kw) + tcoef * tu / tl))
    };
    match source {
        0 => flow(hu - hl, lr, 2.0, 1.0),
        1 => flow(hu - 0.8 * hl, lr, 1.0, 1.0),
        2 => flow(hu - hl, lr, 8.0, 0.75),
        3 => flow(1.09 * hu - hl, (4.0 * r / rw).ln(), 3.0, 1.0),
        _ => flow(1.05 * hu - hl, (2.0 * r / rw).ln(), 3.0, 1.0),
    }
}

fn wing(source: usize, v: &[f64]) -> f64 {
    let (sw, wfw, a, lam, q, taper, tc, nz, wdg, wp) = (v[0], v[1], v[2], v[3], v[4], v[5], v[6], v[7], v[8], v[9]);
    let c = lam.cos();
    let exponent = [0.758, 0.758, 0.8, 0.9][source.min(3)];
    let base = 0.036
        * sw.powf(exponent)
        * wfw.powf(0.0035)
        * (a / (c * c)).powf(0.6)
        * q.powf(0.006)
        * taper.powf(0.04)
        * (100.0 * tc / c).powf(-0.3)
        * (nz * wdg).powf(0.49);
    match source {
        0 => base + sw * wp,
        1 | 2 => base + wp,
        _ => base,
    }
}

/// Per-source metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceInfo {
    pub label: String,
    /// Formula index within the family.
    pub formula: usize,
    pub noise_std: f64,
    pub cost: Option<f64>,
    pub initial: usize,
}

/// A categorical input obtained by freezing a numeric column at a few
/// values; level `i` stands for `values[i]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoricalColumn {
    pub name: String,
    /// Position in the full formula input.
    pub column: usize,
    /// Ascending level values.
    pub values: Vec<f64>,
}

/// Calibration columns: recorded on low-fidelity rows, fixed at `truth`
/// in the high-fidelity source.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationColumns {
    pub names: Vec<String>,
    pub columns: Vec<usize>,
    pub ranges: Vec<(f64, f64)>,
    pub truth: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkProblem {
    pub name: String,
    pub family: Family,
    /// Names and ranges of the numeric (dataset `x`) inputs.
    pub variables: Vec<String>,
    pub ranges: Vec<(f64, f64)>,
    pub categorical: Vec<CategoricalColumn>,
    pub calibration: Option<CalibrationColumns>,
    pub sources: Vec<SourceInfo>,
}

fn source(label: &str, formula: usize, noise_std: f64, cost: Option<f64>, initial: usize) -> SourceInfo {
    SourceInfo { label: label.into(), formula, noise_std, cost, initial }
}

fn degrees_to_radians(r: (f64, f64)) -> (f64, f64) {
    (r.0.to_radians(), r.1.to_radians())
}

/// Names accepted by [`BenchmarkProblem::by_name`].
pub const NAMES: [&str; 7] =
    ["borehole", "wing", "sinusoidal", "beam", "borehole-mixed", "borehole-calibration", "wing-calibration"];

impl BenchmarkProblem {
    pub fn borehole() -> Self {
        Self {
            name: "borehole".into(),
            family: Family::Borehole,
            variables: BOREHOLE_VARS.iter().map(|s| s.to_string()).collect(),
            ranges: BOREHOLE_RANGES.to_vec(),
            categorical: vec![],
            calibration: None,
            sources: vec![
                source("HF", 0, 2.0, Some(1000.0), 5),
                source("LF1", 1, 0.0, Some(100.0), 5),
                source("LF2", 2, 0.0, Some(10.0), 50),
                source("LF3", 3, 0.0, Some(100.0), 5),
                source("LF4", 4, 0.0, Some(10.0), 50),
            ],
        }
    }

    pub fn wing() -> Self {
        let mut ranges = WING_RANGES.to_vec();
        ranges[3] = degrees_to_radians(ranges[3]);
        Self {
            name: "wing".into(),
            family: Family::Wing,
            variables: WING_VARS.iter().map(|s| s.to_string()).collect(),
            ranges,
            categorical: vec![],
            calibration: None,
            sources: vec![
                source("HF", 0, 1.0, None, 10),
                source("LF1", 1, 1.0, None, 20),
                source("LF2", 2, 1.0, None, 20),
                source("LF3", 3, 1.0, None, 20),
            ],
        }
    }

    pub fn sinusoidal() -> Self {
        Self {
            name: "sinusoidal".into(),
            family: Family::Sinusoidal,
            variables: vec!["x".into()],
            ranges: vec![(0.0, 2.0 * PI)],
            categorical: vec![],
            calibration: None,
            sources: vec![source("HF", 0, 1.0, None, 4), source("LF1", 1, 1.0, None, 20)],
        }
    }

    /// Beam under uniform load: deflection in mm, modulus `E` in GPa as
    /// the calibration parameter. Features vary by ±5% around the nominal
    /// beam.
    pub fn beam() -> Self {
        Self {
            name: "beam".into(),
            family: Family::Beam,
            variables: BEAM_VARS[..4].iter().map(|s| s.to_string()).collect(),
            ranges: BEAM_NOMINAL.iter().map(|v| (0.95 * v, 1.05 * v)).collect(),
            categorical: vec![],
            calibration: Some(CalibrationColumns {
                names: vec!["E".into()],
                columns: vec![4],
                ranges: vec![(20.0, 40.0)],
                truth: vec![BEAM_E_TRUE],
            }),
            sources: vec![source("HF", 0, 0.05, None, 1), source("LF1", 1, 0.0, None, 200)],
        }
    }

    /// Nominal beam features.
    pub fn beam_nominal() -> Vec<f64> {
        BEAM_NOMINAL.to_vec()
    }

    /// Borehole with `r_w` and `H_l` replaced by five-level categorical
    /// variables whose levels are sorted random values inside the ranges.
    pub fn borehole_mixed(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut categorical = vec![];
        for col in [0usize, 5] {
            let (lo, hi) = BOREHOLE_RANGES[col];
            let mut values: Vec<f64> = (0..5).map(|_| rng.random_range(lo..hi)).collect();
            values.sort_by(f64::total_cmp);
            categorical.push(CategoricalColumn { name: BOREHOLE_VARS[col].into(), column: col, values });
        }
        let keep: Vec<usize> = (0..8).filter(|c| *c != 0 && *c != 5).collect();
        let mut p = Self::borehole();
        p.name = "borehole-mixed".into();
        p.variables = keep.iter().map(|c| BOREHOLE_VARS[*c].to_string()).collect();
        p.ranges = keep.iter().map(|c| BOREHOLE_RANGES[*c]).collect();
        p.categorical = categorical;
        p
    }

    /// Borehole with `T_l` and `L` unobserved in the high-fidelity source
    /// (true values 250 and 1500) and two biased low-fidelity models.
    pub fn borehole_calibration() -> Self {
        let keep = [0usize, 1, 2, 3, 5, 7];
        Self {
            name: "borehole-calibration".into(),
            family: Family::Borehole,
            variables: keep.iter().map(|c| BOREHOLE_VARS[*c].to_string()).collect(),
            ranges: keep.iter().map(|c| BOREHOLE_RANGES[*c]).collect(),
            categorical: vec![],
            calibration: Some(CalibrationColumns {
                names: vec!["T_l".into(), "L".into()],
                columns: vec![4, 6],
                ranges: vec![(100.0, 500.0), (1120.0, 1680.0)],
                truth: vec![250.0, 1500.0],
            }),
            sources: vec![
                source("HF", 0, 2.0, None, 20),
                source("LF1", 1, 0.0, None, 100),
                source("LF2", 2, 0.0, None, 100),
            ],
        }
    }

    /// Wing with `q`, `λ`, `t_c` and `N_z` unobserved in the high-fidelity
    /// source (true values 40, 0.85, 0.17, 3).
    pub fn wing_calibration() -> Self {
        let mut ranges = WING_RANGES.to_vec();
        ranges[3] = degrees_to_radians(ranges[3]);
        let keep = [0usize, 1, 2, 3, 8, 9];
        Self {
            name: "wing-calibration".into(),
            family: Family::Wing,
            variables: keep.iter().map(|c| WING_VARS[*c].to_string()).collect(),
            ranges: keep.iter().map(|c| ranges[*c]).collect(),
            categorical: vec![],
            calibration: Some(CalibrationColumns {
                names: ["q", "lambda", "t_c", "N_z"].iter().map(|s| s.to_string()).collect(),
                columns: vec![4, 5, 6, 7],
                ranges: vec![ranges[4], ranges[5], ranges[6], ranges[7]],
                truth: vec![40.0, 0.85, 0.17, 3.0],
            }),
            sources: vec![
                source("HF", 0, 1.0, None, 25),
                source("LF1", 1, 1.0, None, 40),
                source("LF2", 2, 1.0, None, 50),
                source("LF3", 3, 1.0, None, 60),
            ],
        }
    }

    /// Looks a problem up by name; `borehole-mixed` uses `seed` for its
    /// level values.
    pub fn by_name(name: &str, seed: u64) -> Option<Self> {
        Some(match name {
            "borehole" => Self::borehole(),
            "wing" => Self::wing(),
            "sinusoidal" => Self::sinusoidal(),
            "beam" => Self::beam(),
            "borehole-mixed" => Self::borehole_mixed(seed),
            "borehole-calibration" => Self::borehole_calibration(),
            "wing-calibration" => Self::wing_calibration(),
            _ => return None,
        })
    }

    pub fn num_sources(&self) -> usize {
        self.sources.len()
    }

    pub fn dx(&self) -> usize {
        self.ranges.len()
    }

    pub fn levels(&self) -> Vec<usize> {
        self.categorical.iter().map(|c| c.values.len()).collect()
    }

    pub fn costs(&self) -> Option<Vec<f64>> {
        self.sources.iter().map(|s| s.cost).collect()
    }

    pub fn initial_counts(&self) -> Vec<usize> {
        self.sources.iter().map(|s| s.initial).collect()
    }

    fn full_input(&self, source: usize, x: &[f64], t: &[usize], zeta: Option<&[f64]>) -> Result<Vec<f64>> {
        if source >= self.sources.len() {
            return contract(format!("{} has no source {source}", self.name));
        }
        if x.len() != self.dx() || t.len() != self.categorical.len() {
            return contract(format!("{} expects {} numeric and {} categorical inputs", self.name, self.dx(), t.len()));
        }
        for (k, (v, (lo, hi))) in x.iter().zip(&self.ranges).enumerate() {
            let slack = 1e-9 * (hi - lo);
            if !(*v >= lo - slack && *v <= hi + slack) {
                return contract(format!("{} = {v} lies outside [{lo}, {hi}]", self.variables[k]));
            }
        }
        let width = match self.family {
            Family::Borehole => 8,
            Family::Wing => 10,
            Family::Sinusoidal => 1,
            Family::Beam => 5,
        };
        let mut full = vec![f64::NAN; width];
        for (c, level) in self.categorical.iter().zip(t) {
            match c.values.get(*level) {
                Some(v) => full[c.column] = *v,
                None => return contract(format!("level {level} of {} does not exist", c.name)),
            }
        }
        if let Some(cal) = &self.calibration {
            let values: &[f64] = match (source, zeta) {
                (0, None) => &cal.truth,
                (0, Some(_)) => return contract("high-fidelity inputs carry no calibration values"),
                (_, Some(z)) if z.len() == cal.columns.len() => z,
                _ => return contract(format!("source {source} needs {} calibration values", cal.columns.len())),
            };
            for (c, v) in cal.columns.iter().zip(values) {
                full[*c] = *v;
            }
        } else if zeta.is_some() {
            return contract(format!("{} has no calibration parameters", self.name));
        }
        let mut xs = x.iter();
        for slot in full.iter_mut().filter(|v| v.is_nan()) {
            *slot = *xs.next().expect("numeric inputs fill the remaining columns");
        }
        Ok(full)
    }

    /// Noise-free response of `source`.
    pub fn evaluate(&self, source: usize, x: &[f64], t: &[usize], zeta: Option<&[f64]>) -> Result<f64> {
        let full = self.full_input(source, x, t, zeta)?;
        Ok(self.family.eval(self.sources[source].formula, &full))
    }

    /// `n` quasi-random rows of `source`. Categorical levels and
    /// calibration values of low-fidelity rows are spread over their
    /// ranges along extra sequence dimensions. Gaussian noise with the
    /// source's standard deviation is added when `with_noise` is set.
    pub fn sample(&self, source: usize, n: usize, seed: u64, with_noise: bool) -> Result<MfDataset> {
        if source >= self.sources.len() {
            return contract(format!("{} has no source {source}", self.name));
        }
        let cal = self.calibration.as_ref().filter(|_| source != 0);
        let dz = cal.map_or(0, |c| c.columns.len());
        let dt = self.categorical.len();
        let mut seq =
            qmc::Sequence::seeded(self.dx() + dt + dz, seed ^ (source as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15));
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(1 + source as u64);
        let mut out = MfDataset::default();
        for _ in 0..n {
            let u = seq.next_point();
            let x: Vec<f64> = self.ranges.iter().zip(&u).map(|((lo, hi), v)| lo + v * (hi - lo)).collect();
            let t: Vec<usize> = self
                .categorical
                .iter()
                .zip(&u[self.dx()..])
                .map(|(c, v)| ((v * c.values.len() as f64) as usize).min(c.values.len() - 1))
                .collect();
            let zeta = cal.map(|c| {
                c.ranges.iter().zip(&u[self.dx() + dt..]).map(|((lo, hi), v)| lo + v * (hi - lo)).collect::<Vec<f64>>()
            });
            let mut y = self.evaluate(source, &x, &t, zeta.as_deref())?;
            if with_noise {
                let e: f64 = StandardNormal.sample(&mut rng);
                y += self.sources[source].noise_std * e;
            }
            out.push(x, t, source, zeta, y);
        }
        Ok(out)
    }

    /// Rows from every source, `counts[j]` from source `j`.
    pub fn sample_sources(&self, counts: &[usize], seed: u64, with_noise: bool) -> Result<MfDataset> {
        if counts.len() != self.sources.len() {
            return contract(format!("{} counts given for {} sources", counts.len(), self.sources.len()));
        }
        let mut out = MfDataset::default();
        for (j, n) in counts.iter().enumerate() {
            out.append(&self.sample(j, *n, seed.wrapping_add(j as u64), with_noise)?);
        }
        Ok(out)
    }

    /// Discrepancy of low-fidelity source `lf` from the high-fidelity
    /// source at `n` shared random inputs: the RMS difference over the
    /// standard deviation of the high-fidelity outputs. Calibration
    /// parameters are held at their true values.
    pub fn source_nrmse(&self, lf: usize, n: usize, seed: u64) -> Result<f64> {
        if lf == 0 || lf >= self.sources.len() {
            return contract(format!("{lf} is not a low-fidelity source of {}", self.name));
        }
        if n < 2 {
            return contract("at least two points are needed");
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let truth = self.calibration.as_ref().map(|c| c.truth.clone());
        let mut yh = Vec::with_capacity(n);
        let mut yl = Vec::with_capacity(n);
        for _ in 0..n {
            let x: Vec<f64> = self.ranges.iter().map(|(lo, hi)| rng.random_range(*lo..=*hi)).collect();
            let t: Vec<usize> = self.categorical.iter().map(|c| rng.random_range(0..c.values.len())).collect();
            yh.push(self.evaluate(0, &x, &t, None)?);
            yl.push(self.evaluate(lf, &x, &t, truth.as_deref())?);
        }
        crate::analysis::nrmse(&yh, &yl)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sinusoidal_values() {
        let p = BenchmarkProblem::sinusoidal();
        assert_eq!(p.evaluate(0, &[0.0], &[], None).unwrap(), 0.0);
        assert_eq!(p.evaluate(1, &[0.0], &[], None).unwrap(), 1.0);
        let d = p.evaluate(1, &[1.0], &[], None).unwrap() - p.evaluate(0, &[1.0], &[], None).unwrap();
        assert!((d - 0.6).abs() < 1e-12);
    }

    #[test]
    fn beam_at_nominal() {
        let p = BenchmarkProblem::beam();
        let v = p.evaluate(0, &BenchmarkProblem::beam_nominal(), &[], None).unwrap();
        assert!((v / 1e3 - 0.0096451).abs() < 1e-7);
        let lf = p.evaluate(1, &BenchmarkProblem::beam_nominal(), &[], Some(&[30.0])).unwrap();
        assert_eq!(lf, v);
    }

    #[test]
    fn out_of_range_rejected() {
        let p = BenchmarkProblem::sinusoidal();
        assert!(p.evaluate(0, &[7.0], &[], None).is_err());
        assert!(p.evaluate(2, &[1.0], &[], None).is_err());
    }
}

//! Datasets in the unified multi-source layout and their standardization.

use serde::{Deserialize, Serialize};

use crate::error::{contract, Error, Result};

/// Model inputs: numeric features, categorical level indices, source
/// indicator and (on low-fidelity rows) recorded calibration values.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Inputs {
    pub x: Vec<Vec<f64>>,
    pub t: Vec<Vec<usize>>,
    pub s: Vec<usize>,
    pub zeta: Vec<Option<Vec<f64>>>,
}

impl Inputs {
    /// Numeric-only inputs from source 0.
    pub fn numeric(x: Vec<Vec<f64>>) -> Self {
        let n = x.len();
        Self { x, t: vec![vec![]; n], s: vec![0; n], zeta: vec![None; n] }
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn dx(&self) -> usize {
        self.x.first().map_or(0, |r| r.len())
    }

    pub fn dt(&self) -> usize {
        self.t.first().map_or(0, |r| r.len())
    }

    pub fn with_source(mut self, s: usize) -> Self {
        self.s = vec![s; self.len()];
        self
    }

    pub fn check(&self) -> Result<()> {
        let n = self.len();
        if self.t.len() != n || self.s.len() != n || self.zeta.len() != n {
            return contract("input columns have different lengths");
        }
        let (dx, dt) = (self.dx(), self.dt());
        for i in 0..n {
            if self.x[i].len() != dx || self.t[i].len() != dt {
                return contract(format!("row {i} has an inconsistent layout"));
            }
            if self.x[i].iter().any(|v| !v.is_finite()) {
                return Err(Error::Data(format!("row {i} has a non-finite numeric value")));
            }
            if let Some(z) = &self.zeta[i] {
                if z.iter().any(|v| !v.is_finite()) {
                    return Err(Error::Data(format!("row {i} has a non-finite calibration value")));
                }
            }
        }
        Ok(())
    }

    pub fn select(&self, idx: &[usize]) -> Inputs {
        Inputs {
            x: idx.iter().map(|&i| self.x[i].clone()).collect(),
            t: idx.iter().map(|&i| self.t[i].clone()).collect(),
            s: idx.iter().map(|&i| self.s[i]).collect(),
            zeta: idx.iter().map(|&i| self.zeta[i].clone()).collect(),
        }
    }

    pub fn extend(&mut self, other: &Inputs) {
        self.x.extend(other.x.iter().cloned());
        self.t.extend(other.t.iter().cloned());
        self.s.extend(other.s.iter().cloned());
        self.zeta.extend(other.zeta.iter().cloned());
    }
}

/// Multi-source dataset: row-stacked sources with a source column.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct MfDataset {
    pub inputs: Inputs,
    pub y: Vec<f64>,
}

impl MfDataset {
    pub fn new(inputs: Inputs, y: Vec<f64>) -> Result<Self> {
        if inputs.len() != y.len() {
            return contract("inputs and responses differ in length");
        }
        inputs.check()?;
        if let Some(i) = y.iter().position(|v| !v.is_finite()) {
            return Err(Error::Data(format!("response {i} is not finite")));
        }
        Ok(Self { inputs, y })
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn num_sources(&self) -> usize {
        self.inputs.s.iter().max().map_or(0, |m| m + 1)
    }

    pub fn source_counts(&self) -> Vec<usize> {
        let mut c = vec![0; self.num_sources()];
        for s in &self.inputs.s {
            c[*s] += 1;
        }
        c
    }

    pub fn source_indices(&self, j: usize) -> Vec<usize> {
        (0..self.len()).filter(|i| self.inputs.s[*i] == j).collect()
    }

    pub fn select(&self, idx: &[usize]) -> MfDataset {
        MfDataset { inputs: self.inputs.select(idx), y: idx.iter().map(|&i| self.y[i]).collect() }
    }

    pub fn source_slice(&self, j: usize) -> MfDataset {
        self.select(&self.source_indices(j))
    }

    pub fn push(&mut self, x: Vec<f64>, t: Vec<usize>, s: usize, zeta: Option<Vec<f64>>, y: f64) {
        self.inputs.x.push(x);
        self.inputs.t.push(t);
        self.inputs.s.push(s);
        self.inputs.zeta.push(zeta);
        self.y.push(y);
    }

    pub fn append(&mut self, other: &MfDataset) {
        self.inputs.extend(&other.inputs);
        self.y.extend(&other.y);
    }
}

/// One source's data: numeric features, categorical levels, responses.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SourceData {
    pub x: Vec<Vec<f64>>,
    pub t: Vec<Vec<usize>>,
    pub zeta: Option<Vec<Vec<f64>>>,
    pub y: Vec<f64>,
}

impl SourceData {
    pub fn numeric(x: Vec<Vec<f64>>, y: Vec<f64>) -> Self {
        let n = x.len();
        Self { x, t: vec![vec![]; n], zeta: None, y }
    }
}

/// Stacks per-source datasets; source `j` is the `j`-th entry.
pub fn augment_sources(datasets: &[SourceData]) -> Result<MfDataset> {
    let mut out = MfDataset::default();
    let mut layout: Option<(usize, usize)> = None;
    for (j, d) in datasets.iter().enumerate() {
        if d.x.len() != d.y.len() || d.t.len() != d.y.len() {
            return contract(format!("source {j} has columns of different lengths"));
        }
        for i in 0..d.y.len() {
            let l = (d.x[i].len(), d.t[i].len());
            match layout {
                None => layout = Some(l),
                Some(prev) if prev != l => {
                    return contract(format!("source {j} row {i} has layout {l:?}, expected {prev:?}"))
                }
                _ => {}
            }
            let zeta = d.zeta.as_ref().map(|z| z[i].clone());
            out.push(d.x[i].clone(), d.t[i].clone(), j, zeta, d.y[i]);
        }
    }
    MfDataset::new(out.inputs, out.y)
}

fn mean_std(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = values.clone().count();
    if n == 0 {
        return (0.0, 1.0);
    }
    let mean = values.clone().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, 1.0);
    }
    let var = values.map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let std = var.sqrt();
    (mean, if std > 0.0 && std.is_finite() { std } else { 1.0 })
}

/// Affine transforms applied before training: numeric features and
/// calibration columns are z-scored (calibration statistics come from the
/// rows that record them), responses are z-scored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardization {
    pub x_mean: Vec<f64>,
    pub x_std: Vec<f64>,
    pub zeta_mean: Vec<f64>,
    pub zeta_std: Vec<f64>,
    pub y_mean: f64,
    pub y_std: f64,
}

impl Standardization {
    pub fn fit(data: &MfDataset, dzeta: usize) -> Self {
        let dx = data.inputs.dx();
        let mut x_mean = Vec::with_capacity(dx);
        let mut x_std = Vec::with_capacity(dx);
        for k in 0..dx {
            let (m, s) = mean_std(data.inputs.x.iter().map(move |r| r[k]));
            x_mean.push(m);
            x_std.push(s);
        }
        let mut zeta_mean = Vec::with_capacity(dzeta);
        let mut zeta_std = Vec::with_capacity(dzeta);
        for k in 0..dzeta {
            let (m, s) = mean_std(data.inputs.zeta.iter().filter_map(move |z| z.as_ref().map(|z| z[k])));
            zeta_mean.push(m);
            zeta_std.push(s);
        }
        let (y_mean, y_std) = mean_std(data.y.iter().copied());
        Self { x_mean, x_std, zeta_mean, zeta_std, y_mean, y_std }
    }

    pub fn x(&self, row: &[f64]) -> Vec<f64> {
        row.iter().enumerate().map(|(k, v)| (v - self.x_mean[k]) / self.x_std[k]).collect()
    }

    pub fn zeta(&self, z: &[f64]) -> Vec<f64> {
        z.iter().enumerate().map(|(k, v)| (v - self.zeta_mean[k]) / self.zeta_std[k]).collect()
    }

    pub fn zeta_back(&self, z: &[f64]) -> Vec<f64> {
        z.iter().enumerate().map(|(k, v)| self.zeta_mean[k] + v * self.zeta_std[k]).collect()
    }

    pub fn y(&self, v: f64) -> f64 {
        (v - self.y_mean) / self.y_std
    }

    pub fn y_back(&self, v: f64) -> f64 {
        self.y_mean + v * self.y_std
    }
}

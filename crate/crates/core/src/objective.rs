//! The MAP objective and its gradient.
//!
//! Scalar pieces (transforms, priors, embeddings, mean functions,
//! calibration draws) are recorded on a [`Tape`]. The covariance part is
//! differentiated by hand: with `P = C⁻¹` and `α = P r`, the adjoint of the
//! loss with respect to `C` is `½(P − ααᵀ)`, which is pushed through the
//! kernel to every tape variable feeding it.

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::autodiff::{Tape, Var};
use crate::config::{CalibrationMode, MeanSpec, ModelConfig, NoiseSpec};
use crate::data::{Inputs, Standardization};
use crate::embedding::{
    encode_prior, generator_moments, map_forward, network_forward, one_hot, reparameterize, MapKind,
};
use crate::error::{contract, Error, Result};
use crate::kernel::KernelFamily;
use crate::linalg::{factorize, Factor};
use crate::params::{generator, mean_network_sizes, BlockKind, Layout};
use crate::prior::Prior;
use crate::training::IntervalScoreConfig;

/// Rows after standardization, ready for assembly.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Rows {
    pub scaled_x: Vec<Vec<f64>>,
    pub raw_x: Vec<Vec<f64>>,
    pub combo: Vec<usize>,
    pub combos: Vec<Vec<usize>>,
    pub source: Vec<usize>,
    /// Standardized recorded calibration values; `None` rows are filled.
    pub zeta: Vec<Option<Vec<f64>>>,
    /// Original-unit zero on the standardized response scale.
    pub y_zero: f64,
}

impl Rows {
    pub fn new(cfg: &ModelConfig, st: &Standardization, inputs: &Inputs) -> Result<Self> {
        inputs.check()?;
        let n = inputs.len();
        let dx = st.x_mean.len();
        let mut combos: Vec<Vec<usize>> = Vec::new();
        let mut index: HashMap<Vec<usize>, usize> = HashMap::new();
        let mut combo = Vec::with_capacity(n);
        let dzeta = cfg.dzeta();
        let mut zeta = Vec::with_capacity(n);
        for i in 0..n {
            if inputs.x[i].len() != dx {
                return contract(format!("row {i} has {} numeric columns, expected {dx}", inputs.x[i].len()));
            }
            if inputs.s[i] >= cfg.sources {
                return contract(format!("row {i} has source {} but the model has {}", inputs.s[i], cfg.sources));
            }
            let t = &inputs.t[i];
            cfg.categorical.check(t)?;
            let next = combos.len();
            let c = *index.entry(t.clone()).or_insert_with(|| {
                combos.push(t.clone());
                next
            });
            combo.push(c);
            match (&cfg.calibration, &inputs.zeta[i]) {
                (None, None) => zeta.push(None),
                (None, Some(_)) => return contract(format!("row {i} has calibration values but none are modeled")),
                (Some(c), z) => {
                    let hf = c.hf_sources.contains(&inputs.s[i]);
                    match (hf, z) {
                        (true, Some(_)) => {
                            return contract(format!("high-fidelity row {i} carries recorded calibration values"))
                        }
                        (false, None) => {
                            return contract(format!("low-fidelity row {i} is missing calibration values"))
                        }
                        (true, None) => zeta.push(None),
                        (false, Some(v)) => {
                            if v.len() != dzeta {
                                return contract(format!("row {i} has {} calibration values", v.len()));
                            }
                            zeta.push(Some(st.zeta(v)));
                        }
                    }
                }
            }
        }
        Ok(Self {
            scaled_x: inputs.x.iter().map(|r| st.x(r)).collect(),
            raw_x: inputs.x.clone(),
            combo,
            combos,
            source: inputs.s.clone(),
            zeta,
            y_zero: -st.y_mean / st.y_std,
        })
    }

    pub fn len(&self) -> usize {
        self.source.len()
    }

    pub fn empty() -> Self {
        Self {
            scaled_x: vec![],
            raw_x: vec![],
            combo: vec![],
            combos: vec![],
            source: vec![],
            zeta: vec![],
            y_zero: 0.0,
        }
    }
}

/// Standard-normal draws for every ensemble member.
#[derive(Debug, Clone, PartialEq)]
pub struct Draws {
    /// `[member][source][dim]`, empty when `z` is deterministic.
    pub z: Vec<Vec<Vec<f64>>>,
    /// `[member][dim]`, empty when `ζ` is deterministic.
    pub zeta: Vec<Vec<f64>>,
    pub members: usize,
}

impl Draws {
    pub fn single() -> Self {
        Self { z: vec![], zeta: vec![], members: 1 }
    }

    pub fn sample(cfg: &ModelConfig, members: usize, seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        let prob_z = generator(cfg).is_some();
        let prob_zeta = cfg.calibration.as_ref().is_some_and(|c| c.mode == CalibrationMode::Probabilistic);
        let mut z = Vec::new();
        let mut zeta = Vec::new();
        let mut g = || -> f64 { StandardNormal.sample(&mut rng) };
        for _ in 0..members {
            if prob_z {
                z.push((0..cfg.sources).map(|_| (0..cfg.source_dim).map(|_| g()).collect()).collect());
            }
            if prob_zeta {
                zeta.push((0..cfg.dzeta()).map(|_| g()).collect());
            }
        }
        Self { z, zeta, members }
    }

    /// Draws with `ε = 0` for a single member.
    pub fn zero(cfg: &ModelConfig) -> Self {
        let prob_z = generator(cfg).is_some();
        let prob_zeta = cfg.calibration.as_ref().is_some_and(|c| c.mode == CalibrationMode::Probabilistic);
        Self {
            z: if prob_z { vec![vec![vec![0.0; cfg.source_dim]; cfg.sources]] } else { vec![] },
            zeta: if prob_zeta { vec![vec![0.0; cfg.dzeta()]] } else { vec![] },
            members: 1,
        }
    }
}

pub(crate) struct MemberVars<'t> {
    pub z: Vec<Vec<Var<'t>>>,
    pub zeta: Vec<Var<'t>>,
    pub mean: Vec<Var<'t>>,
}

pub(crate) struct Assembled<'t> {
    pub leaves: Vec<Var<'t>>,
    pub omega: Vec<Var<'t>>,
    pub sigma2: Var<'t>,
    /// One entry per estimated noise parameter.
    pub noise: Vec<Var<'t>>,
    pub noise_values: Vec<f64>,
    pub h: Vec<Vec<Var<'t>>>,
    pub members: Vec<MemberVars<'t>>,
    pub log_prior: Var<'t>,
    pub regularization: Var<'t>,
}

fn noise_of_source(cfg: &ModelConfig, noise: &[f64], s: usize) -> f64 {
    match cfg.noise {
        NoiseSpec::Fixed(v) => v,
        NoiseSpec::Single => noise[0],
        NoiseSpec::PerSource => noise[s.min(noise.len() - 1)],
    }
}

fn noise_param_of_source(cfg: &ModelConfig, s: usize) -> Option<usize> {
    match cfg.noise {
        NoiseSpec::Fixed(_) => None,
        NoiseSpec::Single => Some(0),
        NoiseSpec::PerSource => Some(s.min(cfg.sources.max(1) - 1)),
    }
}

/// Records the scalar part of the model on `tape`.
pub(crate) fn assemble<'t>(
    tape: &'t Tape,
    cfg: &ModelConfig,
    layout: &Layout,
    theta: &[f64],
    rows: &Rows,
    draws: &Draws,
) -> Result<Assembled<'t>> {
    if theta.len() != layout.dim {
        return contract(format!("parameter vector has length {}, expected {}", theta.len(), layout.dim));
    }
    let leaves: Vec<Var<'t>> = theta.iter().map(|v| tape.var(*v)).collect();
    let block = |k: BlockKind| -> &[Var<'t>] { layout.slice(k, &leaves) };
    let priors = &cfg.priors;
    let mut prior_terms: Vec<Var<'t>> = Vec::new();

    let omega: Vec<Var<'t>> = block(BlockKind::Omega).iter().map(|r| r.sigmoid() * 14.0 - 10.0).collect();
    for w in &omega {
        prior_terms.push(priors.omega.log_density_var(*w));
    }
    let sigma2 = block(BlockKind::LogSigma2)[0].exp();
    prior_terms.push(priors.sigma2.log_density_var(sigma2));
    let raw_noise = block(BlockKind::Noise);
    let noise: Vec<Var<'t>> = raw_noise.iter().map(|r| r.exp() + cfg.lb_noise).collect();
    for (d, r) in noise.iter().zip(raw_noise) {
        let density = priors.noise.log_density_var(*d);
        // the horseshoe is placed on the log scale the noise is optimized on
        prior_terms.push(if matches!(priors.noise, Prior::HalfHorseshoe { .. }) { density + *r } else { density });
    }
    let noise_values: Vec<f64> = noise.iter().map(|v| v.value()).collect();

    // categorical latent coordinates per distinct combination
    let mut h: Vec<Vec<Var<'t>>> = Vec::with_capacity(rows.combos.len());
    if cfg.has_h() {
        let latent_prior = cfg.latent_prior();
        for (b, _) in layout.t_inputs.iter().enumerate() {
            let params = block(BlockKind::EmbedT(b));
            let p = if cfg.map == MapKind::Linear { latent_prior } else { priors.network };
            for v in params {
                prior_terms.push(p.log_density_var(*v));
            }
        }
        for t in &rows.combos {
            let encoded = encode_prior(&cfg.categorical, &cfg.encoding, t)?;
            let mut hv = Vec::with_capacity(cfg.h_width());
            for (b, pi) in encoded.iter().enumerate() {
                let params = block(BlockKind::EmbedT(b));
                hv.extend(map_forward(&cfg.map, pi.len(), cfg.embedding_dim, params, pi));
            }
            h.push(hv);
        }
    } else {
        h = vec![vec![]; rows.combos.len()];
    }

    // source latent coordinates per member
    let gen = generator(cfg);
    let es = block(BlockKind::EmbedS);
    let mut z_det: Vec<Vec<Var<'t>>> = Vec::new();
    let mut z_moments: Vec<(Vec<Var<'t>>, Vec<Var<'t>>)> = Vec::new();
    if cfg.has_z() {
        match &gen {
            None => {
                let p = cfg.latent_prior();
                for v in es {
                    prior_terms.push(p.log_density_var(*v));
                }
                for j in 0..cfg.sources {
                    z_det.push(es[j * cfg.source_dim..(j + 1) * cfg.source_dim].to_vec());
                }
            }
            Some(pe) => {
                for v in es {
                    prior_terms.push(priors.network.log_density_var(*v));
                }
                for j in 0..cfg.sources {
                    z_moments.push(generator_moments(pe, es, &one_hot(cfg.sources, j)));
                }
            }
        }
    }

    // calibration parameters
    let zeta_mean = block(BlockKind::ZetaMean);
    let zeta_log_std = block(BlockKind::ZetaLogStd);
    let zeta_std: Vec<Var<'t>> = zeta_log_std.iter().map(|v| v.exp()).collect();
    if let Some(c) = &cfg.calibration {
        for (k, v) in zeta_mean.iter().enumerate() {
            let (m, s) = c.prior[k];
            prior_terms.push(crate::prior::Prior::Normal { mean: m, std: s }.log_density_var(*v));
        }
        for v in zeta_log_std {
            prior_terms.push(priors.calibration_log_std.log_density_var(*v));
        }
    }

    let mean_block = block(BlockKind::Mean);
    match &cfg.mean {
        MeanSpec::FeedForward { .. } => {
            for v in mean_block {
                prior_terms.push(priors.network.log_density_var(*v));
            }
        }
        _ => {
            for v in mean_block {
                prior_terms.push(priors.mean.log_density_var(*v));
            }
        }
    }

    let mut members = Vec::with_capacity(draws.members);
    for k in 0..draws.members {
        let z: Vec<Vec<Var<'t>>> = if !cfg.has_z() {
            vec![]
        } else if gen.is_some() {
            (0..cfg.sources).map(|j| reparameterize(&z_moments[j].0, &z_moments[j].1, &draws.z[k][j])).collect()
        } else {
            z_det.clone()
        };
        let zeta: Vec<Var<'t>> = if zeta_log_std.is_empty() {
            zeta_mean.to_vec()
        } else {
            (0..zeta_mean.len()).map(|d| zeta_mean[d] + zeta_std[d] * draws.zeta[k][d]).collect()
        };
        let mean = mean_rows(tape, cfg, layout, mean_block, rows, &h, &z, &zeta);
        members.push(MemberVars { z, zeta, mean });
    }

    let log_prior = tape.sum(&prior_terms);
    let [l1, l2] = cfg.regularization;
    let regularization = if l1 == 0.0 && l2 == 0.0 {
        tape.constant(0.0)
    } else {
        let terms: Vec<Var<'t>> =
            layout.regularized().iter().map(|&i| leaves[i].abs() * l1 + leaves[i] * leaves[i] * l2).collect();
        tape.sum(&terms)
    };
    Ok(Assembled { leaves, omega, sigma2, noise, noise_values, h, members, log_prior, regularization })
}

#[allow(clippy::too_many_arguments)]
fn mean_rows<'t>(
    tape: &'t Tape,
    cfg: &ModelConfig,
    layout: &Layout,
    beta: &[Var<'t>],
    rows: &Rows,
    h: &[Vec<Var<'t>>],
    z: &[Vec<Var<'t>>],
    zeta: &[Var<'t>],
) -> Vec<Var<'t>> {
    let n = rows.len();
    let zero = tape.constant(0.0);
    match &cfg.mean {
        MeanSpec::Zero => vec![zero; n],
        MeanSpec::SingleConstant => vec![beta[0]; n],
        MeanSpec::PerSourceConstants => rows.source.iter().map(|&s| if s == 0 { zero } else { beta[s - 1] }).collect(),
        MeanSpec::PolynomialBases { terms } => {
            let mut offsets = Vec::with_capacity(terms.len());
            let mut at = 0;
            for t in terms {
                offsets.push(at);
                at += t.len();
            }
            (0..n)
                .map(|i| {
                    let j = if terms.len() == 1 { 0 } else { rows.source[i] };
                    let mut m = tape.constant(rows.y_zero);
                    for (k, term) in terms[j].iter().enumerate() {
                        m = m + beta[offsets[j] + k] * term.eval(&rows.raw_x[i]);
                    }
                    m
                })
                .collect()
        }
        MeanSpec::FeedForward { hidden } => {
            let sizes = mean_network_sizes(cfg, layout.dx, hidden);
            (0..n)
                .map(|i| {
                    let mut input: Vec<Var<'t>> = rows.scaled_x[i].iter().map(|v| tape.constant(*v)).collect();
                    match &rows.zeta[i] {
                        Some(v) => input.extend(v.iter().map(|c| tape.constant(*c))),
                        None => input.extend_from_slice(zeta),
                    }
                    input.extend_from_slice(&h[rows.combo[i]]);
                    if cfg.has_z() {
                        input.extend_from_slice(&z[rows.source[i]]);
                    }
                    network_forward(&sizes, beta, &input)[0]
                })
                .collect()
        }
    }
}

/// Plain values of one member's unified inputs and mean.
#[derive(Debug, Clone)]
pub(crate) struct MemberValues {
    pub scaled: Vec<Vec<f64>>,
    pub latent: Vec<Vec<f64>>,
    pub mean: Vec<f64>,
}

pub(crate) fn member_values(rows: &Rows, a: &Assembled<'_>, k: usize) -> MemberValues {
    let m = &a.members[k];
    let n = rows.len();
    let mut scaled = Vec::with_capacity(n);
    let mut latent = Vec::with_capacity(n);
    for i in 0..n {
        let mut s = rows.scaled_x[i].clone();
        match &rows.zeta[i] {
            Some(v) => s.extend_from_slice(v),
            None => s.extend(m.zeta.iter().map(|v| v.value())),
        }
        scaled.push(s);
        let mut l: Vec<f64> = a.h[rows.combo[i]].iter().map(|v| v.value()).collect();
        if !m.z.is_empty() {
            l.extend(m.z[rows.source[i]].iter().map(|v| v.value()));
        }
        latent.push(l);
    }
    MemberValues { scaled, latent, mean: m.mean.iter().map(|v| v.value()).collect() }
}

pub(crate) fn row_noise(cfg: &ModelConfig, a: &Assembled<'_>, rows: &Rows) -> Vec<f64> {
    rows.source.iter().map(|&s| noise_of_source(cfg, &a.noise_values, s)).collect()
}

/// Covariance-level quantities shared by the loss and its gradient.
pub(crate) struct Stage {
    pub corr: Vec<DMatrix<f64>>,
    pub dcorr: Vec<DMatrix<f64>>,
    pub factor: Factor,
    pub alpha: DVector<f64>,
    pub resid: DVector<f64>,
    pub spread: Vec<DVector<f64>>,
}

/// Correlation matrix of a member and the profile derivative `dr/ds`.
pub(crate) fn correlation_matrix(
    family: &KernelFamily,
    weights: &[f64],
    scaled: &[Vec<f64>],
    latent: &[Vec<f64>],
    with_derivative: bool,
) -> (DMatrix<f64>, DMatrix<f64>) {
    let n = scaled.len();
    let mut r = DMatrix::<f64>::identity(n, n);
    let mut g = if with_derivative { DMatrix::<f64>::zeros(n, n) } else { DMatrix::<f64>::zeros(0, 0) };
    if with_derivative {
        let (_, g0) = family.profile(0.0);
        for i in 0..n {
            g[(i, i)] = g0;
        }
    }
    for i in 0..n {
        for j in 0..i {
            let mut s = 0.0;
            let (a, b) = (&scaled[i], &scaled[j]);
            for k in 0..weights.len() {
                s += weights[k] * family.coord(a[k] - b[k]).0;
            }
            let (la, lb) = (&latent[i], &latent[j]);
            for k in 0..la.len() {
                let d = la[k] - lb[k];
                s += d * d;
            }
            let (v, dv) = family.profile(s);
            r[(i, j)] = v;
            r[(j, i)] = v;
            if with_derivative {
                g[(i, j)] = dv;
                g[(j, i)] = dv;
            }
        }
    }
    (r, g)
}

pub(crate) fn stage(
    family: &KernelFamily,
    weights: &[f64],
    sigma2: f64,
    noise_row: &[f64],
    members: &[MemberValues],
    y: &DVector<f64>,
    with_derivative: bool,
) -> Result<Stage> {
    let n = y.len();
    let kk = members.len();
    let mut corr = Vec::with_capacity(kk);
    let mut dcorr = Vec::with_capacity(kk);
    for m in members {
        let (r, g) = correlation_matrix(family, weights, &m.scaled, &m.latent, with_derivative);
        corr.push(r);
        dcorr.push(g);
    }
    let mut mbar = DVector::<f64>::zeros(n);
    for m in members {
        mbar += DVector::from_column_slice(&m.mean);
    }
    mbar /= kk as f64;
    let spread: Vec<DVector<f64>> = if kk > 1 {
        members.iter().map(|m| DVector::from_column_slice(&m.mean) - &mbar).collect()
    } else {
        vec![DVector::zeros(n)]
    };
    let mut c = if kk == 1 { &corr[0] * sigma2 } else { DMatrix::zeros(n, n) };
    if kk > 1 {
        for (r, d) in corr.iter().zip(&spread) {
            c += r * sigma2 + d * d.transpose();
        }
        c /= kk as f64;
    }
    for i in 0..n {
        c[(i, i)] += noise_row[i];
    }
    let factor = factorize(&c)?;
    let resid = y - &mbar;
    let alpha = factor.solve(&resid);
    Ok(Stage { corr, dcorr, factor, alpha, resid, spread })
}

/// `½ log|C| + ½ rᵀC⁻¹r`.
pub(crate) fn likelihood_value(st: &Stage) -> f64 {
    0.5 * st.factor.log_det() + 0.5 * st.resid.dot(&st.alpha)
}

pub(crate) struct Adjoints {
    pub sigma2: f64,
    pub omega: Vec<f64>,
    pub noise_row: Vec<f64>,
    /// `[member][row][calibration coordinate]`.
    pub zeta: Vec<Vec<Vec<f64>>>,
    pub latent: Vec<Vec<Vec<f64>>>,
    pub mean: Vec<DVector<f64>>,
}

/// Pushes `G = dL/dC` and the mean-vector adjoint `dL/dm̄` back to the
/// kernel inputs of every member.
#[allow(clippy::too_many_arguments)]
pub(crate) fn propagate(
    family: &KernelFamily,
    weights: &[f64],
    sigma2: f64,
    members: &[MemberValues],
    st: &Stage,
    g: &DMatrix<f64>,
    mbar_adj: &DVector<f64>,
    zeta_from: usize,
) -> Adjoints {
    let n = g.nrows();
    let kk = members.len();
    let ln10 = std::f64::consts::LN_10;
    let dw = weights.len();
    let mut ad = Adjoints {
        sigma2: 0.0,
        omega: vec![0.0; dw],
        noise_row: (0..n).map(|i| g[(i, i)]).collect(),
        zeta: vec![vec![vec![0.0; dw.saturating_sub(zeta_from)]; n]; kk],
        latent: members.iter().map(|m| m.latent.iter().map(|l| vec![0.0; l.len()]).collect()).collect(),
        mean: Vec::with_capacity(kk),
    };
    let inv_k = 1.0 / kk as f64;
    for (k, m) in members.iter().enumerate() {
        let r = &st.corr[k];
        let gp = &st.dcorr[k];
        let mut s2 = 0.0;
        for i in 0..n {
            for j in 0..n {
                s2 += g[(i, j)] * r[(i, j)];
            }
        }
        ad.sigma2 += s2 * inv_k;
        for i in 0..n {
            for j in 0..i {
                let w = 2.0 * g[(i, j)] * sigma2 * gp[(i, j)] * inv_k;
                if w == 0.0 {
                    continue;
                }
                let (a, b) = (&m.scaled[i], &m.scaled[j]);
                for c in 0..dw {
                    let (phi, dphi) = family.coord(a[c] - b[c]);
                    ad.omega[c] += w * ln10 * weights[c] * phi;
                    if c >= zeta_from {
                        let v = w * weights[c] * dphi;
                        ad.zeta[k][i][c - zeta_from] += v;
                        ad.zeta[k][j][c - zeta_from] -= v;
                    }
                }
                let (la, lb) = (&m.latent[i], &m.latent[j]);
                for c in 0..la.len() {
                    let v = w * 2.0 * (la[c] - lb[c]);
                    ad.latent[k][i][c] += v;
                    ad.latent[k][j][c] -= v;
                }
            }
        }
        // the dependence of d_k on m̄ cancels because Σ_k d_k = 0
        let mut madj = mbar_adj * inv_k;
        if kk > 1 {
            let gd = g * &st.spread[k];
            madj += gd * (2.0 * inv_k);
        }
        ad.mean.push(madj);
    }
    ad
}

/// Interval score of training-point predictions and its adjoints.
pub(crate) struct PenaltyParts {
    pub score: f64,
    pub g: DMatrix<f64>,
    pub mbar_adj: DVector<f64>,
    pub noise_row: Vec<f64>,
}

pub(crate) fn interval_penalty(
    st: &Stage,
    p: &DMatrix<f64>,
    noise_row: &[f64],
    y: &DVector<f64>,
    isc: &IntervalScoreConfig,
) -> PenaltyParts {
    let n = y.len();
    let alpha = &st.alpha;
    let z = isc.z();
    let v = isc.v;
    let nf = n as f64;
    let mut score = 0.0;
    let mut abar = DVector::<f64>::zeros(n);
    let mut wbar = DVector::<f64>::zeros(n);
    let mut noise_adj = vec![0.0; n];
    for i in 0..n {
        let d = noise_row[i];
        let mu = y[i] - d * alpha[i];
        let var = (2.0 * d - d * d * p[(i, i)]).max(1e-300);
        let tau = var.sqrt();
        let (w, dmu, dtau) = interval_terms(y[i], mu, tau, z, v);
        score += w / nf;
        abar[i] = dmu * (-d) / nf;
        wbar[i] = dtau * (-d * d / (2.0 * tau)) / nf;
        noise_adj[i] = (dmu * (-alpha[i]) + dtau * (2.0 - 2.0 * d * p[(i, i)]) / (2.0 * tau)) / nf;
    }
    let u = p * &abar;
    let mut g = -(&u * alpha.transpose() + alpha * u.transpose()) * 0.5;
    let pw = DMatrix::from_fn(n, n, |i, j| p[(i, j)] * wbar[j]);
    g -= pw * p;
    PenaltyParts { score, g, mbar_adj: -u, noise_row: noise_adj }
}

/// Interval-score summand with its derivatives in `μ` and `τ`.
pub(crate) fn interval_terms(y: f64, mu: f64, tau: f64, z: f64, v: f64) -> (f64, f64, f64) {
    let upper = mu + z * tau;
    let lower = mu - z * tau;
    let mut w = upper - lower;
    let mut dmu = 0.0;
    let mut dtau = 2.0 * z;
    if y < lower {
        w += 2.0 / v * (lower - y);
        dmu += 2.0 / v;
        dtau -= 2.0 / v * z;
    }
    if y > upper {
        w += 2.0 / v * (y - upper);
        dmu -= 2.0 / v;
        dtau -= 2.0 / v * z;
    }
    (w, dmu, dtau)
}

/// How ensemble draws are produced during optimization.
#[derive(Debug, Clone, PartialEq)]
pub(crate) enum DrawPlan {
    Single,
    Fixed(Draws),
    PerIteration { seed: u64, members: usize },
}

/// Breakdown of one objective evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub loss: f64,
    pub grad: Vec<f64>,
    pub likelihood: f64,
    pub log_prior: f64,
    pub regularization: f64,
    pub interval_score: Option<f64>,
}

/// Negative log-posterior over the unconstrained parameter vector.
pub struct Objective<'a> {
    pub(crate) cfg: &'a ModelConfig,
    pub(crate) layout: &'a Layout,
    pub(crate) rows: &'a Rows,
    pub(crate) y: &'a DVector<f64>,
    pub(crate) draws: DrawPlan,
    pub(crate) penalty: Option<IntervalScoreConfig>,
}

impl<'a> Objective<'a> {
    pub fn is_stochastic(&self) -> bool {
        matches!(self.draws, DrawPlan::PerIteration { .. })
    }

    pub(crate) fn draws_for(&self, key: usize) -> Draws {
        match &self.draws {
            DrawPlan::Single => Draws::single(),
            DrawPlan::Fixed(d) => d.clone(),
            DrawPlan::PerIteration { seed, members } => Draws::sample(self.cfg, *members, *seed, key as u64),
        }
    }

    /// Loss and gradient at `theta`, using the draws tied to `key`.
    pub fn evaluate(&self, theta: &[f64], key: usize) -> Result<Evaluation> {
        let cfg = self.cfg;
        let draws = self.draws_for(key);
        let tape = Tape::new();
        let a = assemble(&tape, cfg, self.layout, theta, self.rows, &draws)?;
        let omega: Vec<f64> = a.omega.iter().map(|v| v.value()).collect();
        let weights: Vec<f64> = omega.iter().map(|w| 10f64.powf(*w)).collect();
        let sigma2 = a.sigma2.value();
        let noise_row = row_noise(cfg, &a, self.rows);
        let members: Vec<MemberValues> = (0..draws.members).map(|k| member_values(self.rows, &a, k)).collect();
        let st = stage(&cfg.kernel, &weights, sigma2, &noise_row, &members, self.y, true)?;
        let lik = likelihood_value(&st);
        let log_prior = a.log_prior.value();
        let reg = a.regularization.value();
        let lmap = lik - log_prior + reg;
        if !lmap.is_finite() {
            return Err(Error::Singular { ladder: vec![] });
        }
        let p = st.factor.inverse();
        let mut g = (&p - &st.alpha * st.alpha.transpose()) * 0.5;
        let mut mbar_adj = -st.alpha.clone();
        let mut noise_direct = vec![0.0; noise_row.len()];
        let (mut c1, mut total, mut is_value) = (1.0, lmap, None);
        if let Some(isc) = &self.penalty {
            if draws.members != 1 {
                return contract("the interval-score penalty requires a deterministic model");
            }
            if isc.eps != 0.0 {
                let pen = interval_penalty(&st, &p, &noise_row, self.y, isc);
                c1 = 1.0 + isc.eps * lmap.signum() * pen.score;
                let c2 = isc.eps * lmap.abs();
                total = lmap + isc.eps * lmap.abs() * pen.score;
                g = g * c1 + pen.g * c2;
                mbar_adj = mbar_adj * c1 + pen.mbar_adj * c2;
                noise_direct = pen.noise_row.iter().map(|v| v * c2).collect();
                is_value = Some(pen.score);
            } else {
                is_value = Some(interval_penalty(&st, &p, &noise_row, self.y, isc).score);
            }
        }
        let zeta_from = self.layout.dx;
        let ad = propagate(&cfg.kernel, &weights, sigma2, &members, &st, &g, &mbar_adj, zeta_from);

        let mut seeds: Vec<(Var<'_>, f64)> = Vec::new();
        seeds.push((a.log_prior, -c1));
        seeds.push((a.regularization, c1));
        seeds.push((a.sigma2, ad.sigma2));
        for (w, d) in a.omega.iter().zip(&ad.omega) {
            seeds.push((*w, *d));
        }
        if !a.noise.is_empty() {
            let mut acc = vec![0.0; a.noise.len()];
            for (i, &s) in self.rows.source.iter().enumerate() {
                if let Some(p) = noise_param_of_source(cfg, s) {
                    acc[p] += ad.noise_row[i] + noise_direct[i];
                }
            }
            for (v, d) in a.noise.iter().zip(acc) {
                seeds.push((*v, d));
            }
        }
        let hw = cfg.h_width();
        let mut h_acc = vec![vec![0.0; hw]; a.h.len()];
        for (k, m) in a.members.iter().enumerate() {
            let mut z_acc = vec![vec![0.0; cfg.z_width()]; m.z.len()];
            let mut zeta_acc = vec![0.0; m.zeta.len()];
            for i in 0..self.rows.len() {
                let l = &ad.latent[k][i];
                for c in 0..hw {
                    h_acc[self.rows.combo[i]][c] += l[c];
                }
                if !m.z.is_empty() {
                    let s = self.rows.source[i];
                    for c in 0..cfg.z_width() {
                        z_acc[s][c] += l[hw + c];
                    }
                }
                if self.rows.zeta[i].is_none() {
                    for (acc, v) in zeta_acc.iter_mut().zip(&ad.zeta[k][i]) {
                        *acc += v;
                    }
                }
                seeds.push((m.mean[i], ad.mean[k][i]));
            }
            for (zs, acc) in m.z.iter().zip(&z_acc) {
                for (v, d) in zs.iter().zip(acc) {
                    seeds.push((*v, *d));
                }
            }
            for (v, d) in m.zeta.iter().zip(&zeta_acc) {
                seeds.push((*v, *d));
            }
        }
        for (hv, acc) in a.h.iter().zip(&h_acc) {
            for (v, d) in hv.iter().zip(acc) {
                seeds.push((*v, *d));
            }
        }
        let adj = tape.gradient(&seeds);
        let grad: Vec<f64> = a.leaves.iter().map(|v| adj[v.index()]).collect();
        if grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::Singular { ladder: vec![] });
        }
        Ok(Evaluation { loss: total, grad, likelihood: lik, log_prior, regularization: reg, interval_score: is_value })
    }
}

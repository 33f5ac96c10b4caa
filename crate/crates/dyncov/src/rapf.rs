//! Regularized auxiliary particle filter for the dynamic covariance model:
//! joint online inference of the time-varying parameters, the static drift
//! hyperparameters and (in the Student-t variant) the tail index.
//!
//! Each update runs, in order: shrinkage of the static block toward its
//! weighted mean, a zero-noise look-ahead propagation, auxiliary resampling
//! on the look-ahead densities, regularized proposal of the static block,
//! parameter diffusion and covariance propagation, and reweighting by the
//! ratio of the realized to the look-ahead density. The shrinkage kernel
//! (mix m_i = a phi_i + (1-a) phi_bar, proposal covariance (1-a^2) V)
//! preserves the cloud's first two moments.

use std::io::{BufRead, BufWriter, Write};
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mle::Innovation;
use crate::models::{
    bmdc_step, diffuse_params, sample_initial_params, tri_len, CovRecursionState, DriftHypers,
    ParamState, DEFAULT_TAU,
};
use crate::mvstat::{
    log_sum_exp, mvn_logpdf, mvt_logpdf, scale_from_cov, systematic_resample,
    weighted_mean_and_cov, CovMatrix, WeightedPoints,
};
use crate::series::ReturnSeries;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RapfConfig {
    pub n_particles: usize,
    /// Shrinkage mixing coefficient a in (0, 1].
    pub shrinkage_a: f64,
    /// Prior mean of the drift scales.
    pub kappa: f64,
    /// Prior variance of the drift scales.
    pub tau: f64,
    /// Prior standard deviation of log(nu - 2) in the Student-t variant.
    pub sigma_nu: f64,
    pub innovation: Innovation,
    pub seed: u64,
    /// Also pass the dynamic states through the shrinkage kernel. Off by
    /// default: the dynamic states already carry their own diffusion.
    pub shrink_dynamic: bool,
}

impl Default for RapfConfig {
    fn default() -> Self {
        RapfConfig {
            n_particles: 4000,
            shrinkage_a: 0.95,
            kappa: 0.0,
            tau: DEFAULT_TAU,
            sigma_nu: 1.0,
            innovation: Innovation::Gaussian,
            seed: 0,
            shrink_dynamic: false,
        }
    }
}

impl RapfConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_particles < 2 {
            return Err(Error::InvalidParams("need at least 2 particles".into()));
        }
        if !(self.shrinkage_a > 0.0 && self.shrinkage_a <= 1.0) {
            return Err(Error::InvalidParams("shrinkage must lie in (0, 1]".into()));
        }
        if !(self.tau > 0.0) {
            return Err(Error::InvalidParams("tau must be positive".into()));
        }
        if !(self.sigma_nu > 0.0) {
            return Err(Error::InvalidParams("sigma_nu must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct Particle {
    pub theta: ParamState,
    pub hypers: DriftHypers,
    /// log(nu - 2); present only in the Student-t variant.
    pub log_nu_minus_2: Option<f64>,
    pub sigma: CovMatrix,
    pub log_weight: f64,
}

impl Particle {
    pub fn nu(&self) -> Option<f64> {
        self.log_nu_minus_2.map(|l| 2.0 + l.exp())
    }
}

#[derive(Debug, Clone)]
pub struct ParticleCloud {
    pub particles: Vec<Particle>,
    pub last_x: DVector<f64>,
    pub step: usize,
    pub normalized: bool,
}

impl ParticleCloud {
    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.last_x.len()
    }

    pub fn weights(&self) -> Vec<f64> {
        self.particles.iter().map(|p| p.log_weight.exp()).collect()
    }

    pub fn set_last_x(&mut self, x: DVector<f64>) {
        self.last_x = x;
    }
}

/// Per-step diagnostics and one-step-ahead predictive densities, both
/// computed from the pre-update cloud (before the observation is
/// assimilated).
#[derive(Debug, Clone)]
pub struct PredictionRecord {
    pub step: usize,
    pub pred_logdensity_mixture: f64,
    pub pred_logdensity_plugin: f64,
    pub predicted_cov_mean: CovMatrix,
    pub ess: f64,
    pub elapsed_seconds: f64,
}

fn innovation_logpdf(x: &DVector<f64>, sigma: &CovMatrix, nu: Option<f64>) -> Result<f64> {
    match nu {
        None => mvn_logpdf(x, sigma),
        Some(nu) => {
            let scale = scale_from_cov(nu, sigma)?;
            mvt_logpdf(x, nu, &scale)
        }
    }
}

/// Deterministic per-particle random substream, so the update is
/// schedule-independent if particles are processed in parallel.
fn substream(seed: u64, step: u64, lane: u64) -> ChaCha8Rng {
    let mut s = seed
        ^ step.wrapping_mul(0x9E37_79B9_7F4A_7C15)
        ^ lane.wrapping_mul(0xBF58_476D_1CE4_E5B9);
    // splitmix64 finalizer
    s = (s ^ (s >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    s = (s ^ (s >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    s ^= s >> 31;
    ChaCha8Rng::seed_from_u64(s)
}

const STATIONARITY_REDRAWS: usize = 100;
const BOUNDARY_MARGIN: f64 = 1e-6;

/// Rescale (a, b) onto the feasible region boundary minus a small margin.
fn clamp_stationary(theta: &mut ParamState) {
    for i in 0..theta.dim() {
        let r2 = theta.a[i] * theta.a[i] + theta.b[i] * theta.b[i];
        if r2 > 1.0 - BOUNDARY_MARGIN {
            let s = ((1.0 - BOUNDARY_MARGIN) / r2).sqrt();
            theta.a[i] *= s;
            theta.b[i] *= s;
        }
    }
}

/// Diffuse theta under the (absolute-valued) drift scales, redrawing up to
/// the budget if the result breaks stationarity, then clamping.
fn diffuse_feasible<R: Rng>(theta: &ParamState, h: &DriftHypers, rng: &mut R) -> ParamState {
    let mut last = diffuse_params(theta, h, rng);
    for _ in 0..STATIONARITY_REDRAWS {
        if last.is_stationary() {
            return last;
        }
        last = diffuse_params(theta, h, rng);
    }
    if !last.is_stationary() {
        clamp_stationary(&mut last);
    }
    last
}

/// Initial particle cloud: vague stationary theta draws, drift scales from
/// N(kappa, tau), log(nu - 2) from N(0, sigma_nu^2), uniform weights, and the
/// supplied Sigma_0. `last_x` starts at zero; set it to the final warmup
/// observation before the first update.
pub fn init_cloud<R: Rng>(
    cfg: &RapfConfig,
    d: usize,
    sigma0: &CovMatrix,
    rng: &mut R,
) -> Result<ParticleCloud> {
    cfg.validate()?;
    if sigma0.dim() != d {
        return Err(Error::DimensionMismatch { expected: d, actual: sigma0.dim() });
    }
    let n = cfg.n_particles;
    let log_w = -(n as f64).ln();
    let tau_sd = cfg.tau.sqrt();
    let mut particles = Vec::with_capacity(n);
    for _ in 0..n {
        let theta = sample_initial_params(d, rng)?;
        let hypers = DriftHypers {
            alpha: cfg.kappa + tau_sd * rng.sample::<f64, _>(StandardNormal),
            beta: cfg.kappa + tau_sd * rng.sample::<f64, _>(StandardNormal),
            gamma: cfg.kappa + tau_sd * rng.sample::<f64, _>(StandardNormal),
            kappa: cfg.kappa,
            tau: cfg.tau,
        };
        let log_nu_minus_2 = match cfg.innovation {
            Innovation::Gaussian => None,
            Innovation::StudentT => Some(cfg.sigma_nu * rng.sample::<f64, _>(StandardNormal)),
        };
        particles.push(Particle {
            theta,
            hypers,
            log_nu_minus_2,
            sigma: sigma0.clone(),
            log_weight: log_w,
        });
    }
    Ok(ParticleCloud { particles, last_x: DVector::zeros(d), step: 0, normalized: true })
}

/// Packed static block of a particle: (alpha, beta, gamma [, log(nu - 2)])
/// plus the dynamic states when `shrink_dynamic` is set.
fn static_block(p: &Particle, cfg: &RapfConfig) -> DVector<f64> {
    let mut v = vec![p.hypers.alpha, p.hypers.beta, p.hypers.gamma];
    if let Some(l) = p.log_nu_minus_2 {
        v.push(l);
    }
    if cfg.shrink_dynamic {
        v.extend(p.theta.a.iter());
        v.extend(p.theta.b.iter());
        v.extend(p.theta.c.iter());
    }
    DVector::from_vec(v)
}

fn unpack_static_block(
    block: &DVector<f64>,
    template: &Particle,
    cfg: &RapfConfig,
) -> (DriftHypers, Option<f64>, Option<ParamState>) {
    let hypers = DriftHypers {
        alpha: block[0],
        beta: block[1],
        gamma: block[2],
        kappa: template.hypers.kappa,
        tau: template.hypers.tau,
    };
    let mut idx = 3;
    let log_nu = template.log_nu_minus_2.map(|_| {
        let v = block[idx];
        idx += 1;
        v
    });
    let theta = if cfg.shrink_dynamic {
        let d = template.theta.dim();
        let a = DVector::from_fn(d, |i, _| block[idx + i]);
        let b = DVector::from_fn(d, |i, _| block[idx + d + i]);
        let nt = tri_len(d);
        let c = DVector::from_fn(nt, |i, _| block[idx + 2 * d + i]);
        Some(ParamState { a, b, c })
    } else {
        None
    };
    (hypers, log_nu, theta)
}

/// Shrinkage moments of the static block: the weighted mean, the weighted
/// covariance V, and the Cholesky factor of the proposal covariance
/// (1 - a^2) V, regularized with 1e-12 I when singular. A particle proposed
/// as m_i + L z with m_i = a phi_i + (1 - a) mean leaves the cloud's first
/// two moments unchanged.
pub fn shrinkage_moments(
    blocks: &[DVector<f64>],
    weights: &[f64],
    a: f64,
) -> Result<(DVector<f64>, DMatrix<f64>, DMatrix<f64>)> {
    let wp = WeightedPoints::new(blocks.to_vec(), weights.to_vec())?;
    let (mean, v) = weighted_mean_and_cov(&wp);
    let k = mean.len();
    let prop = &v * (1.0 - a * a);
    if prop.iter().all(|&e| e == 0.0) {
        return Ok((mean, v, DMatrix::zeros(k, k)));
    }
    let l = match nalgebra::Cholesky::new(prop.clone()) {
        Some(c) => c.unpack(),
        None => {
            let reg = &prop + DMatrix::<f64>::identity(k, k) * 1e-12;
            nalgebra::Cholesky::new(reg)
                .map(|c| c.unpack())
                .unwrap_or_else(|| DMatrix::zeros(k, k))
        }
    };
    Ok((mean, v, l))
}

/// One filter update: assimilates x_t and returns the posterior cloud for
/// time t together with the pre-assimilation predictive record.
pub fn rapf_update(
    cloud: &ParticleCloud,
    x_t: &DVector<f64>,
    cfg: &RapfConfig,
    rng: &mut ChaCha8Rng,
) -> Result<(ParticleCloud, PredictionRecord)> {
    let start = Instant::now();
    let n = cloud.len();
    let d = cloud.dim();
    if n < 2 {
        return Err(Error::EmptyCloud);
    }
    if x_t.len() != d {
        return Err(Error::DimensionMismatch { expected: d, actual: x_t.len() });
    }
    if !cloud.normalized {
        return Err(Error::InvalidParams("cloud weights not normalized".into()));
    }

    // predictive densities for x_t from the time-(t-1) cloud
    let pred_mixture = predictive_logpdf_mixture(cloud, x_t, cfg, rng)?;
    let pred_plugin = predictive_logpdf_plugin(cloud, x_t)?;

    let weights = cloud.weights();

    // (1) static-block shrinkage moments
    let blocks: Vec<DVector<f64>> =
        cloud.particles.iter().map(|p| static_block(p, cfg)).collect();
    let (mean_block, _v, l_prop) = shrinkage_moments(&blocks, &weights, cfg.shrinkage_a)?;
    let k = mean_block.len();
    let shrunk: Vec<DVector<f64>> = blocks
        .iter()
        .map(|b| b * cfg.shrinkage_a + &mean_block * (1.0 - cfg.shrinkage_a))
        .collect();

    // (2) zero-noise look-ahead
    let mut lookahead = Vec::with_capacity(n);
    let mut lookahead_lp = Vec::with_capacity(n);
    let mut aux_log = Vec::with_capacity(n);
    for p in &cloud.particles {
        let state = CovRecursionState { sigma: p.sigma.clone(), last_x: cloud.last_x.clone() };
        let mu = bmdc_step(&state, &p.theta)?;
        let lp = innovation_logpdf(x_t, &mu, p.nu()).unwrap_or(f64::NEG_INFINITY);
        aux_log.push(p.log_weight + lp);
        lookahead.push(mu);
        lookahead_lp.push(lp);
    }
    let aux_lse = log_sum_exp(&aux_log);
    if !aux_lse.is_finite() {
        return Err(Error::DegenerateWeights);
    }
    let aux_w: Vec<f64> = aux_log.iter().map(|g| (g - aux_lse).exp()).collect();

    // predicted covariance: pre-update weighted mean of the look-ahead estimates
    let mut pred_cov = DMatrix::zeros(d, d);
    for (mu, w) in lookahead.iter().zip(&weights) {
        pred_cov += mu.matrix() * *w;
    }
    let predicted_cov_mean = CovMatrix::from_symmetric_unchecked(pred_cov);

    // (3) auxiliary resampling
    let ancestors = systematic_resample(&aux_w, rng)?;

    // (4)-(6) regularized proposal, diffusion, propagation, reweighting
    let mut particles = Vec::with_capacity(n);
    let mut new_log_w = Vec::with_capacity(n);
    for (i, &j) in ancestors.iter().enumerate() {
        let mut lane = substream(cfg.seed, cloud.step as u64, i as u64);
        let parent = &cloud.particles[j];
        let z = DVector::from_fn(k, |_, _| lane.sample::<f64, _>(StandardNormal));
        let block = &shrunk[j] + &l_prop * z;
        let (hypers, log_nu, shrunk_theta) = unpack_static_block(&block, parent, cfg);
        let base_theta = match &shrunk_theta {
            Some(th) => th,
            None => &parent.theta,
        };
        let theta = diffuse_feasible(base_theta, &hypers, &mut lane);
        let state =
            CovRecursionState { sigma: parent.sigma.clone(), last_x: cloud.last_x.clone() };
        let sigma = bmdc_step(&state, &theta)?;
        let nu = log_nu.map(|l| 2.0 + l.exp());
        let lp = innovation_logpdf(x_t, &sigma, nu).unwrap_or(f64::NEG_INFINITY);
        new_log_w.push(lp - lookahead_lp[j]);
        particles.push(Particle { theta, hypers, log_nu_minus_2: log_nu, sigma, log_weight: 0.0 });
    }
    let lse = log_sum_exp(&new_log_w);
    if !lse.is_finite() {
        return Err(Error::DegenerateWeights);
    }
    let mut ess_inv = 0.0;
    for (p, lw) in particles.iter_mut().zip(&new_log_w) {
        p.log_weight = lw - lse;
        let w = p.log_weight.exp();
        ess_inv += w * w;
    }

    let new_cloud = ParticleCloud {
        particles,
        last_x: x_t.clone(),
        step: cloud.step + 1,
        normalized: true,
    };
    let record = PredictionRecord {
        step: cloud.step + 1,
        pred_logdensity_mixture: pred_mixture,
        pred_logdensity_plugin: pred_plugin,
        predicted_cov_mean,
        ess: 1.0 / ess_inv,
        elapsed_seconds: start.elapsed().as_secs_f64(),
    };
    Ok((new_cloud, record))
}

/// Weighted posterior means of the dynamic parameters, drift hypers and the
/// current covariance. In the Student-t variant the tail index is averaged in
/// log(nu - 2) space, matching its prior.
pub fn posterior_mean(cloud: &ParticleCloud) -> Result<(ParamState, DriftHypers, CovMatrix)> {
    if cloud.is_empty() {
        return Err(Error::EmptyCloud);
    }
    let d = cloud.dim();
    let first = &cloud.particles[0];
    let mut a = DVector::zeros(d);
    let mut b = DVector::zeros(d);
    let mut c = DVector::zeros(tri_len(d));
    let mut sigma = DMatrix::zeros(d, d);
    let (mut al, mut be, mut ga) = (0.0, 0.0, 0.0);
    for p in &cloud.particles {
        let w = p.log_weight.exp();
        a += &p.theta.a * w;
        b += &p.theta.b * w;
        c += &p.theta.c * w;
        sigma += p.sigma.matrix() * w;
        al += p.hypers.alpha * w;
        be += p.hypers.beta * w;
        ga += p.hypers.gamma * w;
    }
    let hypers = DriftHypers {
        alpha: al,
        beta: be,
        gamma: ga,
        kappa: first.hypers.kappa,
        tau: first.hypers.tau,
    };
    Ok((
        ParamState { a, b, c },
        hypers,
        CovMatrix::from_symmetric_unchecked((&sigma + sigma.transpose()) * 0.5),
    ))
}

/// Weighted mean of log(nu - 2) across the cloud, if the Student-t variant
/// is active.
pub fn posterior_mean_log_nu(cloud: &ParticleCloud) -> Option<f64> {
    let mut acc = 0.0;
    for p in &cloud.particles {
        acc += p.log_nu_minus_2? * p.log_weight.exp();
    }
    Some(acc)
}

/// Predictive log density of `x` under the particle mixture: each particle is
/// propagated one step with freshly sampled diffusion noise and the weighted
/// densities are combined in log space.
pub fn predictive_logpdf_mixture<R: Rng>(
    cloud: &ParticleCloud,
    x: &DVector<f64>,
    _cfg: &RapfConfig,
    rng: &mut R,
) -> Result<f64> {
    if cloud.is_empty() {
        return Err(Error::EmptyCloud);
    }
    let mut terms = Vec::with_capacity(cloud.len());
    for p in &cloud.particles {
        let theta = diffuse_feasible(&p.theta, &p.hypers, rng);
        let state = CovRecursionState { sigma: p.sigma.clone(), last_x: cloud.last_x.clone() };
        let sigma = bmdc_step(&state, &theta)?;
        let lp = innovation_logpdf(x, &sigma, p.nu()).unwrap_or(f64::NEG_INFINITY);
        terms.push(p.log_weight + lp);
    }
    Ok(log_sum_exp(&terms))
}

/// Predictive log density of `x` at the posterior mean: one zero-noise
/// propagation from the weighted-mean parameters and covariance.
pub fn predictive_logpdf_plugin(cloud: &ParticleCloud, x: &DVector<f64>) -> Result<f64> {
    let (theta, _, sigma) = posterior_mean(cloud)?;
    let state = CovRecursionState { sigma, last_x: cloud.last_x.clone() };
    let prop = bmdc_step(&state, &theta)?;
    let nu = posterior_mean_log_nu(cloud).map(|l| 2.0 + l.exp());
    innovation_logpdf(x, &prop, nu)
}

/// Both predictive log densities along one coordinate, the others held at
/// zero. The mixture reuses a single set of propagated covariances across the
/// grid.
pub fn predictive_density_curve<R: Rng>(
    cloud: &ParticleCloud,
    dim_index: usize,
    grid: &[f64],
    _cfg: &RapfConfig,
    rng: &mut R,
) -> Result<Vec<(f64, f64, f64)>> {
    let d = cloud.dim();
    if dim_index >= d {
        return Err(Error::DimensionMismatch { expected: d, actual: dim_index });
    }
    if grid.is_empty() {
        return Err(Error::InvalidParams("empty grid".into()));
    }
    if cloud.is_empty() {
        return Err(Error::EmptyCloud);
    }
    // one propagated covariance per particle, shared across grid points
    let mut propagated = Vec::with_capacity(cloud.len());
    for p in &cloud.particles {
        let theta = diffuse_feasible(&p.theta, &p.hypers, rng);
        let state = CovRecursionState { sigma: p.sigma.clone(), last_x: cloud.last_x.clone() };
        propagated.push((bmdc_step(&state, &theta)?, p.nu(), p.log_weight));
    }
    let (mean_theta, _, mean_sigma) = posterior_mean(cloud)?;
    let state = CovRecursionState { sigma: mean_sigma, last_x: cloud.last_x.clone() };
    let plugin_sigma = bmdc_step(&state, &mean_theta)?;
    let plugin_nu = posterior_mean_log_nu(cloud).map(|l| 2.0 + l.exp());

    let mut out = Vec::with_capacity(grid.len());
    for &g in grid {
        let mut x = DVector::zeros(d);
        x[dim_index] = g;
        let terms: Vec<f64> = propagated
            .iter()
            .map(|(s, nu, lw)| {
                lw + innovation_logpdf(&x, s, *nu).unwrap_or(f64::NEG_INFINITY)
            })
            .collect();
        let mixture = log_sum_exp(&terms);
        let plugin = innovation_logpdf(&x, &plugin_sigma, plugin_nu)?;
        out.push((g, mixture, plugin));
    }
    Ok(out)
}

/// 1 / sum(w_i^2); lies in [1, N] for normalized weights.
pub fn effective_sample_size(cloud: &ParticleCloud) -> f64 {
    let s: f64 = cloud.particles.iter().map(|p| p.log_weight.exp().powi(2)).sum();
    1.0 / s
}

/// Writes a cloud snapshot as decimal text, one particle per line, for
/// resumable runs. Format: a header line `d n step`, a line with `last_x`,
/// then per particle: log_weight, a, b, c, alpha, beta, gamma, log_nu (or
/// `-`), and the upper triangle of sigma.
pub fn save_cloud<W: Write>(cloud: &ParticleCloud, mut w: W) -> Result<()> {
    let d = cloud.dim();
    writeln!(w, "{} {} {}", d, cloud.len(), cloud.step)?;
    let fmt = |v: f64| format!("{v:.17e}");
    writeln!(
        w,
        "{}",
        cloud.last_x.iter().map(|&v| fmt(v)).collect::<Vec<_>>().join(" ")
    )?;
    for p in &cloud.particles {
        let mut fields = vec![fmt(p.log_weight)];
        fields.extend(p.theta.a.iter().map(|&v| fmt(v)));
        fields.extend(p.theta.b.iter().map(|&v| fmt(v)));
        fields.extend(p.theta.c.iter().map(|&v| fmt(v)));
        fields.push(fmt(p.hypers.alpha));
        fields.push(fmt(p.hypers.beta));
        fields.push(fmt(p.hypers.gamma));
        fields.push(p.log_nu_minus_2.map_or("-".to_string(), fmt));
        for i in 0..d {
            for j in i..d {
                fields.push(fmt(p.sigma.matrix()[(i, j)]));
            }
        }
        writeln!(w, "{}", fields.join(" "))?;
    }
    Ok(())
}

pub fn save_cloud_to_path(cloud: &ParticleCloud, path: &std::path::Path) -> Result<()> {
    let f = std::fs::File::create(path)?;
    save_cloud(cloud, BufWriter::new(f))
}

pub fn load_cloud<R: BufRead>(r: R) -> Result<ParticleCloud> {
    let mut lines = r.lines();
    let header = lines.next().ok_or_else(|| Error::Parse("missing header".into()))??;
    let parts: Vec<usize> = header
        .split_whitespace()
        .map(|s| s.parse().map_err(|_| Error::Parse(format!("bad header field {s}"))))
        .collect::<Result<_>>()?;
    if parts.len() != 3 {
        return Err(Error::Parse("header must be `d n step`".into()));
    }
    let (d, n, step) = (parts[0], parts[1], parts[2]);
    let nt = tri_len(d);
    let parse = |s: &str| -> Result<f64> {
        s.parse().map_err(|_| Error::Parse(format!("bad number {s}")))
    };
    let lx_line = lines.next().ok_or_else(|| Error::Parse("missing last_x".into()))??;
    let lx: Vec<f64> = lx_line.split_whitespace().map(parse).collect::<Result<_>>()?;
    if lx.len() != d {
        return Err(Error::Parse("last_x length mismatch".into()));
    }
    let mut particles = Vec::with_capacity(n);
    for line in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let toks: Vec<&str> = line.split_whitespace().collect();
        let expected = 1 + 2 * d + nt + 3 + 1 + nt;
        if toks.len() != expected {
            return Err(Error::Parse(format!(
                "particle line has {} fields, expected {expected}",
                toks.len()
            )));
        }
        let mut pos = 0;
        let next = |pos: &mut usize| -> Result<f64> {
            let v = parse(toks[*pos]);
            *pos += 1;
            v
        };
        let log_weight = next(&mut pos)?;
        let mut a = DVector::zeros(d);
        for i in 0..d {
            a[i] = next(&mut pos)?;
        }
        let mut b = DVector::zeros(d);
        for i in 0..d {
            b[i] = next(&mut pos)?;
        }
        let mut c = DVector::zeros(nt);
        for i in 0..nt {
            c[i] = next(&mut pos)?;
        }
        let alpha = next(&mut pos)?;
        let beta = next(&mut pos)?;
        let gamma = next(&mut pos)?;
        let nu_tok = toks[pos];
        pos += 1;
        let log_nu_minus_2 = if nu_tok == "-" { None } else { Some(parse(nu_tok)?) };
        let mut sig = DMatrix::zeros(d, d);
        for i in 0..d {
            for j in i..d {
                let v = next(&mut pos)?;
                sig[(i, j)] = v;
                sig[(j, i)] = v;
            }
        }
        particles.push(Particle {
            theta: ParamState { a, b, c },
            hypers: DriftHypers { alpha, beta, gamma, ..Default::default() },
            log_nu_minus_2,
            sigma: CovMatrix::from_symmetric_unchecked(sig),
            log_weight,
        });
    }
    if particles.len() != n {
        return Err(Error::Parse(format!("expected {n} particles, got {}", particles.len())));
    }
    Ok(ParticleCloud {
        particles,
        last_x: DVector::from_vec(lx),
        step,
        normalized: true,
    })
}

pub fn load_cloud_from_path(path: &std::path::Path) -> Result<ParticleCloud> {
    let f = std::fs::File::open(path)?;
    load_cloud(std::io::BufReader::new(f))
}

/// Runs the filter over a full series: Sigma_0 from the first `warmup`
/// observations, assimilation from t = 1 on, records returned for
/// t >= warmup. Deterministic given (series, cfg).
pub fn run_filter(
    series: &ReturnSeries,
    warmup: usize,
    cfg: &RapfConfig,
) -> Result<(Vec<PredictionRecord>, ParticleCloud)> {
    let d = series.dim();
    if series.len() <= warmup || warmup < d + 2 {
        return Err(Error::TooFewObservations { required: warmup + 1, actual: series.len() });
    }
    let sigma0 = crate::models::initial_sigma(&series.prefix(warmup))?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut cloud = init_cloud(cfg, d, &sigma0, &mut rng)?;
    cloud.set_last_x(series.row(0));
    let mut records = Vec::with_capacity(series.len() - warmup);
    for t in 1..series.len() {
        let (next, record) = rapf_update(&cloud, &series.row(t), cfg, &mut rng)?;
        cloud = next;
        if t >= warmup {
            records.push(record);
        }
    }
    Ok((records, cloud))
}

//! Constrained maximum-likelihood fitting of the BEKK baselines.
//!
//! The likelihood is optimized over an unconstrained vector z through smooth
//! bijections: a_i = logistic(z), b_i = sqrt(1 - a_i^2) * logistic(z') (which
//! enforces a_i^2 + b_i^2 < 1 and hence the determinant condition), the C
//! diagonal through softplus, and nu = 2 + exp(z). The optimizer is a
//! derivative-free simplex search followed by a numeric-gradient polish, with
//! random stationary restarts.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{
    bekk_step, sample_initial_params, tri_len, BekkCoeff, BekkParams, CovRecursionState,
};
use crate::mvstat::{mvn_logpdf, mvt_logpdf, scale_from_cov, CovMatrix};
use crate::series::ReturnSeries;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Variant {
    Diagonal,
    Full,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Innovation {
    Gaussian,
    StudentT,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    pub variant: Variant,
    pub innovation: Innovation,
    pub max_iters: usize,
    pub n_restarts: usize,
    pub tol: f64,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            variant: Variant::Diagonal,
            innovation: Innovation::Gaussian,
            max_iters: 2000,
            n_restarts: 5,
            tol: 1e-8,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitResult {
    pub params: BekkParams,
    pub loglik: f64,
    pub iterations: usize,
    pub converged: bool,
}

fn logistic(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

fn softplus(z: f64) -> f64 {
    if z > 30.0 {
        z
    } else {
        z.exp().ln_1p()
    }
}

fn softplus_inv(y: f64) -> f64 {
    if y > 30.0 {
        y
    } else {
        y.exp_m1().ln()
    }
}

/// Entry scale for the full-coefficient map: tanh-bounded entries scaled so
/// the Hadamard bound keeps det(A)^2 + det(B)^2 <= 1.
fn full_entry_scale(d: usize) -> f64 {
    (d as f64).powf(-0.5) * 2f64.powf(-0.5 / d as f64)
}

/// Number of free coordinates for a given dimension/variant/innovation.
pub fn param_count(d: usize, variant: Variant, innovation: Innovation) -> usize {
    let base = match variant {
        Variant::Diagonal => 2 * d,
        Variant::Full => 2 * d * d,
    };
    base + tri_len(d) + usize::from(innovation == Innovation::StudentT)
}

/// Unconstrained vector -> feasible BEKK parameters.
pub fn untransform(z: &DVector<f64>, d: usize, variant: Variant, innovation: Innovation) -> BekkParams {
    let nt = tri_len(d);
    let (coeff, off) = match variant {
        Variant::Diagonal => {
            let mut a = DVector::zeros(d);
            let mut b = DVector::zeros(d);
            for i in 0..d {
                a[i] = logistic(z[i]);
                b[i] = (1.0 - a[i] * a[i]).sqrt() * logistic(z[d + i]);
            }
            (BekkCoeff::Diagonal { a, b }, 2 * d)
        }
        Variant::Full => {
            let s = full_entry_scale(d);
            let a = DMatrix::from_fn(d, d, |i, j| s * z[i * d + j].tanh());
            let b = DMatrix::from_fn(d, d, |i, j| s * z[d * d + i * d + j].tanh());
            (BekkCoeff::Full { a, b }, 2 * d * d)
        }
    };
    let mut c = DVector::zeros(nt);
    let mut k = 0;
    let mut idx = off;
    for i in 0..d {
        for j in i..d {
            c[k] = if i == j { softplus(z[idx]) } else { z[idx] };
            k += 1;
            idx += 1;
        }
    }
    let nu = match innovation {
        Innovation::Gaussian => None,
        Innovation::StudentT => Some(2.0 + z[idx].exp()),
    };
    BekkParams { coeff, c, nu }
}

/// Feasible BEKK parameters -> unconstrained vector (inverse of `untransform`).
pub fn transform(p: &BekkParams) -> Result<DVector<f64>> {
    let d = p.dim();
    let variant = match &p.coeff {
        BekkCoeff::Diagonal { .. } => Variant::Diagonal,
        BekkCoeff::Full { .. } => Variant::Full,
    };
    let innovation =
        if p.nu.is_some() { Innovation::StudentT } else { Innovation::Gaussian };
    let mut z = DVector::zeros(param_count(d, variant, innovation));
    let off = match &p.coeff {
        BekkCoeff::Diagonal { a, b } => {
            for i in 0..d {
                if !(a[i] > 0.0 && a[i] < 1.0) {
                    return Err(Error::InvalidParams(format!("a[{i}] outside (0,1)")));
                }
                let cap = (1.0 - a[i] * a[i]).sqrt();
                if !(b[i] > 0.0 && b[i] < cap) {
                    return Err(Error::InvalidParams(format!("b[{i}] outside (0, sqrt(1-a^2))")));
                }
                z[i] = logit(a[i]);
                z[d + i] = logit(b[i] / cap);
            }
            2 * d
        }
        BekkCoeff::Full { a, b } => {
            let s = full_entry_scale(d);
            for i in 0..d {
                for j in 0..d {
                    if a[(i, j)].abs() >= s || b[(i, j)].abs() >= s {
                        return Err(Error::InvalidParams("full coefficient out of range".into()));
                    }
                    z[i * d + j] = (a[(i, j)] / s).atanh();
                    z[d * d + i * d + j] = (b[(i, j)] / s).atanh();
                }
            }
            2 * d * d
        }
    };
    let mut k = 0;
    let mut idx = off;
    for i in 0..d {
        for j in i..d {
            z[idx] = if i == j {
                if !(p.c[k] > 0.0) {
                    return Err(Error::InvalidParams("C diagonal must be positive".into()));
                }
                softplus_inv(p.c[k])
            } else {
                p.c[k]
            };
            k += 1;
            idx += 1;
        }
    }
    if let Some(nu) = p.nu {
        if !(nu > 2.0) {
            return Err(Error::InvalidDof(nu));
        }
        z[idx] = (nu - 2.0).ln();
    }
    Ok(z)
}

/// Total one-step-ahead log likelihood of a series under static BEKK
/// parameters, seeded at Sigma_0 (which scores the first observation).
/// Factorization failures yield a -inf sentinel rather than an error so the
/// optimizer can treat them as infeasible.
pub fn bekk_loglik(params: &BekkParams, series: &ReturnSeries, sigma0: &CovMatrix) -> f64 {
    let d = series.dim();
    if params.dim() != d || series.len() < 2 {
        return f64::NEG_INFINITY;
    }
    let mut total = 0.0;
    let mut sigma = sigma0.clone();
    for t in 0..series.len() {
        if t > 0 {
            let state = CovRecursionState { sigma, last_x: series.row(t - 1) };
            sigma = match bekk_step(&state, params) {
                Ok(s) => s,
                Err(_) => return f64::NEG_INFINITY,
            };
        }
        let x = series.row(t);
        let lp = match params.nu {
            None => mvn_logpdf(&x, &sigma),
            Some(nu) => match scale_from_cov(nu, &sigma) {
                Ok(scale) => mvt_logpdf(&x, nu, &scale),
                Err(_) => return f64::NEG_INFINITY,
            },
        };
        match lp {
            Ok(v) if v.is_finite() => total += v,
            _ => return f64::NEG_INFINITY,
        }
    }
    total
}

/// One-step prediction: the next covariance from the recursion and the log
/// density of `x_next` under the fitted innovation law.
pub fn predict_one_step(
    params: &BekkParams,
    state: &CovRecursionState,
    x_next: &DVector<f64>,
) -> Result<(CovMatrix, f64)> {
    let sigma = bekk_step(state, params)?;
    let lp = match params.nu {
        None => mvn_logpdf(x_next, &sigma)?,
        Some(nu) => {
            let scale = scale_from_cov(nu, &sigma)?;
            mvt_logpdf(x_next, nu, &scale)?
        }
    };
    Ok((sigma, lp))
}

struct SimplexOutcome {
    x: DVector<f64>,
    fx: f64,
    iterations: usize,
    converged: bool,
}

/// Nelder-Mead simplex minimization (reflection / expansion / contraction /
/// shrink) with a relative-improvement stopping rule.
fn nelder_mead<F: FnMut(&DVector<f64>) -> f64>(
    mut f: F,
    x0: &DVector<f64>,
    step: f64,
    max_iters: usize,
    tol: f64,
) -> SimplexOutcome {
    let n = x0.len();
    let mut simplex: Vec<(DVector<f64>, f64)> = Vec::with_capacity(n + 1);
    simplex.push((x0.clone(), f(x0)));
    for i in 0..n {
        let mut x = x0.clone();
        x[i] += step;
        let fx = f(&x);
        simplex.push((x, fx));
    }
    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iters {
        iterations += 1;
        simplex.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap_or(std::cmp::Ordering::Equal));
        let best = simplex[0].1;
        let worst = simplex[n].1;
        if best.is_finite() && (worst - best).abs() <= tol * (best.abs() + 1.0) {
            converged = true;
            break;
        }
        let centroid: DVector<f64> = simplex[..n]
            .iter()
            .fold(DVector::zeros(n), |acc, (x, _)| acc + x)
            / n as f64;
        let reflected = &centroid + (&centroid - &simplex[n].0);
        let fr = f(&reflected);
        if fr < simplex[0].1 {
            let expanded = &centroid + (&reflected - &centroid) * 2.0;
            let fe = f(&expanded);
            simplex[n] = if fe < fr { (expanded, fe) } else { (reflected, fr) };
        } else if fr < simplex[n - 1].1 {
            simplex[n] = (reflected, fr);
        } else {
            let contracted = if fr < simplex[n].1 {
                &centroid + (&reflected - &centroid) * 0.5
            } else {
                &centroid + (&simplex[n].0 - &centroid) * 0.5
            };
            let fc = f(&contracted);
            if fc < simplex[n].1.min(fr) {
                simplex[n] = (contracted, fc);
            } else {
                // shrink toward the best vertex
                let best_x = simplex[0].0.clone();
                for v in simplex.iter_mut().skip(1) {
                    v.0 = (&best_x + &v.0) * 0.5;
                    v.1 = f(&v.0);
                }
            }
        }
    }
    simplex.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap_or(std::cmp::Ordering::Equal));
    let (x, fx) = simplex.swap_remove(0);
    SimplexOutcome { x, fx, iterations, converged }
}

/// Central-difference gradient descent with backtracking, used to polish the
/// simplex optimum.
fn gradient_polish<F: FnMut(&DVector<f64>) -> f64>(
    mut f: F,
    x0: &DVector<f64>,
    fx0: f64,
    iters: usize,
) -> (DVector<f64>, f64) {
    let n = x0.len();
    let h = 1e-5;
    let mut x = x0.clone();
    let mut fx = fx0;
    for _ in 0..iters {
        let mut grad = DVector::zeros(n);
        for i in 0..n {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[i] += h;
            xm[i] -= h;
            grad[i] = (f(&xp) - f(&xm)) / (2.0 * h);
        }
        let gnorm = grad.norm();
        if !gnorm.is_finite() || gnorm < 1e-12 {
            break;
        }
        let mut step = 1e-2 / gnorm.max(1.0);
        let mut improved = false;
        for _ in 0..25 {
            let cand = &x - &grad * step;
            let fc = f(&cand);
            if fc < fx {
                x = cand;
                fx = fc;
                improved = true;
                break;
            }
            step *= 0.5;
        }
        if !improved {
            break;
        }
    }
    (x, fx)
}

fn sigma0_for(series: &ReturnSeries) -> Result<CovMatrix> {
    crate::models::initial_sigma(series)
}

fn random_start(
    d: usize,
    variant: Variant,
    innovation: Innovation,
    rng: &mut ChaCha8Rng,
) -> Result<DVector<f64>> {
    let theta = sample_initial_params(d, rng)?;
    let nu = match innovation {
        Innovation::Gaussian => None,
        Innovation::StudentT => Some(8.0),
    };
    let params = match variant {
        Variant::Diagonal => {
            // keep strictly inside the open feasible box for the logit maps
            let a = theta.a.map(|v| v.clamp(1e-3, 0.999));
            let mut b = DVector::zeros(d);
            for i in 0..d {
                let cap = (1.0 - a[i] * a[i]).sqrt();
                b[i] = (theta.b[i] * cap).clamp(1e-3 * cap, 0.999 * cap);
            }
            let c = ensure_positive_diag(&theta.c, d);
            BekkParams { coeff: BekkCoeff::Diagonal { a, b }, c, nu }
        }
        Variant::Full => {
            let s = full_entry_scale(d);
            let a = DMatrix::from_fn(d, d, |i, j| if i == j { theta.a[i] * s * 0.9 } else { 0.0 });
            let b = DMatrix::from_fn(d, d, |i, j| if i == j { theta.b[i] * s * 0.9 } else { 0.0 });
            let c = ensure_positive_diag(&theta.c, d);
            BekkParams { coeff: BekkCoeff::Full { a, b }, c, nu }
        }
    };
    transform(&params)
}

/// Moment-matched start with little dynamics: a = b = 0.1 and C^T C equal to
/// the sample covariance scaled to the implied unconditional level. Tried
/// first so that flat likelihood ridges (e.g. on i.i.d. data, where `a` is
/// unidentified once b = 0) resolve to the parsimonious solution.
fn null_start(
    sigma0: &CovMatrix,
    variant: Variant,
    innovation: Innovation,
) -> Result<DVector<f64>> {
    let d = sigma0.dim();
    let (a0, b0) = (0.1, 0.1);
    let target = sigma0.matrix() * (1.0 - a0 * a0 - b0 * b0);
    let l = crate::mvstat::cholesky(&CovMatrix::repaired(target)?)?;
    // C = L^T packed row-major: C^T C reproduces the target
    let mut c = DVector::zeros(tri_len(d));
    let mut k = 0;
    for i in 0..d {
        for j in i..d {
            c[k] = l[(j, i)];
            k += 1;
        }
    }
    let nu = match innovation {
        Innovation::Gaussian => None,
        Innovation::StudentT => Some(8.0),
    };
    let params = match variant {
        Variant::Diagonal => BekkParams {
            coeff: BekkCoeff::Diagonal {
                a: DVector::from_element(d, a0),
                b: DVector::from_element(d, b0),
            },
            c,
            nu,
        },
        Variant::Full => {
            let s = full_entry_scale(d);
            let scale = (a0).min(0.9 * s);
            BekkParams {
                coeff: BekkCoeff::Full {
                    a: DMatrix::from_diagonal(&DVector::from_element(d, scale)),
                    b: DMatrix::from_diagonal(&DVector::from_element(d, scale)),
                },
                c,
                nu,
            }
        }
    };
    transform(&params)
}

fn ensure_positive_diag(c: &DVector<f64>, d: usize) -> DVector<f64> {
    let mut out = c.clone();
    let mut k = 0;
    for i in 0..d {
        for j in i..d {
            if i == j && out[k] <= 0.0 {
                out[k] = 0.05;
            }
            k += 1;
        }
    }
    out
}

/// Fit BEKK / BEKK-T by constrained maximum likelihood: simplex search plus
/// numeric-gradient polish over the reparameterized space, best of
/// `n_restarts` random stationary starts. Deterministic given
/// (series, cfg, seed).
pub fn fit_bekk(series: &ReturnSeries, cfg: &FitConfig, seed: u64) -> Result<FitResult> {
    fit_bekk_impl(series, cfg, seed, None)
}

/// Same as [`fit_bekk`] but starting from `init` (warm start) in addition to
/// the random restarts.
pub fn fit_bekk_warm(
    series: &ReturnSeries,
    cfg: &FitConfig,
    seed: u64,
    init: &BekkParams,
) -> Result<FitResult> {
    fit_bekk_impl(series, cfg, seed, Some(init))
}

fn fit_bekk_impl(
    series: &ReturnSeries,
    cfg: &FitConfig,
    seed: u64,
    warm: Option<&BekkParams>,
) -> Result<FitResult> {
    let d = series.dim();
    let n_params = param_count(d, cfg.variant, cfg.innovation);
    let floor = 10 * n_params / d;
    if series.len() < floor {
        return Err(Error::TooFewObservations { required: floor, actual: series.len() });
    }
    let sigma0 = sigma0_for(series)?;
    let objective = |z: &DVector<f64>| {
        let p = untransform(z, d, cfg.variant, cfg.innovation);
        -bekk_loglik(&p, series, &sigma0)
    };

    let mut starts: Vec<DVector<f64>> = Vec::new();
    if let Some(p) = warm {
        starts.push(transform(p)?);
    }
    if let Ok(z) = null_start(&sigma0, cfg.variant, cfg.innovation) {
        starts.push(z);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    while starts.len() < cfg.n_restarts.max(1) {
        starts.push(random_start(d, cfg.variant, cfg.innovation, &mut rng)?);
    }
    starts.retain(|z| objective(z).is_finite());
    if starts.is_empty() {
        return Err(Error::NoFeasibleStart);
    }

    let mut best: Option<SimplexOutcome> = None;
    let mut total_iters = 0;
    for z0 in &starts {
        let out = nelder_mead(objective, z0, 0.25, cfg.max_iters, cfg.tol);
        total_iters += out.iterations;
        let (x, fx) = gradient_polish(objective, &out.x, out.fx, 40);
        let out = SimplexOutcome { x, fx, iterations: out.iterations, converged: out.converged };
        // strict improvement beyond tol; ties resolve to the earlier start
        best = match best {
            None => Some(out),
            Some(b) if out.fx < b.fx - cfg.tol * (b.fx.abs() + 1.0) => Some(out),
            b => b,
        };
    }
    let best = best.unwrap();
    if !best.fx.is_finite() {
        return Err(Error::NonFinite("objective at the optimum".into()));
    }
    let params = untransform(&best.x, d, cfg.variant, cfg.innovation);
    Ok(FitResult {
        params,
        loglik: -best.fx,
        iterations: total_iters,
        converged: best.converged,
    })
}

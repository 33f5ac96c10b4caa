//! Rolling one-step-ahead evaluation protocol and the multi-method
//! statistical comparison (Friedman rank sum test plus the Nemenyi post-hoc
//! critical-distance test).

use std::str::FromStr;
use std::time::Instant;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{Error, Result};
use crate::mle::{fit_bekk, fit_bekk_warm, predict_one_step, FitConfig, Innovation};
use crate::models::{bekk_step, initial_sigma, CovRecursionState};
use crate::rapf::{run_filter, PredictionRecord, RapfConfig};
use crate::series::ReturnSeries;

/// The four compared forecasters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Method {
    Bekk,
    BekkT,
    Bmdc,
    BmdcT,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Bekk, Method::BekkT, Method::Bmdc, Method::BmdcT];

    pub fn name(&self) -> &'static str {
        match self {
            Method::Bekk => "BEKK",
            Method::BekkT => "BEKK-T",
            Method::Bmdc => "BMDC",
            Method::BmdcT => "BMDC-T",
        }
    }

    pub fn innovation(&self) -> Innovation {
        match self {
            Method::Bekk | Method::Bmdc => Innovation::Gaussian,
            Method::BekkT | Method::BmdcT => Innovation::StudentT,
        }
    }

    /// Filter-based methods run a single sequential pass; the others refit a
    /// static model along the rolling window.
    pub fn is_filter(&self) -> bool {
        matches!(self, Method::Bmdc | Method::BmdcT)
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "BEKK" => Ok(Method::Bekk),
            "BEKK-T" | "BEKKT" => Ok(Method::BekkT),
            "BMDC" => Ok(Method::Bmdc),
            "BMDC-T" | "BMDCT" => Ok(Method::BmdcT),
            other => Err(Error::Parse(format!("unknown method {other}"))),
        }
    }
}

/// Everything the rolling protocol needs for either family of methods.
#[derive(Debug, Clone, Copy)]
pub struct EvalConfig {
    pub rapf: RapfConfig,
    pub fit: FitConfig,
    /// Refit the static models every this many steps (1 = every step).
    pub refit_every: usize,
    /// Cold refits rerun the full multistart search instead of warm-starting
    /// from the previous optimum.
    pub cold_refit: bool,
    /// Iteration cap applied to warm-started refits.
    pub warm_iter_cap: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            rapf: RapfConfig::default(),
            fit: FitConfig::default(),
            refit_every: 1,
            cold_refit: false,
            warm_iter_cap: 200,
        }
    }
}

/// Outcome of one (series, method) rolling run. The headline scores use the
/// mixture predictive density (which equals the plug-in density for the
/// static methods).
#[derive(Debug, Clone)]
pub struct EvalRun {
    pub method: Method,
    pub warmup: usize,
    pub records: Vec<PredictionRecord>,
    pub avg_loglik: f64,
    pub cum_loglik: f64,
    /// Steps whose prediction failed and were replaced by the worst finite
    /// step density of the run.
    pub n_failed: usize,
}

/// Arithmetic mean and sum of the per-step mixture predictive log densities.
pub fn average_and_cumulative(records: &[PredictionRecord]) -> Result<(f64, f64)> {
    if records.is_empty() {
        return Err(Error::EmptyRun);
    }
    let cum: f64 = records.iter().map(|r| r.pred_logdensity_mixture).sum();
    Ok((cum / records.len() as f64, cum))
}

/// Trailing-window means of the mixture densities, for plotting. Entries are
/// (step of the window's last record, window mean).
pub fn learning_curve(records: &[PredictionRecord], window: usize) -> Vec<(usize, f64)> {
    assert!(window >= 1, "window must be at least 1");
    if records.len() < window {
        return Vec::new();
    }
    let vals: Vec<f64> = records.iter().map(|r| r.pred_logdensity_mixture).collect();
    let mut out = Vec::with_capacity(records.len() - window + 1);
    let mut acc: f64 = vals[..window].iter().sum();
    out.push((records[window - 1].step, acc / window as f64));
    for t in window..vals.len() {
        acc += vals[t] - vals[t - window];
        out.push((records[t].step, acc / window as f64));
    }
    out
}

const MAX_FAILURE_FRACTION: f64 = 0.10;

/// Rolling one-step-ahead evaluation: at each step t >= warmup the model sees
/// x_0..x_{t-1} and is scored on x_t. Filter methods run one sequential pass;
/// static methods refit along the window (warm-started by default) and replay
/// the recursion for the current conditional covariance.
pub fn rolling_evaluate(
    series: &ReturnSeries,
    method: Method,
    warmup: usize,
    cfg: &EvalConfig,
) -> Result<EvalRun> {
    let d = series.dim();
    let t_len = series.len();
    if warmup < d + 2 || t_len <= warmup {
        return Err(Error::TooFewObservations { required: warmup + 1, actual: t_len });
    }

    let (mut records, n_failed) = if method.is_filter() {
        let rapf_cfg = RapfConfig { innovation: method.innovation(), ..cfg.rapf };
        let (records, _) = run_filter(series, warmup, &rapf_cfg)?;
        (records, 0)
    } else {
        rolling_bekk(series, method, warmup, cfg)?
    };

    // replace failed steps (recorded as -inf) by the worst finite density
    if n_failed > 0 {
        let worst_mix = records
            .iter()
            .map(|r| r.pred_logdensity_mixture)
            .filter(|v| v.is_finite())
            .fold(f64::INFINITY, f64::min);
        let worst_plug = records
            .iter()
            .map(|r| r.pred_logdensity_plugin)
            .filter(|v| v.is_finite())
            .fold(f64::INFINITY, f64::min);
        if !worst_mix.is_finite() || !worst_plug.is_finite() {
            return Err(Error::TooManyFailures { failed: n_failed, total: records.len() });
        }
        for r in records.iter_mut() {
            if !r.pred_logdensity_mixture.is_finite() {
                r.pred_logdensity_mixture = worst_mix;
            }
            if !r.pred_logdensity_plugin.is_finite() {
                r.pred_logdensity_plugin = worst_plug;
            }
        }
    }

    let (avg, cum) = average_and_cumulative(&records)?;
    Ok(EvalRun { method, warmup, records, avg_loglik: avg, cum_loglik: cum, n_failed })
}

fn rolling_bekk(
    series: &ReturnSeries,
    method: Method,
    warmup: usize,
    cfg: &EvalConfig,
) -> Result<(Vec<PredictionRecord>, usize)> {
    let t_len = series.len();
    let n_steps = t_len - warmup;
    let budget = (MAX_FAILURE_FRACTION * n_steps as f64).floor() as usize;
    let fit_cfg = FitConfig { innovation: method.innovation(), ..cfg.fit };
    let warm_cfg = FitConfig {
        max_iters: cfg.warm_iter_cap,
        n_restarts: 1,
        ..fit_cfg
    };

    let mut records = Vec::with_capacity(n_steps);
    let mut n_failed = 0;
    let mut last_fit: Option<crate::mle::FitResult> = None;
    let mut last_cov = initial_sigma(&series.prefix(warmup))?;

    for t in warmup..t_len {
        let start = Instant::now();
        let step_result = (|| -> Result<PredictionRecord> {
            let prefix = series.prefix(t);
            let refit_due = last_fit.is_none() || (t - warmup) % cfg.refit_every == 0;
            if refit_due {
                let seed = cfg.rapf.seed;
                let fit = match (&last_fit, cfg.cold_refit) {
                    (Some(prev), false) => fit_bekk_warm(&prefix, &warm_cfg, seed, &prev.params)?,
                    _ => fit_bekk(&prefix, &fit_cfg, seed)?,
                };
                last_fit = Some(fit);
            }
            let params = &last_fit.as_ref().unwrap().params;
            // replay the recursion over the prefix for Sigma_{t-1}
            let mut sigma = initial_sigma(&prefix)?;
            for u in 1..t {
                let state = CovRecursionState { sigma, last_x: series.row(u - 1) };
                sigma = bekk_step(&state, params)?;
            }
            let state = CovRecursionState { sigma, last_x: series.row(t - 1) };
            let (pred_sigma, lp) = predict_one_step(params, &state, &series.row(t))?;
            if !lp.is_finite() {
                return Err(Error::NonFinite("predictive log density".into()));
            }
            Ok(PredictionRecord {
                step: t,
                pred_logdensity_mixture: lp,
                pred_logdensity_plugin: lp,
                predicted_cov_mean: pred_sigma,
                ess: f64::NAN,
                elapsed_seconds: start.elapsed().as_secs_f64(),
            })
        })();
        match step_result {
            Ok(r) => {
                last_cov = r.predicted_cov_mean.clone();
                records.push(r);
            }
            Err(_) => {
                n_failed += 1;
                if n_failed > budget {
                    return Err(Error::TooManyFailures { failed: n_failed, total: n_steps });
                }
                records.push(PredictionRecord {
                    step: t,
                    pred_logdensity_mixture: f64::NEG_INFINITY,
                    pred_logdensity_plugin: f64::NEG_INFINITY,
                    predicted_cov_mean: last_cov.clone(),
                    ess: f64::NAN,
                    elapsed_seconds: start.elapsed().as_secs_f64(),
                });
            }
        }
    }
    Ok((records, n_failed))
}

/// Per-method scores over a set of datasets; higher is better.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScoreTable {
    pub methods: Vec<String>,
    pub datasets: Vec<String>,
    /// scores[(i, j)] is method i's score on dataset j.
    pub scores: DMatrix<f64>,
}

impl ScoreTable {
    pub fn new(methods: Vec<String>, datasets: Vec<String>, scores: DMatrix<f64>) -> Result<Self> {
        let (k, n) = (methods.len(), datasets.len());
        if k < 2 || n < 2 {
            return Err(Error::DegenerateTable(format!(
                "need at least 2 methods and 2 datasets, got {k}x{n}"
            )));
        }
        if scores.nrows() != k || scores.ncols() != n {
            return Err(Error::DimensionMismatch { expected: k * n, actual: scores.len() });
        }
        if scores.iter().any(|v| v.is_nan()) {
            return Err(Error::DegenerateTable("NaN score entry".into()));
        }
        Ok(ScoreTable { methods, datasets, scores })
    }

    pub fn n_methods(&self) -> usize {
        self.methods.len()
    }

    pub fn n_datasets(&self) -> usize {
        self.datasets.len()
    }
}

/// Within-dataset ranks, 1 = best (highest score), ties get average ranks.
pub fn column_ranks(scores: &DMatrix<f64>, j: usize) -> Vec<f64> {
    let k = scores.nrows();
    let mut ranks = vec![0.0; k];
    for i in 0..k {
        let s = scores[(i, j)];
        let mut better = 0;
        let mut equal = 0;
        for l in 0..k {
            if l == i {
                continue;
            }
            if scores[(l, j)] > s {
                better += 1;
            } else if scores[(l, j)] == s {
                equal += 1;
            }
        }
        ranks[i] = better as f64 + 1.0 + equal as f64 / 2.0;
    }
    ranks
}

/// Friedman rank sum test in its chi-square form:
/// chi2_F = 12n/(k(k+1)) [sum R_bar_j^2 - k(k+1)^2/4], k-1 degrees of
/// freedom. Returns (statistic, reject at `alpha`, average ranks).
pub fn friedman_test(tbl: &ScoreTable, alpha: f64) -> Result<(f64, bool, Vec<f64>)> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::UnsupportedAlpha(alpha));
    }
    let k = tbl.n_methods();
    let n = tbl.n_datasets();
    if k == 2 {
        for j in 0..n {
            if tbl.scores[(0, j)] == tbl.scores[(1, j)] {
                return Err(Error::DegenerateTable(format!(
                    "dataset {j} is constant across both methods"
                )));
            }
        }
    }
    let mut avg_ranks = vec![0.0; k];
    for j in 0..n {
        for (i, r) in column_ranks(&tbl.scores, j).into_iter().enumerate() {
            avg_ranks[i] += r / n as f64;
        }
    }
    let kf = k as f64;
    let nf = n as f64;
    let sum_sq: f64 = avg_ranks.iter().map(|r| r * r).sum();
    let statistic = 12.0 * nf / (kf * (kf + 1.0)) * (sum_sq - kf * (kf + 1.0).powi(2) / 4.0);
    let chi = ChiSquared::new(kf - 1.0)
        .map_err(|e| Error::InvalidParams(e.to_string()))?;
    let critical = chi.inverse_cdf(1.0 - alpha);
    Ok((statistic, statistic > critical, avg_ranks))
}

/// Critical values q_alpha(k) of the studentized range statistic divided by
/// sqrt(2), for the Nemenyi test (infinite degrees of freedom), k = 2..=10.
const NEMENYI_Q_05: [f64; 9] =
    [1.960, 2.343, 2.569, 2.728, 2.850, 2.949, 3.031, 3.102, 3.164];
const NEMENYI_Q_10: [f64; 9] =
    [1.645, 2.052, 2.291, 2.459, 2.589, 2.693, 2.780, 2.855, 2.920];

/// Nemenyi critical distance CD = q_alpha(k) sqrt(k(k+1)/(6n)).
pub fn nemenyi_critical_distance(k: usize, n: usize, alpha: f64) -> Result<f64> {
    if !(2..=10).contains(&k) {
        return Err(Error::UnsupportedK(k));
    }
    if n == 0 {
        return Err(Error::DegenerateTable("need at least one dataset".into()));
    }
    let q = if (alpha - 0.05).abs() < 1e-12 {
        NEMENYI_Q_05[k - 2]
    } else if (alpha - 0.10).abs() < 1e-12 {
        NEMENYI_Q_10[k - 2]
    } else {
        return Err(Error::UnsupportedAlpha(alpha));
    };
    let kf = k as f64;
    Ok(q * (kf * (kf + 1.0) / (6.0 * n as f64)).sqrt())
}

/// Pairwise significance matrix: entry (i, j) is true iff the average ranks
/// of methods i and j differ by more than the critical distance.
pub fn pairwise_significance(avg_ranks: &[f64], cd: f64) -> DMatrix<bool> {
    let k = avg_ranks.len();
    DMatrix::from_fn(k, k, |i, j| i != j && (avg_ranks[i] - avg_ranks[j]).abs() > cd)
}

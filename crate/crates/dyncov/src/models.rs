//! Covariance recursions (GARCH, diagonal/full BEKK, the dynamic-parameter
//! variant), the parameter diffusion process, stationarity constraints, and
//! generative simulation.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mvstat::{self, CovMatrix};
use crate::series::ReturnSeries;

/// GARCH(1,1) coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GarchParams {
    pub alpha0: f64,
    pub alpha1: f64,
    pub beta1: f64,
}

impl GarchParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha0 > 0.0 && self.alpha1 >= 0.0 && self.beta1 >= 0.0)
            || !(self.alpha0.is_finite() && self.alpha1.is_finite() && self.beta1.is_finite())
            || self.alpha1 + self.beta1 >= 1.0
        {
            return Err(Error::InvalidParams(
                "need alpha0 > 0, alpha1, beta1 >= 0, alpha1 + beta1 < 1".into(),
            ));
        }
        Ok(())
    }
}

/// One GARCH(1,1) variance update: alpha0 + alpha1 x^2 + beta1 sigma^2.
pub fn garch_step(sigma2: f64, last_x: f64, p: &GarchParams) -> Result<f64> {
    p.validate()?;
    if !(sigma2 > 0.0) {
        return Err(Error::InvalidParams("sigma2 must be positive".into()));
    }
    Ok(p.alpha0 + p.alpha1 * last_x * last_x + p.beta1 * sigma2)
}

/// ARMA coefficient matrices of a BEKK(1,1) model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum BekkCoeff {
    /// A and B diagonal, stored as their diagonals.
    Diagonal { a: DVector<f64>, b: DVector<f64> },
    /// Dense A and B.
    Full { a: DMatrix<f64>, b: DMatrix<f64> },
}

/// Static BEKK(1,1) parameter set. `c` holds the upper triangle of C in
/// row-major order; `nu` switches the innovation law to Student-t.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BekkParams {
    pub coeff: BekkCoeff,
    pub c: DVector<f64>,
    pub nu: Option<f64>,
}

/// Length of the packed upper triangle for dimension d.
pub fn tri_len(d: usize) -> usize {
    d * (d + 1) / 2
}

/// Upper-triangular C from its packed row-major upper triangle.
pub fn unpack_upper_triangular(c: &DVector<f64>, d: usize) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(d, d);
    let mut k = 0;
    for i in 0..d {
        for j in i..d {
            m[(i, j)] = c[k];
            k += 1;
        }
    }
    m
}

/// Index of the (i,i) entry inside the packed row-major upper triangle.
/// Row i starts after rows 0..i, which hold d, d-1, ..., d-i+1 entries.
pub fn tri_diag_index(i: usize, d: usize) -> usize {
    i * (2 * d - i + 1) / 2
}

impl BekkParams {
    pub fn diagonal(a: DVector<f64>, b: DVector<f64>, c: DVector<f64>, nu: Option<f64>) -> Self {
        BekkParams { coeff: BekkCoeff::Diagonal { a, b }, c, nu }
    }

    pub fn dim(&self) -> usize {
        match &self.coeff {
            BekkCoeff::Diagonal { a, .. } => a.len(),
            BekkCoeff::Full { a, .. } => a.nrows(),
        }
    }

    pub fn n_params(&self) -> usize {
        let d = self.dim();
        let base = match &self.coeff {
            BekkCoeff::Diagonal { .. } => 2 * d,
            BekkCoeff::Full { .. } => 2 * d * d,
        };
        base + tri_len(d) + usize::from(self.nu.is_some())
    }

    pub fn c_matrix(&self) -> DMatrix<f64> {
        unpack_upper_triangular(&self.c, self.dim())
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.dim();
        if self.c.len() != tri_len(d) {
            return Err(Error::DimensionMismatch { expected: tri_len(d), actual: self.c.len() });
        }
        if let Some(nu) = self.nu {
            if !(nu > 2.0) {
                return Err(Error::InvalidDof(nu));
            }
        }
        if !self.is_stationary() {
            return Err(Error::InvalidParams("parameters fail the stationarity check".into()));
        }
        Ok(())
    }

    /// Non-divergence check. For diagonal coefficients this enforces both the
    /// determinant condition det(AA) + det(BB) <= 1 and the elementwise
    /// condition a_i^2 + b_i^2 <= 1; for full coefficients only the
    /// determinant condition applies.
    pub fn is_stationary(&self) -> bool {
        match &self.coeff {
            BekkCoeff::Diagonal { a, b } => stationarity_check(a, b),
            BekkCoeff::Full { a, b } => {
                let da = a.determinant();
                let db = b.determinant();
                da.is_finite() && db.is_finite() && da * da + db * db <= 1.0
            }
        }
    }
}

/// Determinant plus elementwise stationarity check on diagonal coefficients:
/// prod(a_i^2) + prod(b_i^2) <= 1 and a_i^2 + b_i^2 <= 1 for every i.
pub fn stationarity_check(a: &DVector<f64>, b: &DVector<f64>) -> bool {
    if a.len() != b.len() || a.iter().chain(b.iter()).any(|v| !v.is_finite()) {
        return false;
    }
    let det_aa: f64 = a.iter().map(|v| v * v).product();
    let det_bb: f64 = b.iter().map(|v| v * v).product();
    if det_aa + det_bb > 1.0 {
        return false;
    }
    a.iter().zip(b.iter()).all(|(ai, bi)| ai * ai + bi * bi <= 1.0)
}

/// Time-t parameters of the dynamic model: diagonals a_t, b_t and the packed
/// upper triangle c_t.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamState {
    pub a: DVector<f64>,
    pub b: DVector<f64>,
    pub c: DVector<f64>,
}

impl ParamState {
    pub fn dim(&self) -> usize {
        self.a.len()
    }

    pub fn is_stationary(&self) -> bool {
        stationarity_check(&self.a, &self.b)
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.dim();
        if self.b.len() != d {
            return Err(Error::DimensionMismatch { expected: d, actual: self.b.len() });
        }
        if self.c.len() != tri_len(d) {
            return Err(Error::DimensionMismatch { expected: tri_len(d), actual: self.c.len() });
        }
        if self.a.iter().chain(self.b.iter()).chain(self.c.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidParams("non-finite parameter entry".into()));
        }
        Ok(())
    }
}

/// Drift standard deviations of the parameter diffusion, plus the Gaussian
/// prior placed on them. The prior admits negative draws; only the absolute
/// values enter the diffusion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriftHypers {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    /// Prior mean of the drift scales.
    pub kappa: f64,
    /// Prior variance of the drift scales.
    pub tau: f64,
}

pub const DEFAULT_TAU: f64 = 0.005 * 0.005;

impl Default for DriftHypers {
    fn default() -> Self {
        DriftHypers { alpha: 0.0, beta: 0.0, gamma: 0.0, kappa: 0.0, tau: DEFAULT_TAU }
    }
}

impl DriftHypers {
    pub fn new(alpha: f64, beta: f64, gamma: f64) -> Self {
        DriftHypers { alpha, beta, gamma, ..Default::default() }
    }
}

/// State carried by every covariance recursion: Sigma_{t-1} and x_{t-1}.
#[derive(Debug, Clone)]
pub struct CovRecursionState {
    pub sigma: CovMatrix,
    pub last_x: DVector<f64>,
}

impl CovRecursionState {
    pub fn new(sigma: CovMatrix, last_x: DVector<f64>) -> Result<Self> {
        if sigma.dim() != last_x.len() {
            return Err(Error::DimensionMismatch { expected: sigma.dim(), actual: last_x.len() });
        }
        Ok(CovRecursionState { sigma, last_x })
    }
}

/// Shared diagonal-coefficient recursion kernel:
/// C^T C + B x x^T B + A Sigma A with A = diag(a), B = diag(b).
fn diag_recursion(
    sigma: &DMatrix<f64>,
    x: &DVector<f64>,
    a: &DVector<f64>,
    b: &DVector<f64>,
    c: &DVector<f64>,
) -> DMatrix<f64> {
    let d = a.len();
    let c_mat = unpack_upper_triangular(c, d);
    let mut out = c_mat.transpose() * &c_mat;
    for i in 0..d {
        for j in 0..d {
            out[(i, j)] += b[i] * x[i] * x[j] * b[j] + a[i] * sigma[(i, j)] * a[j];
        }
    }
    // exact symmetry by construction
    for i in 0..d {
        for j in 0..i {
            let v = 0.5 * (out[(i, j)] + out[(j, i)]);
            out[(i, j)] = v;
            out[(j, i)] = v;
        }
    }
    out
}

/// One BEKK(1,1) covariance update.
pub fn bekk_step(state: &CovRecursionState, p: &BekkParams) -> Result<CovMatrix> {
    let d = p.dim();
    if state.sigma.dim() != d || state.last_x.len() != d {
        return Err(Error::DimensionMismatch { expected: d, actual: state.sigma.dim() });
    }
    let out = match &p.coeff {
        BekkCoeff::Diagonal { a, b } => {
            diag_recursion(state.sigma.matrix(), &state.last_x, a, b, &p.c)
        }
        BekkCoeff::Full { a, b } => {
            let c_mat = p.c_matrix();
            let bx = b.transpose() * &state.last_x;
            let mut out = c_mat.transpose() * &c_mat;
            out.ger(1.0, &bx, &bx, 1.0);
            out += a.transpose() * state.sigma.matrix() * a;
            (&out + out.transpose()) * 0.5
        }
    };
    Ok(CovMatrix::from_symmetric_unchecked(out))
}

/// One dynamic-parameter covariance update, the diagonal recursion with the
/// matrices built from theta_t.
pub fn bmdc_step(state: &CovRecursionState, theta: &ParamState) -> Result<CovMatrix> {
    let d = theta.dim();
    if state.sigma.dim() != d || state.last_x.len() != d {
        return Err(Error::DimensionMismatch { expected: d, actual: state.sigma.dim() });
    }
    if theta.c.len() != tri_len(d) {
        return Err(Error::DimensionMismatch { expected: tri_len(d), actual: theta.c.len() });
    }
    Ok(CovMatrix::from_symmetric_unchecked(diag_recursion(
        state.sigma.matrix(),
        &state.last_x,
        &theta.a,
        &theta.b,
        &theta.c,
    )))
}

/// Random-walk step of the parameter diffusion, coordinate-wise independent
/// with standard deviations |alpha|, |beta|, |gamma|.
pub fn diffuse_params<R: Rng>(theta: &ParamState, h: &DriftHypers, rng: &mut R) -> ParamState {
    let sa = h.alpha.abs();
    let sb = h.beta.abs();
    let sc = h.gamma.abs();
    let jitter = |v: &DVector<f64>, s: f64, rng: &mut R| {
        if s == 0.0 {
            v.clone()
        } else {
            DVector::from_fn(v.len(), |i, _| v[i] + s * rng.sample::<f64, _>(StandardNormal))
        }
    };
    ParamState {
        a: jitter(&theta.a, sa, rng),
        b: jitter(&theta.b, sb, rng),
        c: jitter(&theta.c, sc, rng),
    }
}

const REJECTION_BUDGET: usize = 100_000;

/// Vague initial-state draw: a_0, b_0 uniform on [0,1) by rejection against
/// the stationarity check; c_0 diagonal uniform on [0.05, 0.5), off-diagonal
/// N(0, 0.05^2).
pub fn sample_initial_params<R: Rng>(d: usize, rng: &mut R) -> Result<ParamState> {
    assert!(d >= 1);
    let mut tries = 0;
    let (a, b) = loop {
        let a = DVector::from_fn(d, |_, _| rng.random::<f64>());
        let b = DVector::from_fn(d, |_, _| rng.random::<f64>());
        if stationarity_check(&a, &b) {
            break (a, b);
        }
        tries += 1;
        if tries >= REJECTION_BUDGET {
            return Err(Error::RejectionBudgetExceeded(REJECTION_BUDGET));
        }
    };
    let mut c = DVector::zeros(tri_len(d));
    let mut k = 0;
    for i in 0..d {
        for j in i..d {
            c[k] = if i == j {
                0.05 + 0.45 * rng.random::<f64>()
            } else {
                0.05 * rng.sample::<f64, _>(StandardNormal)
            };
            k += 1;
        }
    }
    Ok(ParamState { a, b, c })
}

/// Generative model selector for `simulate`.
pub enum SimModel<'a> {
    Bekk(&'a BekkParams),
    Bmdc { theta0: &'a ParamState, hypers: &'a DriftHypers, nu: Option<f64> },
}

/// Simulates a return series of length `t_len` together with its latent
/// covariance path. Convention: Sigma_0 is the supplied seed, x_0 is drawn
/// from it, and Sigma_t = step(Sigma_{t-1}, x_{t-1}) for t >= 1.
pub fn simulate<R: Rng>(
    model: SimModel<'_>,
    t_len: usize,
    sigma0: &CovMatrix,
    rng: &mut R,
) -> Result<(ReturnSeries, Vec<CovMatrix>)> {
    assert!(t_len >= 1);
    let d = sigma0.dim();
    let nu = match &model {
        SimModel::Bekk(p) => p.nu,
        SimModel::Bmdc { nu, .. } => *nu,
    };
    let draw = |sigma: &CovMatrix, rng: &mut R| -> Result<DVector<f64>> {
        match nu {
            None => mvstat::sample_mvn(&DVector::zeros(d), sigma.matrix(), rng),
            Some(nu) => {
                let scale = mvstat::scale_from_cov(nu, sigma)?;
                mvstat::sample_mvt(nu, scale.matrix(), rng)
            }
        }
    };

    let mut sigmas = Vec::with_capacity(t_len);
    let mut xs = Vec::with_capacity(t_len);
    let mut sigma = sigma0.clone();
    let mut theta = match &model {
        SimModel::Bmdc { theta0, .. } => Some((*theta0).clone()),
        SimModel::Bekk(_) => None,
    };
    let mut x = draw(&sigma, rng)?;
    sigmas.push(sigma.clone());
    xs.push(x.clone());

    for _ in 1..t_len {
        let state = CovRecursionState { sigma, last_x: x };
        sigma = match &model {
            SimModel::Bekk(p) => bekk_step(&state, p)?,
            SimModel::Bmdc { hypers, .. } => {
                let th = diffuse_params(theta.as_ref().unwrap(), hypers, rng);
                let s = bmdc_step(&state, &th)?;
                theta = Some(th);
                s
            }
        };
        x = draw(&sigma, rng)?;
        sigmas.push(sigma.clone());
        xs.push(x.clone());
    }
    Ok((ReturnSeries::from_rows(&xs)?, sigmas))
}

/// Empirical covariance (divisor n) of a series prefix, jitter-repaired so it
/// factorizes. Seeds every recursion.
pub fn initial_sigma(prefix: &ReturnSeries) -> Result<CovMatrix> {
    let d = prefix.dim();
    let n = prefix.len();
    if n < d + 1 {
        return Err(Error::TooFewObservations { required: d + 1, actual: n });
    }
    let mut mean = DVector::zeros(d);
    for t in 0..n {
        mean += prefix.row(t) / n as f64;
    }
    let mut cov = DMatrix::zeros(d, d);
    for t in 0..n {
        let dlt = prefix.row(t) - &mean;
        cov.ger(1.0 / n as f64, &dlt, &dlt, 1.0);
    }
    let cov = (&cov + cov.transpose()) * 0.5;
    CovMatrix::repaired(cov)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn d1_params(a: f64, b: f64, c: f64) -> BekkParams {
        BekkParams::diagonal(
            DVector::from_vec(vec![a]),
            DVector::from_vec(vec![b]),
            DVector::from_vec(vec![c]),
            None,
        )
    }

    #[test]
    fn garch_step_hand_values() {
        let p = GarchParams { alpha0: 0.1, alpha1: 0.2, beta1: 0.7 };
        assert_abs_diff_eq!(garch_step(1.0, 1.0, &p).unwrap(), 1.0, epsilon = 1e-15);

        let p0 = GarchParams { alpha0: 0.3, alpha1: 0.0, beta1: 0.0 };
        assert_abs_diff_eq!(garch_step(5.0, 2.0, &p0).unwrap(), 0.3, epsilon = 1e-15);

        let p1 = GarchParams { alpha0: 0.3, alpha1: 0.4, beta1: 0.0 };
        assert_abs_diff_eq!(garch_step(5.0, 0.0, &p1).unwrap(), 0.3, epsilon = 1e-15);
    }

    #[test]
    fn garch_step_rejects_bad_params() {
        let p = GarchParams { alpha0: 0.1, alpha1: 0.5, beta1: 0.6 };
        assert!(garch_step(1.0, 1.0, &p).is_err());
    }

    #[test]
    fn bekk_step_no_arma_terms_is_ctc() {
        let d = 2;
        let p = BekkParams::diagonal(
            DVector::zeros(d),
            DVector::zeros(d),
            DVector::from_vec(vec![0.5, 0.2, 0.4]),
            None,
        );
        let state = CovRecursionState {
            sigma: CovMatrix::identity(d),
            last_x: DVector::from_vec(vec![1.0, -1.0]),
        };
        let out = bekk_step(&state, &p).unwrap();
        let c = p.c_matrix();
        let ctc = c.transpose() * &c;
        assert_abs_diff_eq!(out.matrix(), &ctc, epsilon = 1e-15);
    }

    #[test]
    fn bekk_step_d1_hand_value() {
        let p = d1_params(0.9, 0.4, 0.3);
        let state = CovRecursionState {
            sigma: CovMatrix::identity(1),
            last_x: DVector::from_vec(vec![0.5]),
        };
        let out = bekk_step(&state, &p).unwrap();
        assert_abs_diff_eq!(out.matrix()[(0, 0)], 0.94, epsilon = 1e-15);
    }

    #[test]
    fn bekk_d1_equals_garch() {
        // algebraic reduction: (c^2, b^2, a^2) -> (alpha0, alpha1, beta1)
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..1000 {
            let a = 0.95 * rng.random::<f64>();
            let b = (1.0 - a * a).sqrt() * 0.99 * rng.random::<f64>();
            let c = 0.05 + rng.random::<f64>();
            let sigma2 = 0.1 + 2.0 * rng.random::<f64>();
            let x = 4.0 * rng.random::<f64>() - 2.0;

            let p = d1_params(a, b, c);
            let state = CovRecursionState {
                sigma: CovMatrix::new(DMatrix::from_vec(1, 1, vec![sigma2])).unwrap(),
                last_x: DVector::from_vec(vec![x]),
            };
            let bekk = bekk_step(&state, &p).unwrap().matrix()[(0, 0)];
            let garch = garch_step(
                sigma2,
                x,
                &GarchParams { alpha0: c * c, alpha1: b * b, beta1: a * a },
            )
            .unwrap();
            assert!((bekk - garch).abs() < 1e-12, "{bekk} vs {garch}");
        }
    }

    #[test]
    fn bmdc_step_matches_bekk_with_same_values() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let theta = sample_initial_params(3, &mut rng).unwrap();
        let p = BekkParams::diagonal(theta.a.clone(), theta.b.clone(), theta.c.clone(), None);
        let state = CovRecursionState {
            sigma: CovMatrix::identity(3),
            last_x: DVector::from_vec(vec![0.3, -0.7, 1.1]),
        };
        let m1 = bmdc_step(&state, &theta).unwrap();
        let m2 = bekk_step(&state, &p).unwrap();
        assert_abs_diff_eq!(m1.matrix(), m2.matrix(), epsilon = 1e-15);
    }

    #[test]
    fn bmdc_step_results_are_symmetric_spd() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..10_000 {
            let theta = sample_initial_params(3, &mut rng).unwrap();
            let x = DVector::from_fn(3, |_, _| rng.sample::<f64, _>(StandardNormal));
            let state = CovRecursionState { sigma: CovMatrix::identity(3), last_x: x };
            let out = bmdc_step(&state, &theta).unwrap();
            let m = out.matrix();
            for i in 0..3 {
                for j in 0..3 {
                    assert_eq!(m[(i, j)], m[(j, i)]);
                }
            }
            assert!(crate::mvstat::cholesky(&out).is_ok());
        }
    }

    #[test]
    fn diffuse_params_zero_drift_is_identity() {
        let theta = ParamState {
            a: DVector::from_vec(vec![0.5]),
            b: DVector::from_vec(vec![0.3]),
            c: DVector::from_vec(vec![0.2]),
        };
        let h = DriftHypers::new(0.0, 0.0, 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(diffuse_params(&theta, &h, &mut rng), theta);
    }

    #[test]
    fn diffuse_params_moment_check() {
        let theta = ParamState {
            a: DVector::from_vec(vec![0.5]),
            b: DVector::from_vec(vec![0.3]),
            c: DVector::from_vec(vec![0.2]),
        };
        let h = DriftHypers::new(0.01, 0.0, 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let n = 100_000;
        let mut sum = 0.0;
        let mut sumsq = 0.0;
        for _ in 0..n {
            let dlt = diffuse_params(&theta, &h, &mut rng).a[0] - theta.a[0];
            sum += dlt;
            sumsq += dlt * dlt;
        }
        let mean = sum / n as f64;
        let std = (sumsq / n as f64 - mean * mean).sqrt();
        assert!(std > 0.0097 && std < 0.0103, "std {std}");
        // symmetric displacement: mean within 3 MC standard errors of zero
        let se = std / (n as f64).sqrt();
        assert!(mean.abs() < 3.0 * se, "mean {mean} se {se}");
    }

    #[test]
    fn diffuse_params_deterministic_given_seed() {
        let theta = ParamState {
            a: DVector::from_vec(vec![0.5, 0.2]),
            b: DVector::from_vec(vec![0.3, 0.1]),
            c: DVector::from_vec(vec![0.2, 0.0, 0.2]),
        };
        let h = DriftHypers::new(0.01, 0.02, 0.005);
        let a = diffuse_params(&theta, &h, &mut ChaCha8Rng::seed_from_u64(9));
        let b = diffuse_params(&theta, &h, &mut ChaCha8Rng::seed_from_u64(9));
        assert_eq!(a, b);
    }

    #[test]
    fn stationarity_check_hand_values() {
        let z = DVector::zeros(2);
        assert!(stationarity_check(&z, &z));

        let a = DVector::from_vec(vec![0.9]);
        let b = DVector::from_vec(vec![0.5]);
        assert!(!stationarity_check(&a, &b)); // 0.81 + 0.25 > 1

        let a = DVector::from_vec(vec![0.9, 0.9]);
        let b = DVector::from_vec(vec![0.3, 0.3]);
        assert!(stationarity_check(&a, &b)); // dets 0.6561 + 0.0081, elementwise 0.90
    }

    #[test]
    fn sample_initial_params_feasible_and_reproducible() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..200 {
            let th = sample_initial_params(2, &mut rng).unwrap();
            assert!(th.is_stationary());
        }
        // d = 1: (a^2, b^2) lies in the unit simplex
        for _ in 0..200 {
            let th = sample_initial_params(1, &mut rng).unwrap();
            assert!(th.a[0] * th.a[0] + th.b[0] * th.b[0] <= 1.0);
        }
        let a = sample_initial_params(3, &mut ChaCha8Rng::seed_from_u64(6)).unwrap();
        let b = sample_initial_params(3, &mut ChaCha8Rng::seed_from_u64(6)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn simulate_iid_case_moment_check() {
        // a = b = 0, C = I -> i.i.d. standard normal
        let d = 2;
        let p = BekkParams::diagonal(
            DVector::zeros(d),
            DVector::zeros(d),
            DVector::from_vec(vec![1.0, 0.0, 1.0]),
            None,
        );
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let (xs, _) = simulate(SimModel::Bekk(&p), 100_000, &CovMatrix::identity(d), &mut rng)
            .unwrap();
        let mut acc = DMatrix::zeros(d, d);
        for t in 0..xs.len() {
            let x = xs.row(t);
            acc.ger(1.0 / xs.len() as f64, &x, &x, 1.0);
        }
        for i in 0..d {
            for j in 0..d {
                let target = if i == j { 1.0 } else { 0.0 };
                assert!((acc[(i, j)] - target).abs() < 0.02, "({i},{j}) {}", acc[(i, j)]);
            }
        }
    }

    #[test]
    fn simulate_replay_reproduces_sigma_path() {
        let p = BekkParams::diagonal(
            DVector::from_vec(vec![0.9, 0.8]),
            DVector::from_vec(vec![0.3, 0.4]),
            DVector::from_vec(vec![0.3, 0.1, 0.3]),
            None,
        );
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        let sigma0 = CovMatrix::identity(2);
        let (xs, sigmas) = simulate(SimModel::Bekk(&p), 200, &sigma0, &mut rng).unwrap();
        let mut sigma = sigma0;
        for t in 1..xs.len() {
            let state = CovRecursionState { sigma, last_x: xs.row(t - 1) };
            sigma = bekk_step(&state, &p).unwrap();
            assert_eq!(sigma.matrix(), sigmas[t].matrix());
        }
    }

    #[test]
    fn simulate_student_t_has_excess_kurtosis() {
        let p = BekkParams::diagonal(
            DVector::zeros(1),
            DVector::zeros(1),
            DVector::from_vec(vec![1.0]),
            Some(5.0),
        );
        let mut rng = ChaCha8Rng::seed_from_u64(55);
        let (xs, _) = simulate(SimModel::Bekk(&p), 100_000, &CovMatrix::identity(1), &mut rng)
            .unwrap();
        let n = xs.len() as f64;
        let mean: f64 = (0..xs.len()).map(|t| xs.row(t)[0]).sum::<f64>() / n;
        let m2: f64 = (0..xs.len()).map(|t| (xs.row(t)[0] - mean).powi(2)).sum::<f64>() / n;
        let m4: f64 = (0..xs.len()).map(|t| (xs.row(t)[0] - mean).powi(4)).sum::<f64>() / n;
        assert!(m4 / (m2 * m2) > 3.5, "kurtosis {}", m4 / (m2 * m2));
    }

    #[test]
    fn simulate_trace_stays_bounded_under_stationary_params() {
        let p = BekkParams::diagonal(
            DVector::from_vec(vec![0.9, 0.9]),
            DVector::from_vec(vec![0.35, 0.35]),
            DVector::from_vec(vec![0.3, 0.05, 0.3]),
            None,
        );
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let (_, sigmas) =
            simulate(SimModel::Bekk(&p), 10_000, &CovMatrix::identity(2), &mut rng).unwrap();
        let mut traces: Vec<f64> = sigmas.iter().map(|s| s.matrix().trace()).collect();
        traces.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let median = traces[traces.len() / 2];
        let max = traces[traces.len() - 1];
        assert!(max <= 100.0 * median, "max {max} median {median}");
    }

    #[test]
    fn initial_sigma_iid_prefix() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let rows: Vec<DVector<f64>> = (0..10_000)
            .map(|_| DVector::from_fn(2, |_, _| rng.sample::<f64, _>(StandardNormal)))
            .collect();
        let series = ReturnSeries::from_rows(&rows).unwrap();
        let s = initial_sigma(&series).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                let target = if i == j { 1.0 } else { 0.0 };
                assert!((s.matrix()[(i, j)] - target).abs() < 0.05);
            }
        }
    }

    #[test]
    fn initial_sigma_hand_variance_and_degenerate() {
        let rows = vec![DVector::from_vec(vec![1.0]), DVector::from_vec(vec![-1.0])];
        let series = ReturnSeries::from_rows(&rows).unwrap();
        // population convention, divisor n
        assert_abs_diff_eq!(initial_sigma(&series).unwrap().matrix()[(0, 0)], 1.0, epsilon = 1e-14);

        // constant column alongside a live one: jitter repair keeps it factorizable
        let rows: Vec<DVector<f64>> =
            (0..10).map(|t| DVector::from_vec(vec![2.0, (t as f64).sin()])).collect();
        let series = ReturnSeries::from_rows(&rows).unwrap();
        let s = initial_sigma(&series).unwrap();
        assert!(crate::mvstat::cholesky(&s).is_ok());

        // too-short prefix errors
        let rows = vec![DVector::from_vec(vec![1.0, 2.0])];
        let series = ReturnSeries::from_rows(&rows).unwrap();
        assert!(matches!(
            initial_sigma(&series),
            Err(Error::TooFewObservations { .. })
        ));
    }
}

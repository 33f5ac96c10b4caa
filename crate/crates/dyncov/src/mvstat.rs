//! Dense SPD linear algebra and multivariate density/sampling kernels.
//!
//! Everything here is pure given an explicit random stream, and all densities
//! are computed and accumulated in log space.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};

const SYMMETRY_RTOL: f64 = 1e-12;

/// A symmetric positive-definite covariance matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CovMatrix {
    m: DMatrix<f64>,
}

impl CovMatrix {
    /// Validates symmetry (1e-12 relative tolerance) and positive
    /// definiteness (Cholesky with the jitter-retry policy).
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        if m.nrows() != m.ncols() || m.nrows() == 0 {
            return Err(Error::DimensionMismatch { expected: m.nrows(), actual: m.ncols() });
        }
        let scale = m.amax().max(1.0);
        for i in 0..m.nrows() {
            for j in (i + 1)..m.ncols() {
                if (m[(i, j)] - m[(j, i)]).abs() > SYMMETRY_RTOL * scale {
                    return Err(Error::InvalidParams(format!(
                        "matrix not symmetric at ({i},{j})"
                    )));
                }
            }
        }
        let cov = CovMatrix { m };
        cholesky_jittered(&cov.m)?;
        Ok(cov)
    }

    /// Wraps a matrix known to be symmetric by construction (e.g. the output
    /// of a covariance recursion). Positive definiteness is still enforced at
    /// the first Cholesky-backed operation.
    pub(crate) fn from_symmetric_unchecked(m: DMatrix<f64>) -> Self {
        CovMatrix { m }
    }

    /// Wraps a symmetric matrix, applying the jitter-repair policy once so the
    /// stored matrix itself factorizes.
    pub fn repaired(mut m: DMatrix<f64>) -> Result<Self> {
        let d = m.nrows();
        if nalgebra::Cholesky::new(m.clone()).is_none() {
            let jitter = 1e-10 * m.trace() / d as f64;
            for i in 0..d {
                m[(i, i)] += jitter;
            }
            if nalgebra::Cholesky::new(m.clone()).is_none() {
                return Err(Error::NotPositiveDefinite);
            }
        }
        Ok(CovMatrix { m })
    }

    pub fn identity(d: usize) -> Self {
        CovMatrix { m: DMatrix::identity(d, d) }
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.m
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.m
    }
}

/// Cholesky with the jitter-retry policy: if factorization fails, add
/// `1e-10 * trace(S)/d` to the diagonal once and retry; a second failure is
/// `NotPositiveDefinite`.
fn cholesky_jittered(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if let Some(c) = nalgebra::Cholesky::new(m.clone()) {
        return Ok(c.unpack());
    }
    let d = m.nrows();
    let jitter = 1e-10 * m.trace() / d as f64;
    if !(jitter > 0.0) {
        return Err(Error::NotPositiveDefinite);
    }
    let mut m2 = m.clone();
    for i in 0..d {
        m2[(i, i)] += jitter;
    }
    nalgebra::Cholesky::new(m2)
        .map(|c| c.unpack())
        .ok_or(Error::NotPositiveDefinite)
}

/// Lower-triangular factor L with L * L^T = S.
pub fn cholesky(s: &CovMatrix) -> Result<DMatrix<f64>> {
    cholesky_jittered(s.matrix())
}

/// log |S| computed as 2 * sum(log L_ii).
pub fn log_det_spd(s: &CovMatrix) -> Result<f64> {
    let l = cholesky(s)?;
    Ok(2.0 * (0..l.nrows()).map(|i| l[(i, i)].ln()).sum::<f64>())
}

fn check_dim(x: &DVector<f64>, s: &CovMatrix) -> Result<()> {
    if x.len() != s.dim() {
        return Err(Error::DimensionMismatch { expected: s.dim(), actual: x.len() });
    }
    Ok(())
}

/// Quadratic form x^T S^{-1} x and log|S| via one Cholesky factorization.
fn quad_and_logdet(x: &DVector<f64>, s: &CovMatrix) -> Result<(f64, f64)> {
    let l = cholesky(s)?;
    let mut log_det = 0.0;
    for i in 0..l.nrows() {
        log_det += 2.0 * l[(i, i)].ln();
    }
    // forward solve L z = x
    let z = l
        .solve_lower_triangular(x)
        .ok_or(Error::NotPositiveDefinite)?;
    Ok((z.dot(&z), log_det))
}

pub const LN_2PI: f64 = 1.8378770664093453;

/// Zero-mean multivariate normal log density.
pub fn mvn_logpdf(x: &DVector<f64>, s: &CovMatrix) -> Result<f64> {
    check_dim(x, s)?;
    let (quad, log_det) = quad_and_logdet(x, s)?;
    let d = s.dim() as f64;
    Ok(-0.5 * (d * LN_2PI + log_det + quad))
}

/// Zero-mean multivariate Student-t log density with scale matrix `s` and
/// `nu` degrees of freedom.
pub fn mvt_logpdf(x: &DVector<f64>, nu: f64, s: &CovMatrix) -> Result<f64> {
    if !(nu > 2.0) {
        return Err(Error::InvalidDof(nu));
    }
    check_dim(x, s)?;
    let (quad, log_det) = quad_and_logdet(x, s)?;
    let d = s.dim() as f64;
    Ok(ln_gamma((nu + d) / 2.0)
        - ln_gamma(nu / 2.0)
        - 0.5 * d * (nu * std::f64::consts::PI).ln()
        - 0.5 * log_det
        - 0.5 * (nu + d) * (1.0 + quad / nu).ln())
}

/// Scale matrix S = ((nu-2)/nu) * Sigma, so that a Student-t with scale S has
/// covariance Sigma.
pub fn scale_from_cov(nu: f64, sigma: &CovMatrix) -> Result<CovMatrix> {
    if !(nu > 2.0) {
        return Err(Error::InvalidDof(nu));
    }
    Ok(CovMatrix::from_symmetric_unchecked(sigma.matrix() * ((nu - 2.0) / nu)))
}

fn is_diagonal(m: &DMatrix<f64>) -> bool {
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            if i != j && m[(i, j)] != 0.0 {
                return false;
            }
        }
    }
    true
}

/// Draw from N(mean, cov). A zero covariance returns the mean exactly; a
/// diagonal covariance with nonnegative entries is sampled coordinate-wise,
/// so zero-variance coordinates stay deterministic.
pub fn sample_mvn<R: Rng>(
    mean: &DVector<f64>,
    cov: &DMatrix<f64>,
    rng: &mut R,
) -> Result<DVector<f64>> {
    if cov.nrows() != mean.len() || cov.ncols() != mean.len() {
        return Err(Error::DimensionMismatch { expected: mean.len(), actual: cov.nrows() });
    }
    if is_diagonal(cov) {
        let mut out = mean.clone();
        for i in 0..mean.len() {
            let v = cov[(i, i)];
            if v < 0.0 {
                return Err(Error::NotPositiveDefinite);
            }
            if v > 0.0 {
                let z: f64 = rng.sample(StandardNormal);
                out[i] += v.sqrt() * z;
            }
        }
        return Ok(out);
    }
    let l = cholesky_jittered(cov)?;
    let z = DVector::from_fn(mean.len(), |_, _| rng.sample::<f64, _>(StandardNormal));
    Ok(mean + l * z)
}

/// Draw from a zero-mean multivariate Student-t with scale matrix `scale`:
/// a Gaussian draw divided by sqrt(chi^2_nu / nu).
pub fn sample_mvt<R: Rng>(
    nu: f64,
    scale: &DMatrix<f64>,
    rng: &mut R,
) -> Result<DVector<f64>> {
    if !(nu > 2.0) {
        return Err(Error::InvalidDof(nu));
    }
    let zero = DVector::zeros(scale.nrows());
    let g = sample_mvn(&zero, scale, rng)?;
    let chi2 = ChiSquared::new(nu).map_err(|e| Error::InvalidParams(e.to_string()))?;
    let w: f64 = chi2.sample(rng);
    Ok(g / (w / nu).sqrt())
}

/// A weighted set of k-dimensional points with normalized weights.
#[derive(Debug, Clone)]
pub struct WeightedPoints {
    points: Vec<DVector<f64>>,
    weights: Vec<f64>,
}

impl WeightedPoints {
    pub fn new(points: Vec<DVector<f64>>, weights: Vec<f64>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::EmptyCloud);
        }
        if points.len() != weights.len() {
            return Err(Error::DimensionMismatch {
                expected: points.len(),
                actual: weights.len(),
            });
        }
        let k = points[0].len();
        for p in &points {
            if p.len() != k {
                return Err(Error::DimensionMismatch { expected: k, actual: p.len() });
            }
        }
        let sum: f64 = weights.iter().sum();
        if !sum.is_finite()
            || (sum - 1.0).abs() > 1e-12 * weights.len() as f64
            || weights.iter().any(|w| *w < 0.0)
            || !weights.iter().any(|w| *w > 0.0)
        {
            return Err(Error::DegenerateWeights);
        }
        Ok(WeightedPoints { points, weights })
    }

    pub fn points(&self) -> &[DVector<f64>] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
}

/// Weighted mean and weighted covariance (symmetric PSD) of a point set.
pub fn weighted_mean_and_cov(pts: &WeightedPoints) -> (DVector<f64>, DMatrix<f64>) {
    let k = pts.points[0].len();
    let mut mean = DVector::zeros(k);
    for (p, w) in pts.points.iter().zip(&pts.weights) {
        mean += p * *w;
    }
    let mut cov = DMatrix::zeros(k, k);
    for (p, w) in pts.points.iter().zip(&pts.weights) {
        let dlt = p - &mean;
        cov.ger(*w, &dlt, &dlt, 1.0);
    }
    // exact symmetry regardless of accumulation order
    let cov = (&cov + cov.transpose()) * 0.5;
    (mean, cov)
}

/// Systematic resampling: n ancestor indices from one uniform offset.
/// Counts of index i deviate from n*w_i by less than 1.
pub fn systematic_resample<R: Rng>(weights: &[f64], rng: &mut R) -> Result<Vec<usize>> {
    let n = weights.len();
    let sum: f64 = weights.iter().sum();
    if n == 0 || !sum.is_finite() || sum <= 0.0 || weights.iter().any(|w| !w.is_finite() || *w < 0.0)
    {
        return Err(Error::DegenerateWeights);
    }
    let u0: f64 = rng.random::<f64>() / n as f64;
    let mut indices = Vec::with_capacity(n);
    let mut cum = weights[0] / sum;
    let mut j = 0usize;
    for i in 0..n {
        let u = u0 + i as f64 / n as f64;
        while u > cum && j + 1 < n {
            j += 1;
            cum += weights[j] / sum;
        }
        indices.push(j);
    }
    Ok(indices)
}

/// log(sum(exp(xs))) with the usual max shift; -inf for an empty or all-(-inf) input.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return f64::NEG_INFINITY;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn cov(entries: &[f64], d: usize) -> CovMatrix {
        CovMatrix::new(DMatrix::from_row_slice(d, d, entries)).unwrap()
    }

    #[test]
    fn cholesky_identity() {
        let l = cholesky(&CovMatrix::identity(3)).unwrap();
        assert_relative_eq!(l, DMatrix::identity(3, 3), epsilon = 1e-14);
    }

    #[test]
    fn cholesky_hand_2x2() {
        let l = cholesky(&cov(&[4.0, 2.0, 2.0, 3.0], 2)).unwrap();
        let expected = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 1.0, 2f64.sqrt()]);
        assert_relative_eq!(l, expected, epsilon = 1e-12);
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(matches!(CovMatrix::new(m), Err(Error::NotPositiveDefinite)));
    }

    #[test]
    fn log_det_identity_and_diag() {
        assert_abs_diff_eq!(log_det_spd(&CovMatrix::identity(5)).unwrap(), 0.0, epsilon = 1e-14);
        let s = cov(&[2.0, 0.0, 0.0, 3.0], 2);
        assert_abs_diff_eq!(log_det_spd(&s).unwrap(), 6f64.ln(), epsilon = 1e-12);
    }

    #[test]
    fn log_det_hand_2x2() {
        // det([[4,2],[2,3]]) = 8
        let s = cov(&[4.0, 2.0, 2.0, 3.0], 2);
        assert_abs_diff_eq!(log_det_spd(&s).unwrap(), 8f64.ln(), epsilon = 1e-12);
    }

    #[test]
    fn mvn_logpdf_at_zero() {
        let x = DVector::zeros(2);
        let v = mvn_logpdf(&x, &CovMatrix::identity(2)).unwrap();
        assert_abs_diff_eq!(v, -LN_2PI, epsilon = 1e-12);
    }

    #[test]
    fn mvn_logpdf_univariate() {
        let x = DVector::from_vec(vec![1.0]);
        let v = mvn_logpdf(&x, &CovMatrix::identity(1)).unwrap();
        assert_abs_diff_eq!(v, -0.5 * LN_2PI - 0.5, epsilon = 1e-12);
    }

    #[test]
    fn mvn_logpdf_matches_explicit_2x2_inverse() {
        // brute-force oracle: explicit inverse of [[4,2],[2,3]]
        let s = cov(&[4.0, 2.0, 2.0, 3.0], 2);
        let x = DVector::from_vec(vec![1.0, 1.0]);
        let det: f64 = 8.0;
        let inv = DMatrix::from_row_slice(2, 2, &[3.0, -2.0, -2.0, 4.0]) / det;
        let quad = (x.transpose() * &inv * &x)[(0, 0)];
        let oracle = -0.5 * (2.0 * LN_2PI + det.ln() + quad);
        assert_abs_diff_eq!(mvn_logpdf(&x, &s).unwrap(), oracle, epsilon = 1e-12);
    }

    #[test]
    fn mvt_logpdf_univariate_at_zero() {
        // closed form: Gamma(2) / (Gamma(1.5) sqrt(3 pi))
        let x = DVector::zeros(1);
        let v = mvt_logpdf(&x, 3.0, &CovMatrix::identity(1)).unwrap();
        let oracle = (ln_gamma(2.0) - ln_gamma(1.5)) - 0.5 * (3.0 * std::f64::consts::PI).ln();
        assert_abs_diff_eq!(v, oracle, epsilon = 1e-12);
        assert_abs_diff_eq!(v, -1.0009, epsilon = 1e-4);
    }

    #[test]
    fn mvt_logpdf_gaussian_limit() {
        let x = DVector::from_vec(vec![2.0]);
        let t = mvt_logpdf(&x, 1e6, &CovMatrix::identity(1)).unwrap();
        let g = mvn_logpdf(&x, &CovMatrix::identity(1)).unwrap();
        assert_abs_diff_eq!(t, g, epsilon = 1e-3);
    }

    #[test]
    fn mvt_logpdf_matches_direct_formula() {
        let s = CovMatrix::identity(2);
        let x = DVector::from_vec(vec![1.0, 1.0]);
        let nu = 5.0;
        let quad = 2.0; // x^T I x
        let oracle = ln_gamma((nu + 2.0) / 2.0)
            - ln_gamma(nu / 2.0)
            - (nu * std::f64::consts::PI).ln()
            - 0.5 * (nu + 2.0) * (1.0 + quad / nu).ln();
        assert_abs_diff_eq!(mvt_logpdf(&x, nu, &s).unwrap(), oracle, epsilon = 1e-12);
    }

    #[test]
    fn mvt_rejects_low_dof() {
        let x = DVector::zeros(1);
        assert!(matches!(
            mvt_logpdf(&x, 2.0, &CovMatrix::identity(1)),
            Err(Error::InvalidDof(_))
        ));
    }

    #[test]
    fn scale_from_cov_hand_values() {
        let s = scale_from_cov(4.0, &cov(&[2.0, 0.0, 0.0, 2.0], 2)).unwrap();
        assert_relative_eq!(s.matrix(), &DMatrix::identity(2, 2), epsilon = 1e-14);
        let s1 = scale_from_cov(3.0, &cov(&[3.0], 1)).unwrap();
        assert_abs_diff_eq!(s1.matrix()[(0, 0)], 1.0, epsilon = 1e-14);
        // ratio -> 1 for large nu
        let s2 = scale_from_cov(1e12, &cov(&[3.0], 1)).unwrap();
        assert_abs_diff_eq!(s2.matrix()[(0, 0)], 3.0, epsilon = 1e-9);
    }

    #[test]
    fn sample_mvn_degenerate_and_deterministic() {
        let mean = DVector::from_vec(vec![1.0, -2.0]);
        let zero = DMatrix::zeros(2, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        assert_eq!(sample_mvn(&mean, &zero, &mut rng).unwrap(), mean);

        let cov = DMatrix::from_row_slice(2, 2, &[1.0, 0.3, 0.3, 2.0]);
        let a = sample_mvn(&mean, &cov, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        let b = sample_mvn(&mean, &cov, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn sample_mvn_moment_check() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mean = DVector::zeros(2);
        let cov = DMatrix::identity(2, 2);
        let n = 100_000;
        let mut acc = DMatrix::zeros(2, 2);
        for _ in 0..n {
            let x = sample_mvn(&mean, &cov, &mut rng).unwrap();
            acc.ger(1.0 / n as f64, &x, &x, 1.0);
        }
        for i in 0..2 {
            for j in 0..=i {
                let target = if i == j { 1.0 } else { 0.0 };
                assert!((acc[(j, i)] - target).abs() < 0.05);
            }
        }
    }

    #[test]
    fn weighted_mean_and_cov_trivial_cases() {
        let p = DVector::from_vec(vec![2.0, 3.0]);
        let wp = WeightedPoints::new(vec![p.clone()], vec![1.0]).unwrap();
        let (m, v) = weighted_mean_and_cov(&wp);
        assert_eq!(m, p);
        assert_eq!(v, DMatrix::zeros(2, 2));

        let pts = vec![DVector::from_vec(vec![-1.0]), DVector::from_vec(vec![1.0])];
        let wp = WeightedPoints::new(pts, vec![0.5, 0.5]).unwrap();
        let (m, v) = weighted_mean_and_cov(&wp);
        assert_abs_diff_eq!(m[0], 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(v[(0, 0)], 1.0, epsilon = 1e-15);
    }

    #[test]
    fn weighted_mean_and_cov_matches_unweighted_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 100;
        let k = 3;
        let pts: Vec<DVector<f64>> = (0..n)
            .map(|_| DVector::from_fn(k, |_, _| rng.sample::<f64, _>(StandardNormal)))
            .collect();
        let w = vec![1.0 / n as f64; n];
        let (m, v) = weighted_mean_and_cov(&WeightedPoints::new(pts.clone(), w).unwrap());

        // plain mean/covariance oracle, divisor n
        let mut om = DVector::zeros(k);
        for p in &pts {
            om += p / n as f64;
        }
        let mut ov = DMatrix::zeros(k, k);
        for p in &pts {
            let d = p - &om;
            ov += &d * d.transpose() / n as f64;
        }
        assert_relative_eq!(m, om, epsilon = 1e-12);
        assert_relative_eq!(v, ov, epsilon = 1e-12);
    }

    #[test]
    fn systematic_resample_point_mass_and_uniform() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let idx = systematic_resample(&[1.0, 0.0, 0.0], &mut rng).unwrap();
        assert_eq!(idx, vec![0, 0, 0]);

        let idx = systematic_resample(&[0.25; 4], &mut rng).unwrap();
        assert_eq!(idx, vec![0, 1, 2, 3]);
    }

    #[test]
    fn systematic_resample_count_bound() {
        for seed in 0..50 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let idx = systematic_resample(&[0.75, 0.25, 0.0, 0.0], &mut rng).unwrap();
            let c0 = idx.iter().filter(|&&i| i == 0).count();
            let c1 = idx.iter().filter(|&&i| i == 1).count();
            assert_eq!(c0, 3);
            assert_eq!(c1, 1);
        }
    }

    #[test]
    fn systematic_resample_rejects_degenerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(matches!(
            systematic_resample(&[0.0, 0.0], &mut rng),
            Err(Error::DegenerateWeights)
        ));
        assert!(matches!(
            systematic_resample(&[f64::NAN, 1.0], &mut rng),
            Err(Error::DegenerateWeights)
        ));
    }

    #[test]
    fn systematic_resample_preserves_weighted_mean() {
        // weighted mean of a particle statistic is preserved in expectation
        let weights = [0.5, 0.2, 0.2, 0.05, 0.05];
        let stat = [1.0, -2.0, 3.0, 10.0, -7.0];
        let target: f64 = weights.iter().zip(&stat).map(|(w, s)| w * s).sum();
        let reps = 10_000;
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let mut means = Vec::with_capacity(reps);
        for _ in 0..reps {
            let idx = systematic_resample(&weights, &mut rng).unwrap();
            let m: f64 = idx.iter().map(|&i| stat[i]).sum::<f64>() / weights.len() as f64;
            means.push(m);
        }
        let grand: f64 = means.iter().sum::<f64>() / reps as f64;
        let var: f64 =
            means.iter().map(|m| (m - grand).powi(2)).sum::<f64>() / (reps as f64 - 1.0);
        let se = (var / reps as f64).sqrt();
        assert!((grand - target).abs() < 3.0 * se.max(1e-12), "bias {} se {}", grand - target, se);
    }

    #[test]
    fn mvn_density_integrates_to_one() {
        // trapezoid quadrature over [-8, 8], d = 1, arbitrary variance
        let s = cov(&[1.7], 1);
        let n = 20_000;
        let (a, b) = (-8.0, 8.0);
        let h = (b - a) / n as f64;
        let mut total = 0.0;
        for i in 0..=n {
            let x = DVector::from_vec(vec![a + i as f64 * h]);
            let f = mvn_logpdf(&x, &s).unwrap().exp();
            let w = if i == 0 || i == n { 0.5 } else { 1.0 };
            total += w * f * h;
        }
        assert_abs_diff_eq!(total, 1.0, epsilon = 1e-6);
    }

    #[test]
    fn mvt_gaussian_limit_on_grid() {
        for d in 1..=3usize {
            let s = CovMatrix::identity(d);
            for g in -5..=5 {
                let mut x = DVector::zeros(d);
                x[0] = g as f64;
                let t = mvt_logpdf(&x, 1e6, &s).unwrap();
                let n = mvn_logpdf(&x, &s).unwrap();
                assert!((t - n).abs() < 1e-3, "d={d} g={g}: {t} vs {n}");
            }
        }
    }

    #[test]
    fn student_t_scale_covariance_contract() {
        // Eq-(8)-style contract: draws at scale (nu-2)/nu * Sigma have covariance Sigma
        let nu = 8.0;
        let sigma = cov(&[2.0, 0.5, 0.5, 1.0], 2);
        let scale = scale_from_cov(nu, &sigma).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let n = 100_000;
        let mut acc = DMatrix::zeros(2, 2);
        for _ in 0..n {
            let x = sample_mvt(nu, scale.matrix(), &mut rng).unwrap();
            acc.ger(1.0 / n as f64, &x, &x, 1.0);
        }
        for i in 0..2 {
            for j in 0..=i {
                let target = sigma.matrix()[(j, i)];
                assert!(
                    (acc[(j, i)] - target).abs() < 0.05 * target.abs().max(1.0),
                    "({j},{i}): {} vs {}",
                    acc[(j, i)],
                    target
                );
            }
        }
    }

    proptest! {
        #[test]
        fn cholesky_reconstructs_random_spd(d in 1usize..=10, seed in 0u64..1000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = DMatrix::from_fn(d, d, |_, _| rng.sample::<f64, _>(StandardNormal));
            let spd = &a * a.transpose() + DMatrix::<f64>::identity(d, d) * 0.5;
            let s = CovMatrix::new((spd.clone() + spd.transpose()) * 0.5).unwrap();
            let l = cholesky(&s).unwrap();
            let rec = &l * l.transpose();
            let err = (&rec - s.matrix()).norm() / s.matrix().norm();
            prop_assert!(err < 1e-10);
        }
    }
}

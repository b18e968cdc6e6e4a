//! Extended multivariate t-distribution `EMTD(ν, ω, μ, Σ)`.
//!
//! Density
//!
//! ```text
//! p(z) = |2πωΣ|^{-1/2} Γ(n/2+ν)/Γ(ν) (1 + (z−μ)ᵀΣ⁻¹(z−μ)/(2ω))^{−(n/2+ν)}
//! ```
//!
//! It is the marginal law of `Z | r ~ N(μ, rΣ)`, `r ~ IG(ν, ω)`, and is closed
//! under affine maps, marginalization and conditioning. Every quadratic form
//! here goes through a Cholesky factor of `Σ` (or of a principal block).

use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{Cholesky, Matrix};
use crate::scalar::{ln_gamma, ln_gamma_ratio, Real};

#[derive(Clone, Debug, PartialEq)]
pub struct EmtdParams<T> {
    pub nu: T,
    pub omega: T,
    pub mu: Vec<T>,
    pub sigma: Matrix<T>,
}

/// Inverse-gamma law with density `Γ(a)⁻¹ (b/r)^{a+1} b⁻¹ exp(−b/r)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct InverseGammaParams<T> {
    pub shape: T,
    pub scale: T,
}

/// Posterior of the latent scale `r` given an observation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PosteriorR<T> {
    pub law: InverseGammaParams<T>,
    /// `E(r | z)`, defined when `shape > 1`.
    pub mean: Option<T>,
    /// `Var(r | z)`, defined when `shape > 2`.
    pub variance: Option<T>,
}

impl<T: Real> EmtdParams<T> {
    pub fn new(nu: T, omega: T, mu: Vec<T>, sigma: Matrix<T>) -> Result<Self> {
        if !(nu > T::zero()) || !(omega > T::zero()) {
            return Err(Error::InvalidParameter(format!("nu and omega must be positive (nu={nu}, omega={omega})")));
        }
        if !sigma.is_square() || sigma.rows() != mu.len() {
            return Err(Error::DimensionMismatch { expected: mu.len(), found: sigma.rows() });
        }
        Ok(Self { nu, omega, mu, sigma })
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.mu.len()
    }

    pub fn has_mean(&self) -> bool {
        self.nu > T::lit(0.5)
    }

    pub fn has_covariance(&self) -> bool {
        self.nu > T::one()
    }

    pub fn mean(&self) -> Option<&[T]> {
        self.has_mean().then_some(self.mu.as_slice())
    }

    /// `ωΣ/(ν−1)` when it exists.
    pub fn covariance(&self) -> Option<Matrix<T>> {
        self.has_covariance().then(|| self.sigma.scale(self.omega / (self.nu - T::one())))
    }

    pub fn factor(&self) -> Result<Cholesky<T>> {
        Cholesky::new(&self.sigma)
    }

    fn residual(&self, z: &[T]) -> Result<Vec<T>> {
        if z.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: z.len() });
        }
        Ok(z.iter().zip(&self.mu).map(|(&a, &b)| a - b).collect())
    }
}

/// Log-density from a precomputed factor of `Σ`.
pub(crate) fn log_density_factored<T: Real>(nu: T, omega: T, chol: &Cholesky<T>, resid: &[T]) -> T {
    let n = T::from_usize_lossy(resid.len());
    let half = T::lit(0.5);
    let two = T::lit(2.0);
    let quad = chol.quad_form_inv(resid);
    let log_norm = -half * (n * (T::TAU() * omega).ln() + chol.log_det());
    let a = half * n;
    log_norm + ln_gamma_ratio(a, nu) - (a + nu) * (quad / (two * omega)).ln_1p()
}

pub fn log_density<T: Real>(z: &[T], params: &EmtdParams<T>) -> Result<T> {
    let resid = params.residual(z)?;
    let chol = params.factor()?;
    Ok(log_density_factored(params.nu, params.omega, &chol, &resid))
}

/// `AZ ~ EMTD(ν, ω, Aμ, AΣAᵀ)` for `A` of full row rank.
pub fn affine<T: Real>(params: &EmtdParams<T>, a: &Matrix<T>) -> Result<EmtdParams<T>> {
    if a.cols() != params.dim() {
        return Err(Error::DimensionMismatch { expected: params.dim(), found: a.cols() });
    }
    if a.rows() > a.cols() || !full_row_rank(a) {
        return Err(Error::RankDeficient);
    }
    let mu = a.matvec(&params.mu);
    let sigma = a.matmul(&params.sigma).matmul(&a.transpose()).symmetrize();
    EmtdParams::new(params.nu, params.omega, mu, sigma)
}

fn full_row_rank<T: Real>(a: &Matrix<T>) -> bool {
    let gram = a.matmul(&a.transpose());
    let max_diag = (0..gram.rows()).map(|i| gram[(i, i)]).fold(T::zero(), T::max);
    if max_diag <= T::zero() {
        return false;
    }
    match Cholesky::new(&gram) {
        Ok(c) => {
            let tol = max_diag * T::eps() * T::lit(1e3) * T::from_usize_lossy(gram.rows());
            (0..gram.rows()).all(|i| c.factor()[(i, i)] * c.factor()[(i, i)] > tol)
        }
        Err(_) => false,
    }
}

/// Marginal of the coordinates in `idx` (in the given order).
pub fn marginal<T: Real>(params: &EmtdParams<T>, idx: &[usize]) -> Result<EmtdParams<T>> {
    check_indices(idx, params.dim())?;
    let mu = idx.iter().map(|&i| params.mu[i]).collect();
    EmtdParams::new(params.nu, params.omega, mu, params.sigma.select(idx, idx))
}

fn check_indices(idx: &[usize], n: usize) -> Result<()> {
    let mut seen = vec![false; n];
    for &i in idx {
        if i >= n {
            return Err(Error::InvalidIndexSet(format!("index {i} out of range for dimension {n}")));
        }
        if std::mem::replace(&mut seen[i], true) {
            return Err(Error::InvalidIndexSet(format!("index {i} repeated")));
        }
    }
    Ok(())
}

/// Gaussian-style conditioning pieces shared by the EMTD and Gaussian paths.
pub(crate) struct Conditioned<T> {
    /// `Σ₁₂ᵀΣ₁₁⁻¹(z₁−μ₁) + μ₂`.
    pub mu: Vec<T>,
    /// `Σ₂₂·₁ = Σ₂₂ − Σ₁₂ᵀΣ₁₁⁻¹Σ₁₂`.
    pub schur: Matrix<T>,
    /// `(z₁−μ₁)ᵀΣ₁₁⁻¹(z₁−μ₁)`.
    pub quad: T,
}

pub(crate) fn condition_blocks<T: Real>(mu: &[T], sigma: &Matrix<T>, idx1: &[usize], z1: &[T]) -> Result<Conditioned<T>> {
    let n = mu.len();
    check_indices(idx1, n)?;
    if idx1.is_empty() || idx1.len() >= n {
        return Err(Error::InvalidIndexSet("conditioning set must be a nonempty proper subset".into()));
    }
    if z1.len() != idx1.len() {
        return Err(Error::DimensionMismatch { expected: idx1.len(), found: z1.len() });
    }
    let idx2: Vec<usize> = (0..n).filter(|i| !idx1.contains(i)).collect();
    let s11 = sigma.select(idx1, idx1);
    let s12 = sigma.select(idx1, &idx2);
    let s22 = sigma.select(&idx2, &idx2);
    let chol = Cholesky::new(&s11)?;

    let d1: Vec<T> = idx1.iter().zip(z1).map(|(&i, &z)| z - mu[i]).collect();
    let w = chol.solve(&d1);
    let mu2: Vec<T> = idx2
        .iter()
        .enumerate()
        .map(|(c, &j)| (0..idx1.len()).map(|r| s12[(r, c)] * w[r]).sum::<T>() + mu[j])
        .collect();

    // V = L⁻¹Σ12, Σ22·1 = Σ22 − VᵀV
    let n2 = idx2.len();
    let v_cols: Vec<Vec<T>> = (0..n2).map(|c| chol.solve_lower(&s12.column(c))).collect();
    let schur = Matrix::from_fn(n2, n2, |a, b| s22[(a, b)] - crate::linalg::dot(&v_cols[a], &v_cols[b]));
    let quad = chol.quad_form_inv(&d1);
    Ok(Conditioned { mu: mu2, schur, quad })
}

/// Law of `Z₂ | Z₁ = z₁`, where `Z₁` are the coordinates in `idx1` and `Z₂`
/// the remaining coordinates in ascending order.
pub fn conditional<T: Real>(params: &EmtdParams<T>, idx1: &[usize], z1: &[T]) -> Result<EmtdParams<T>> {
    let c = condition_blocks(&params.mu, &params.sigma, idx1, z1)?;
    let two = T::lit(2.0);
    let n1 = T::from_usize_lossy(idx1.len());
    let factor = (two * params.omega + c.quad) / (two * params.omega + n1);
    let half_n1 = n1 * T::lit(0.5);
    EmtdParams::new(params.nu + half_n1, params.omega + half_n1, c.mu, c.schur.scale(factor).symmetrize())
}

/// Posterior of `r` given `Z = z`: `IG(n/2+ν, ω + q/2)` with `q = (z−μ)ᵀΣ⁻¹(z−μ)`.
pub fn posterior_r<T: Real>(params: &EmtdParams<T>, z: &[T]) -> Result<PosteriorR<T>> {
    let resid = params.residual(z)?;
    let chol = params.factor()?;
    let quad = chol.quad_form_inv(&resid);
    Ok(posterior_r_from_quad(params.nu, params.omega, params.dim(), quad))
}

pub(crate) fn posterior_r_from_quad<T: Real>(nu: T, omega: T, n: usize, quad: T) -> PosteriorR<T> {
    let two = T::lit(2.0);
    let half = T::lit(0.5);
    let nf = T::from_usize_lossy(n);
    let shape = half * nf + nu;
    let scale = omega + half * quad;
    let num = two * omega + quad;
    let denom = nf + two * nu - two;
    let mean = (shape > T::one()).then(|| num / denom);
    let variance = (shape > two).then(|| num * num / (denom * denom * (shape - two)));
    PosteriorR { law: InverseGammaParams { shape, scale }, mean, variance }
}

/// Draws from an EMTD through its hierarchical construction, reusing one
/// factorization of `Σ` for every draw.
#[derive(Clone, Debug)]
pub struct EmtdSampler<T> {
    mu: Vec<T>,
    chol: Cholesky<T>,
    gamma: Gamma<f64>,
}

impl<T: Real> EmtdSampler<T> {
    pub fn new(params: &EmtdParams<T>) -> Result<Self> {
        let scale = params.sigma.max_abs();
        let (chol, _) = Cholesky::with_jitter(&params.sigma, T::zero(), 20)
            .map_err(|_| Error::NotPositiveDefinite { pivot: 0, value: scale.to_f64_lossy() })?;
        // 1/r ~ Gamma(shape = ν, rate = ω)
        let gamma = Gamma::new(params.nu.to_f64_lossy(), 1.0 / params.omega.to_f64_lossy())
            .map_err(|e| Error::InvalidParameter(e.to_string()))?;
        Ok(Self { mu: params.mu.clone(), chol, gamma })
    }

    pub fn draw_scale<R: Rng + ?Sized>(&self, rng: &mut R) -> T {
        T::lit(1.0 / self.gamma.sample(rng))
    }

    /// One draw given a fixed latent scale `r`.
    pub fn sample_given_scale<R: Rng + ?Sized>(&self, r: T, rng: &mut R) -> Vec<T> {
        let eps: Vec<T> = (0..self.mu.len()).map(|_| T::lit(StandardNormal.sample(rng))).collect();
        let root_r = r.sqrt();
        self.chol.mul_lower(&eps).into_iter().zip(&self.mu).map(|(e, &m)| m + root_r * e).collect()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<T> {
        let r = self.draw_scale(rng);
        self.sample_given_scale(r, rng)
    }
}

pub fn sample<T: Real, R: Rng + ?Sized>(params: &EmtdParams<T>, rng: &mut R) -> Result<Vec<T>> {
    Ok(EmtdSampler::new(params)?.sample(rng))
}

/// Scalar EMTD log-density; convenience for one-dimensional laws.
pub fn log_density_1d<T: Real>(z: T, nu: T, omega: T, mu: T, var: T) -> T {
    let half = T::lit(0.5);
    let two = T::lit(2.0);
    let d = z - mu;
    let quad = d * d / var;
    -half * (T::TAU() * omega * var).ln() + ln_gamma(half + nu) - ln_gamma(nu) - (half + nu) * (quad / (two * omega)).ln_1p()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn scalar(nu: f64, omega: f64, mu: f64, s: f64) -> EmtdParams<f64> {
        EmtdParams::new(nu, omega, vec![mu], Matrix::from_rows(&[vec![s]]).unwrap()).unwrap()
    }

    fn random_spd(rng: &mut ChaCha8Rng, n: usize) -> Matrix<f64> {
        let a = Matrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
        let mut s = a.matmul(&a.transpose());
        s.add_diagonal(0.5);
        s
    }

    fn random_params(rng: &mut ChaCha8Rng, n: usize) -> EmtdParams<f64> {
        let mu = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
        EmtdParams::new(rng.gen_range(0.3..5.0), rng.gen_range(0.05..3.0), mu, random_spd(rng, n)).unwrap()
    }

    #[test]
    fn standard_cauchy_at_origin() {
        let p = scalar(0.5, 0.5, 0.0, 1.0);
        let v = log_density(&[0.0], &p).unwrap();
        assert!((v - (1.0 / std::f64::consts::PI).ln()).abs() < 1e-13);
    }

    #[test]
    fn gaussian_limit() {
        let p = scalar(1e6, 1e6, 0.0, 1.0);
        let v = log_density(&[1.3], &p).unwrap();
        let g = -0.5 * (2.0 * std::f64::consts::PI).ln() - 0.5 * 1.3 * 1.3;
        assert!((v - g).abs() < 1e-3);
    }

    #[test]
    fn scalar_helper_agrees() {
        let p = scalar(1.05, 0.05, 0.2, 0.15);
        assert!((log_density(&[0.9], &p).unwrap() - log_density_1d(0.9, 1.05, 0.05, 0.2, 0.15)).abs() < 1e-13);
    }

    #[test]
    fn dimension_and_pd_errors() {
        let p = scalar(1.0, 1.0, 0.0, 1.0);
        assert!(log_density(&[0.0, 1.0], &p).is_err());
        let bad = EmtdParams::new(1.0, 1.0, vec![0.0, 0.0], Matrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 1.0]]).unwrap()).unwrap();
        assert!(matches!(log_density(&[0.0, 0.0], &bad), Err(Error::NotPositiveDefinite { .. })));
        assert!(EmtdParams::new(0.0, 1.0, vec![0.0], Matrix::identity(1)).is_err());
    }

    #[test]
    fn capability_flags() {
        let p = scalar(1.05, 0.05, 0.0, 1.0);
        assert!(p.has_mean() && p.has_covariance());
        let q = scalar(0.75, 0.05, 0.0, 1.0);
        assert!(q.has_mean() && !q.has_covariance() && q.covariance().is_none());
        let r = scalar(0.4, 0.05, 0.0, 1.0);
        assert!(r.mean().is_none());
    }

    #[test]
    fn affine_identity_and_selector() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let p = random_params(&mut rng, 3);
        assert_eq!(affine(&p, &Matrix::identity(3)).unwrap(), p);
        let sel = Matrix::from_rows(&[vec![1.0, 0.0, 0.0]]).unwrap();
        let m = affine(&p, &sel).unwrap();
        assert_eq!(m, marginal(&p, &[0]).unwrap());
        let rank1 = Matrix::from_rows(&[vec![1.0, 2.0, 0.0], vec![2.0, 4.0, 0.0]]).unwrap();
        assert_eq!(affine(&p, &rank1), Err(Error::RankDeficient));
    }

    #[test]
    fn conditional_plug_in() {
        // Σ12 = 0 and z1 = μ1 → μ* = μ2, Σ* = 2ω/(2ω+n1) Σ22
        let sigma = Matrix::<f64>::from_rows(&[vec![2.0, 0.0, 0.0], vec![0.0, 1.5, 0.3], vec![0.0, 0.3, 1.0]]).unwrap();
        let p = EmtdParams::new(1.05, 0.05, vec![0.5, -1.0, 2.0], sigma).unwrap();
        let c = conditional(&p, &[0], &[0.5]).unwrap();
        assert_eq!(c.mu, vec![-1.0, 2.0]);
        let f = 0.1 / 1.1;
        assert!((c.sigma[(0, 0)] - 1.5 * f).abs() < 1e-15);
        assert!((c.sigma[(0, 1)] - 0.3 * f).abs() < 1e-15);
        assert!((c.nu - 1.55).abs() < 1e-15 && (c.omega - 0.55).abs() < 1e-15);
    }

    #[test]
    fn conditional_rejects_bad_sets() {
        let p = EmtdParams::new(1.0, 1.0, vec![0.0; 3], Matrix::identity(3)).unwrap();
        assert!(conditional(&p, &[], &[]).is_err());
        assert!(conditional(&p, &[0, 1, 2], &[0.0; 3]).is_err());
        assert!(conditional(&p, &[0, 0], &[0.0; 2]).is_err());
        assert!(conditional(&p, &[5], &[0.0]).is_err());
    }

    #[test]
    fn sequential_consistency() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100 {
            let p = random_params(&mut rng, 3);
            let z: Vec<f64> = (0..3).map(|_| rng.gen_range(-3.0..3.0)).collect();
            let joint = log_density(&z, &p).unwrap();
            let m = log_density(&z[..1], &marginal(&p, &[0]).unwrap()).unwrap();
            let c = log_density(&z[1..], &conditional(&p, &[0], &z[..1]).unwrap()).unwrap();
            assert!((joint - m - c).abs() < 1e-10);
        }
    }

    #[test]
    fn posterior_r_values() {
        let p = EmtdParams::<f64>::new(1.05, 0.05, vec![0.0; 10], Matrix::identity(10)).unwrap();
        let at_mu = posterior_r(&p, &[0.0; 10]).unwrap();
        assert!((at_mu.mean.unwrap() - 0.1 / (10.0 + 2.1 - 2.0)).abs() < 1e-15);
        assert_eq!(at_mu.law.scale, 0.05);
        // quad = 10 → E(r|Z) = 10.1 / 10.1 = 1
        let z = [1.0; 10];
        let post = posterior_r(&p, &z).unwrap();
        assert!((post.mean.unwrap() - 1.0).abs() < 1e-14);
        assert!((post.law.shape - 6.05).abs() < 1e-14);
        assert!(post.law.scale > 0.05);
        // shape ≤ 2 → variance flagged, not thrown
        let small = EmtdParams::new(1.05, 0.05, vec![0.0], Matrix::identity(1)).unwrap();
        let ps = posterior_r(&small, &[0.3]).unwrap();
        assert!(ps.mean.is_some() && ps.variance.is_none());
    }

    #[test]
    fn sampler_is_deterministic() {
        let p = EmtdParams::new(3.0, 2.0, vec![0.0, 1.0], Matrix::identity(2)).unwrap();
        let a = sample(&p, &mut ChaCha8Rng::seed_from_u64(99)).unwrap();
        let b = sample(&p, &mut ChaCha8Rng::seed_from_u64(99)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn sampled_covariance_matches_moment_formula() {
        let p = EmtdParams::new(3.0, 2.0, vec![0.0, 0.0], Matrix::identity(2)).unwrap();
        let s = EmtdSampler::new(&p).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 1_000_000;
        let (mut c00, mut c11, mut c01) = (0.0, 0.0, 0.0);
        for _ in 0..n {
            let z = s.sample(&mut rng);
            c00 += z[0] * z[0];
            c11 += z[1] * z[1];
            c01 += z[0] * z[1];
        }
        let nf = n as f64;
        // target ω/(ν−1) I = I
        assert!((c00 / nf - 1.0).abs() < 0.01, "{}", c00 / nf);
        assert!((c11 / nf - 1.0).abs() < 0.01, "{}", c11 / nf);
        assert!((c01 / nf).abs() < 0.01);
    }

    #[test]
    fn sampled_kurtosis_is_heavy() {
        // ν = 3 → kurtosis 3/(ν−2) + 3 = 6; the eighth moment is infinite so
        // the estimate is noisy and only a loose band is meaningful.
        let p = EmtdParams::new(3.0, 2.0, vec![0.0], Matrix::identity(1)).unwrap();
        let s = EmtdSampler::new(&p).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let n = 1_000_000;
        let (mut m2, mut m4) = (0.0, 0.0);
        for _ in 0..n {
            let z = s.sample(&mut rng)[0];
            m2 += z * z;
            m4 += z * z * z * z;
        }
        let k = (m4 / n as f64) / (m2 / n as f64).powi(2);
        assert!(k > 4.5 && k < 8.0, "kurtosis {k}");
    }

    #[test]
    fn affine_moments_by_monte_carlo() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let base = EmtdParams::new(3.0, 1.4, vec![0.5, -1.0, 0.2], random_spd(&mut rng, 3)).unwrap();
        let a = Matrix::from_fn(2, 3, |_, _| rng.gen_range(-1.0..1.0));
        let t = affine(&base, &a).unwrap();
        let want_cov = t.covariance().unwrap();
        let s = EmtdSampler::new(&base).unwrap();
        let n = 1_000_000;
        let mut mean = [0.0; 2];
        let mut cov = [[0.0; 2]; 2];
        let draws: Vec<Vec<f64>> = (0..n).map(|_| a.matvec(&s.sample(&mut rng))).collect();
        for d in &draws {
            mean[0] += d[0] / n as f64;
            mean[1] += d[1] / n as f64;
        }
        for d in &draws {
            for i in 0..2 {
                for j in 0..2 {
                    cov[i][j] += (d[i] - mean[i]) * (d[j] - mean[j]) / n as f64;
                }
            }
        }
        for i in 0..2 {
            assert!((mean[i] - t.mu[i]).abs() < 0.01);
            for j in 0..2 {
                let tol = 0.03 * (want_cov[(i, i)] * want_cov[(j, j)]).sqrt();
                assert!((cov[i][j] - want_cov[(i, j)]).abs() < tol, "{i}{j}: {} vs {}", cov[i][j], want_cov[(i, j)]);
            }
        }
    }

    #[test]
    fn conditional_moments_by_binning() {
        // Draw pairs hierarchically, keep those with z1 near a target, compare
        // the empirical conditional mean and variance of z2.
        let sigma = Matrix::<f64>::from_rows(&[vec![1.0, 0.6], vec![0.6, 1.0]]).unwrap();
        let p = EmtdParams::new(3.0, 2.0, vec![0.0, 0.0], sigma).unwrap();
        let z1 = 0.8;
        let c = conditional(&p, &[0], &[z1]).unwrap();
        let want_mean = c.mu[0];
        let want_var = c.covariance().unwrap()[(0, 0)];
        let s = EmtdSampler::new(&p).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let (mut k, mut m1, mut m2) = (0.0, 0.0, 0.0);
        for _ in 0..4_000_000 {
            let z = s.sample(&mut rng);
            if (z[0] - z1).abs() < 0.02 {
                k += 1.0;
                m1 += z[1];
                m2 += z[1] * z[1];
            }
        }
        let mean = m1 / k;
        let var = m2 / k - mean * mean;
        assert!((mean - want_mean).abs() < 0.03, "{mean} vs {want_mean}");
        assert!((var - want_var).abs() < 0.06 * want_var, "{var} vs {want_var}");
    }

    #[test]
    fn posterior_mean_by_importance_sampling() {
        // E(r | z) = ∫ r N(z; μ, rΣ) g(r) dr / ∫ N(z; μ, rΣ) g(r) dr with r ~ prior
        let p = EmtdParams::new(2.5, 1.5, vec![0.0, 0.0], Matrix::from_rows(&[vec![1.0, 0.3], vec![0.3, 2.0]]).unwrap()).unwrap();
        let z = [1.2, -0.7];
        let want = posterior_r(&p, &z).unwrap().mean.unwrap();
        let chol = p.factor().unwrap();
        let quad = chol.quad_form_inv(&z);
        let s = EmtdSampler::new(&p).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let (mut num, mut den) = (0.0, 0.0);
        for _ in 0..1_000_000 {
            let r: f64 = s.draw_scale(&mut rng);
            let w = r.powi(-1) * (-quad / (2.0 * r)).exp(); // |rΣ|^{-1/2} ∝ r^{-n/2}, n = 2
            num += r * w;
            den += w;
        }
        let est = num / den;
        assert!((est - want).abs() < 0.02 * want, "{est} vs {want}");
    }
}

//! Maximum-likelihood estimation of `β = (φ, θ)`.
//!
//! Under eTPR the responses are marginally `EMTD(ν, ν−1, 0, Σ̃)` with
//! `Σ̃ = K(θ) + φI`; GPR is the Gaussian special case. `ν` is a fixed
//! configuration constant and `ω = ν − 1` throughout.
//!
//! Parameters are optimized on the log scale. Gradients and Hessians returned
//! from this module are with respect to `log β`, in the order
//! `(φ, θ0, θ1_1..θ1_p, θ2_1..θ2_p)`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::emtd::posterior_r_from_quad;
use crate::error::{Error, Result};
use crate::kernel::{kernel_grad, kernel_matrix, kernel_second_derivative, KernelParams};
use crate::linalg::{dot, Cholesky, Matrix};
use crate::scalar::{ln_gamma_ratio, Real};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Etpr,
    Gpr,
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ModelKind::Etpr => "etpr",
            ModelKind::Gpr => "gpr",
        })
    }
}

/// Noise variance plus kernel hyperparameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Hyperparams<T> {
    pub phi: T,
    pub kernel: KernelParams<T>,
}

impl<T: Real> Hyperparams<T> {
    pub fn new(phi: T, kernel: KernelParams<T>) -> Self {
        Self { phi, kernel }
    }

    pub fn n_params(&self) -> usize {
        1 + self.kernel.n_params()
    }

    pub fn dim(&self) -> usize {
        self.kernel.dim()
    }

    pub fn to_vec(&self) -> Vec<T> {
        let mut v = Vec::with_capacity(self.n_params());
        v.push(self.phi);
        v.extend(self.kernel.to_vec());
        v
    }

    pub fn from_slice(v: &[T]) -> Result<Self> {
        let (phi, rest) = v.split_first().ok_or_else(|| Error::InvalidParameter("empty hyperparameter vector".into()))?;
        Ok(Self { phi: *phi, kernel: KernelParams::from_slice(rest)? })
    }

    pub fn to_log(&self) -> Vec<T> {
        self.to_vec().into_iter().map(T::ln).collect()
    }

    pub fn from_log(v: &[T]) -> Result<Self> {
        Self::from_slice(&v.iter().map(|x| x.exp()).collect::<Vec<_>>())
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.phi > T::zero()) || !self.phi.is_finite() {
            return Err(Error::InvalidParameter(format!("phi must be positive, got {}", self.phi)));
        }
        self.kernel.validate()
    }
}

/// How the first optimizer start is chosen.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum InitialBeta<T> {
    /// Scales derived from the response variance and covariate ranges.
    DataScaled,
    Fixed(Hyperparams<T>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig<T> {
    pub max_iters: usize,
    /// Infinity-norm of the projected log-scale gradient.
    pub gradient_tolerance: T,
    pub initial_beta: InitialBeta<T>,
    /// Backtracking shrink factor in (0, 1).
    pub shrink: T,
    /// Extra starts drawn log-uniformly from `start_range`.
    pub random_starts: usize,
    pub start_range: (T, T),
    /// Box on every hyperparameter; the lower end keeps `Σ̃` positive definite.
    pub lower_bound: T,
    pub upper_bound: T,
    /// Newton refinement steps taken after gradient ascent converges.
    pub polish_steps: usize,
    /// Seeds the random starts.
    pub seed: u64,
    /// `false` entries are held at their initial value.
    pub free: Option<Vec<bool>>,
}

impl<T: Real> Default for OptimizerConfig<T> {
    fn default() -> Self {
        Self {
            max_iters: 500,
            gradient_tolerance: T::lit(1e-6),
            initial_beta: InitialBeta::DataScaled,
            shrink: T::lit(0.5),
            random_starts: 5,
            start_range: (T::lit(1e-3), T::lit(1e1)),
            lower_bound: T::lit(1e-10),
            upper_bound: T::lit(1e6),
            polish_steps: 8,
            seed: 0x5eed,
            free: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig<T> {
    /// Shape of the latent inverse-gamma scale; `ω = ν − 1`.
    pub nu: T,
    pub kind: ModelKind,
    /// Diagonal jitter as a multiple of `θ0`.
    pub jitter: T,
    pub optimizer: OptimizerConfig<T>,
}

impl<T: Real> Default for ModelConfig<T> {
    fn default() -> Self {
        Self { nu: T::lit(1.05), kind: ModelKind::Etpr, jitter: T::lit(1e-8), optimizer: OptimizerConfig::default() }
    }
}

impl<T: Real> ModelConfig<T> {
    pub fn etpr() -> Self {
        Self::default()
    }

    pub fn gpr() -> Self {
        Self { kind: ModelKind::Gpr, ..Self::default() }
    }

    pub fn with_nu(mut self, nu: T) -> Self {
        self.nu = nu;
        self
    }

    pub fn omega(&self) -> T {
        self.nu - T::one()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.nu > T::one()) || !self.nu.is_finite() {
            return Err(Error::InvalidParameter(format!("nu must exceed 1, got {}", self.nu)));
        }
        if !(self.jitter >= T::zero()) {
            return Err(Error::InvalidParameter("jitter must be nonnegative".into()));
        }
        let o = &self.optimizer;
        if !(o.shrink > T::zero() && o.shrink < T::one()) {
            return Err(Error::InvalidParameter("shrink factor must lie in (0, 1)".into()));
        }
        if !(o.lower_bound > T::zero() && o.lower_bound < o.upper_bound) {
            return Err(Error::InvalidParameter("invalid hyperparameter bounds".into()));
        }
        Ok(())
    }
}

/// `s0 = E(r | D_n) = (S + 2(ν−1)) / (n + 2(ν−1))`.
pub fn s0_from_quad<T: Real>(nu: T, n: usize, quad: T) -> T {
    let two_omega = T::lit(2.0) * (nu - T::one());
    (quad + two_omega) / (T::from_usize_lossy(n) + two_omega)
}

/// `s1 = (n + 2ν) / (2(ν−1) + S)`.
pub fn s1_from_quad<T: Real>(nu: T, n: usize, quad: T) -> T {
    let two = T::lit(2.0);
    (T::from_usize_lossy(n) + two * nu) / (two * (nu - T::one()) + quad)
}

/// Everything the likelihood and its derivatives need at one `β`.
pub(crate) struct Factored<T> {
    pub chol: Cholesky<T>,
    pub alpha: Vec<T>,
    pub quad: T,
}

pub(crate) fn factor_at<T: Real>(beta: &Hyperparams<T>, data: &Dataset<T>, jitter: T) -> Result<Factored<T>> {
    let mut sigma = kernel_matrix(&data.x, &beta.kernel, T::zero())?;
    sigma.add_diagonal(beta.phi + jitter * beta.kernel.theta0);
    let chol = Cholesky::new(&sigma)?;
    let alpha = chol.solve(&data.y);
    let quad = dot(&data.y, &alpha);
    Ok(Factored { chol, alpha, quad })
}

fn loglik_from<T: Real>(f: &Factored<T>, n: usize, nu: T, kind: ModelKind) -> T {
    let half = T::lit(0.5);
    let nf = T::from_usize_lossy(n);
    match kind {
        ModelKind::Gpr => -half * (nf * T::TAU().ln() + f.chol.log_det()) - half * f.quad,
        ModelKind::Etpr => {
            let omega = nu - T::one();
            let a = half * nf;
            -a * (T::TAU() * omega).ln() - half * f.chol.log_det() - (a + nu) * (f.quad / (T::lit(2.0) * omega)).ln_1p()
                + ln_gamma_ratio(a, nu)
        }
    }
}

/// Marginal log-likelihood `log p(y | X; β)`.
pub fn marginal_loglik<T: Real>(beta: &Hyperparams<T>, data: &Dataset<T>, config: &ModelConfig<T>) -> Result<T> {
    check_inputs(beta, data)?;
    let f = factor_at(beta, data, config.jitter)?;
    Ok(loglik_from(&f, data.len(), config.nu, config.kind))
}

fn check_inputs<T: Real>(beta: &Hyperparams<T>, data: &Dataset<T>) -> Result<()> {
    if beta.dim() != data.dim() {
        return Err(Error::DimensionMismatch { expected: data.dim(), found: beta.dim() });
    }
    if data.is_empty() {
        return Err(Error::InvalidParameter("empty dataset".into()));
    }
    Ok(())
}

/// `∂Σ̃/∂β_a` for every parameter, natural scale.
fn sigma_derivatives<T: Real>(beta: &Hyperparams<T>, data: &Dataset<T>, jitter: T) -> Result<Vec<Matrix<T>>> {
    let n = data.len();
    let mut out = Vec::with_capacity(beta.n_params());
    out.push(Matrix::identity(n));
    let mut kg = kernel_grad(&data.x, &beta.kernel)?;
    kg[0].add_diagonal(jitter);
    out.extend(kg);
    Ok(out)
}

/// Weight on `ααᵀ` in the score: `s1` for eTPR, 1 for GPR.
fn score_weight<T: Real>(kind: ModelKind, nu: T, n: usize, quad: T) -> T {
    match kind {
        ModelKind::Etpr => s1_from_quad(nu, n, quad),
        ModelKind::Gpr => T::one(),
    }
}

struct Derivatives<T> {
    loglik: T,
    /// natural-scale gradient
    grad: Vec<T>,
    hess: Option<Matrix<T>>,
}

fn derivatives<T: Real>(
    beta: &Hyperparams<T>,
    data: &Dataset<T>,
    config: &ModelConfig<T>,
    want_hessian: bool,
) -> Result<Derivatives<T>> {
    check_inputs(beta, data)?;
    let n = data.len();
    let f = factor_at(beta, data, config.jitter)?;
    let loglik = loglik_from(&f, n, config.nu, config.kind);
    let d = sigma_derivatives(beta, data, config.jitter)?;
    let inv = f.chol.inverse();
    let w = score_weight(config.kind, config.nu, n, f.quad);
    let half = T::lit(0.5);

    // v_a = D_a α, αᵀ D_a α, tr(Σ̃⁻¹ D_a)
    let v: Vec<Vec<T>> = d.iter().map(|da| da.matvec(&f.alpha)).collect();
    let a_quad: Vec<T> = v.iter().map(|va| dot(&f.alpha, va)).collect();
    let tr: Vec<T> = d.iter().map(|da| inv.trace_of_product(da)).collect();
    let grad: Vec<T> = (0..d.len()).map(|a| half * (w * a_quad[a] - tr[a])).collect();

    let hess = if want_hessian {
        let np = d.len();
        // c = (n + 2ν)/(2(ν−1)+S)² multiplies the squared-trace correction; zero for GPR.
        let c = match config.kind {
            ModelKind::Etpr => {
                let den = T::lit(2.0) * (config.nu - T::one()) + f.quad;
                (T::from_usize_lossy(n) + T::lit(2.0) * config.nu) / (den * den)
            }
            ModelKind::Gpr => T::zero(),
        };
        let m: Vec<Matrix<T>> = d.iter().map(|da| inv.matmul(da)).collect();
        let sv: Vec<Vec<T>> = v.iter().map(|va| f.chol.solve(va)).collect();
        let mut h = Matrix::zeros(np, np);
        for a in 0..np {
            for b in a..np {
                let mut val = half * m[a].trace_of_product(&m[b]) - w * dot(&v[a], &sv[b]) + half * c * a_quad[a] * a_quad[b];
                // kernel indices are shifted by one past φ
                if a > 0 && b > 0 {
                    if let Some(dab) = kernel_second_derivative(&data.x, &beta.kernel, a - 1, b - 1)? {
                        val = val + half * (w * dab.quad_form(&f.alpha) - inv.trace_of_product(&dab));
                    }
                }
                h[(a, b)] = val;
                h[(b, a)] = val;
            }
        }
        Some(h)
    } else {
        None
    };
    Ok(Derivatives { loglik, grad, hess })
}

fn to_log_gradient<T: Real>(beta: &[T], grad: &[T]) -> Vec<T> {
    beta.iter().zip(grad).map(|(&b, &g)| b * g).collect()
}

fn to_log_hessian<T: Real>(beta: &[T], grad: &[T], h: &Matrix<T>) -> Matrix<T> {
    let np = beta.len();
    Matrix::from_fn(np, np, |a, b| {
        let mut v = beta[a] * beta[b] * h[(a, b)];
        if a == b {
            v = v + beta[a] * grad[a];
        }
        v
    })
}

/// Gradient of the marginal log-likelihood with respect to `log β`.
pub fn score<T: Real>(beta: &Hyperparams<T>, data: &Dataset<T>, config: &ModelConfig<T>) -> Result<Vec<T>> {
    let d = derivatives(beta, data, config, false)?;
    Ok(to_log_gradient(&beta.to_vec(), &d.grad))
}

/// Hessian of the marginal log-likelihood with respect to `log β`.
pub fn hessian<T: Real>(beta: &Hyperparams<T>, data: &Dataset<T>, config: &ModelConfig<T>) -> Result<Matrix<T>> {
    let d = derivatives(beta, data, config, true)?;
    let b = beta.to_vec();
    Ok(to_log_hessian(&b, &d.grad, d.hess.as_ref().expect("requested")))
}

/// Gradient and Hessian with respect to the natural parameters `β`.
pub fn natural_derivatives<T: Real>(
    beta: &Hyperparams<T>,
    data: &Dataset<T>,
    config: &ModelConfig<T>,
) -> Result<(T, Vec<T>, Matrix<T>)> {
    let d = derivatives(beta, data, config, true)?;
    Ok((d.loglik, d.grad, d.hess.expect("requested")))
}

/// Outcome of one optimizer start.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StartRecord<T> {
    pub start: Vec<T>,
    pub loglik: Option<T>,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Clone, Debug)]
pub struct FittedModel<T> {
    pub beta_hat: Hyperparams<T>,
    pub kind: ModelKind,
    pub nu: T,
    pub jitter: T,
    pub chol: Cholesky<T>,
    /// `Σ̃⁻¹ y`.
    pub alpha: Vec<T>,
    /// `yᵀ Σ̃⁻¹ y`.
    pub quad: T,
    pub s0: T,
    pub s1: T,
    pub loglik: T,
    /// Log-scale gradient at `β̂`.
    pub gradient: Vec<T>,
    /// Log-scale Hessian at `β̂`.
    pub hessian: Matrix<T>,
    pub free: Vec<bool>,
    pub converged: bool,
    pub iterations: usize,
    /// Free parameters that finished on the box boundary.
    pub at_bound: Vec<bool>,
    pub starts: Vec<StartRecord<T>>,
    pub n_obs: usize,
}

impl<T: Real> FittedModel<T> {
    /// Assemble a model at a given `β` without optimizing.
    pub fn at(beta: Hyperparams<T>, data: &Dataset<T>, config: &ModelConfig<T>) -> Result<Self> {
        config.validate()?;
        check_inputs(&beta, data)?;
        let np = beta.n_params();
        let free = vec![true; np];
        Self::assemble(beta, data, config, free, true, 0, vec![false; np], Vec::new())
    }

    #[allow(clippy::too_many_arguments)]
    fn assemble(
        beta: Hyperparams<T>,
        data: &Dataset<T>,
        config: &ModelConfig<T>,
        free: Vec<bool>,
        converged: bool,
        iterations: usize,
        at_bound: Vec<bool>,
        starts: Vec<StartRecord<T>>,
    ) -> Result<Self> {
        let n = data.len();
        let f = factor_at(&beta, data, config.jitter)?;
        let d = derivatives(&beta, data, config, true)?;
        let bv = beta.to_vec();
        let gradient = to_log_gradient(&bv, &d.grad);
        let hessian = to_log_hessian(&bv, &d.grad, d.hess.as_ref().expect("requested"));
        let (s0, s1) = match config.kind {
            ModelKind::Etpr => (s0_from_quad(config.nu, n, f.quad), s1_from_quad(config.nu, n, f.quad)),
            ModelKind::Gpr => (T::one(), T::one()),
        };
        Ok(Self {
            beta_hat: beta,
            kind: config.kind,
            nu: config.nu,
            jitter: config.jitter,
            chol: f.chol,
            alpha: f.alpha,
            quad: f.quad,
            s0,
            s1,
            loglik: d.loglik,
            gradient,
            hessian,
            free,
            converged,
            iterations,
            at_bound,
            starts,
            n_obs: n,
        })
    }

    pub fn omega(&self) -> T {
        self.nu - T::one()
    }

    pub fn boundary(&self) -> bool {
        self.at_bound.iter().any(|&b| b)
    }

    /// Posterior mean and variance of the latent scale `r` given the data
    /// (eTPR only; GPR has `r ≡ 1`).
    pub fn posterior_scale(&self) -> crate::emtd::PosteriorR<T> {
        posterior_r_from_quad(self.nu, self.omega(), self.n_obs, self.quad)
    }

    pub fn config(&self) -> ModelConfig<T> {
        ModelConfig { nu: self.nu, kind: self.kind, jitter: self.jitter, optimizer: OptimizerConfig::default() }
    }
}

fn data_scaled_start<T: Real>(data: &Dataset<T>) -> Hyperparams<T> {
    let n = T::from_usize_lossy(data.len());
    let mean = data.y.iter().copied().sum::<T>() / n;
    let var = data.y.iter().map(|&v| (v - mean) * (v - mean)).sum::<T>() / n;
    let var = if var > T::lit(1e-12) { var } else { T::one() };
    let p = data.dim();
    let mut theta1 = Vec::with_capacity(p);
    let mut theta2 = Vec::with_capacity(p);
    for l in 0..p {
        let col = data.x.column(l);
        let lo = col.iter().copied().fold(T::infinity(), T::min);
        let hi = col.iter().copied().fold(T::neg_infinity(), T::max);
        let range = hi - lo;
        theta1.push(if range > T::zero() { T::lit(4.0) / (range * range) } else { T::one() });
        let ms = col.iter().map(|&v| v * v).sum::<T>() / n;
        theta2.push(T::lit(0.1) * var / if ms > T::zero() { ms } else { T::one() });
    }
    Hyperparams::new(T::lit(0.2) * var, KernelParams { theta0: var, theta1, theta2 })
}

fn clamp_log<T: Real>(v: &mut [T], lo: T, hi: T) {
    for x in v.iter_mut() {
        *x = x.max(lo).min(hi);
    }
}

/// Projected gradient: zero components held at a bound with the gradient pushing outward,
/// and components that are not free.
fn project<T: Real>(eta: &[T], g: &[T], free: &[bool], lo: T, hi: T) -> Vec<T> {
    eta.iter()
        .zip(g)
        .zip(free)
        .map(|((&e, &gi), &f)| {
            if !f || (e <= lo && gi < T::zero()) || (e >= hi && gi > T::zero()) {
                T::zero()
            } else {
                gi
            }
        })
        .collect()
}

fn inf_norm<T: Real>(v: &[T]) -> T {
    v.iter().fold(T::zero(), |m, &x| m.max(x.abs()))
}

struct Objective<'a, T> {
    data: &'a Dataset<T>,
    config: &'a ModelConfig<T>,
}

impl<T: Real> Objective<'_, T> {
    fn value_and_grad(&self, eta: &[T]) -> Option<(T, Vec<T>)> {
        let beta = Hyperparams::from_log(eta).ok()?;
        let d = derivatives(&beta, self.data, self.config, false).ok()?;
        if !d.loglik.is_finite() || d.grad.iter().any(|g| !g.is_finite()) {
            return None;
        }
        Some((d.loglik, to_log_gradient(&beta.to_vec(), &d.grad)))
    }

    fn log_hessian(&self, eta: &[T]) -> Option<Matrix<T>> {
        let beta = Hyperparams::from_log(eta).ok()?;
        let d = derivatives(&beta, self.data, self.config, true).ok()?;
        Some(to_log_hessian(&beta.to_vec(), &d.grad, d.hess.as_ref()?))
    }
}

struct AscentResult<T> {
    eta: Vec<T>,
    loglik: T,
    iterations: usize,
    converged: bool,
}

/// Projected gradient ascent with Barzilai–Borwein trial steps and Armijo
/// backtracking. Every accepted step is non-decreasing in the objective.
fn ascend<T: Real>(obj: &Objective<'_, T>, mut eta: Vec<T>, free: &[bool], opt: &OptimizerConfig<T>) -> Option<AscentResult<T>> {
    let lo = opt.lower_bound.ln();
    let hi = opt.upper_bound.ln();
    clamp_log(&mut eta, lo, hi);
    let (mut f, mut g) = obj.value_and_grad(&eta)?;
    let armijo = T::lit(1e-4);
    let mut step = {
        let pg = project(&eta, &g, free, lo, hi);
        let gn = inf_norm(&pg);
        if gn > T::zero() { (T::one() / gn).min(T::one()) } else { T::one() }
    };
    let mut iterations = 0;
    let mut converged = false;
    while iterations < opt.max_iters {
        let pg = project(&eta, &g, free, lo, hi);
        if inf_norm(&pg) < opt.gradient_tolerance {
            converged = true;
            break;
        }
        iterations += 1;
        if iterations % 20 == 0 && snap_to_bounds(obj, &mut eta, &mut f, &mut g, free, lo, hi) {
            continue;
        }
        let mut accepted = None;
        let mut t = step;
        for _ in 0..60 {
            let mut trial: Vec<T> = eta.iter().zip(&pg).map(|(&e, &d)| e + t * d).collect();
            clamp_log(&mut trial, lo, hi);
            let moved: T = trial.iter().zip(&eta).zip(&g).map(|((&a, &b), &gi)| gi * (a - b)).sum();
            if let Some((ft, gt)) = obj.value_and_grad(&trial) {
                if ft >= f + armijo * moved && ft >= f {
                    accepted = Some((trial, ft, gt));
                    break;
                }
            }
            t = t * opt.shrink;
        }
        let Some((next, fnext, gnext)) = accepted else {
            // no ascent direction left at working precision
            converged = inf_norm(&pg) < opt.gradient_tolerance.sqrt();
            break;
        };
        let s: Vec<T> = next.iter().zip(&eta).map(|(&a, &b)| a - b).collect();
        let y: Vec<T> = gnext.iter().zip(&g).map(|(&a, &b)| a - b).collect();
        let sy = dot(&s, &y);
        let ss = dot(&s, &s);
        step = if sy < T::zero() { (ss / -sy).max(T::lit(1e-8)).min(T::lit(1e4)) } else { (t * T::lit(2.0)).min(T::lit(1e4)) };
        eta = next;
        f = fnext;
        g = gnext;
    }
    if opt.polish_steps > 0 {
        polish(obj, &mut eta, &mut f, &mut g, free, opt);
        converged = converged || inf_norm(&project(&eta, &g, free, lo, hi)) < opt.gradient_tolerance;
    }
    Some(AscentResult { eta, loglik: f, iterations, converged })
}

/// Move coordinates whose gradient points at a bound straight onto it when
/// that does not lower the objective. Log-scale gradients vanish like `β`
/// near zero, so plain gradient steps approach the lower bound very slowly.
fn snap_to_bounds<T: Real>(obj: &Objective<'_, T>, eta: &mut [T], f: &mut T, g: &mut Vec<T>, free: &[bool], lo: T, hi: T) -> bool {
    let mut moved = false;
    for i in 0..eta.len() {
        let target = if g[i] < T::zero() && eta[i] > lo {
            lo
        } else if g[i] > T::zero() && eta[i] < hi {
            hi
        } else {
            continue;
        };
        if !free[i] {
            continue;
        }
        let mut trial = eta.to_vec();
        trial[i] = target;
        if let Some((ft, gt)) = obj.value_and_grad(&trial) {
            if ft >= *f {
                eta.copy_from_slice(&trial);
                *f = ft;
                *g = gt;
                moved = true;
            }
        }
    }
    moved
}

/// Newton refinement on free interior coordinates; steps that would lower the
/// objective are rejected.
fn polish<T: Real>(obj: &Objective<'_, T>, eta: &mut Vec<T>, f: &mut T, g: &mut Vec<T>, free: &[bool], opt: &OptimizerConfig<T>) {
    let lo = opt.lower_bound.ln();
    let hi = opt.upper_bound.ln();
    let margin = T::lit(1e-6);
    for _ in 0..opt.polish_steps {
        let active: Vec<usize> = (0..eta.len()).filter(|&i| free[i] && eta[i] > lo + margin && eta[i] < hi - margin).collect();
        if active.is_empty() {
            return;
        }
        let Some(h) = obj.log_hessian(eta) else { return };
        let neg_h = Matrix::from_fn(active.len(), active.len(), |a, b| -h[(active[a], active[b])]);
        let Ok(chol) = Cholesky::new(&neg_h) else { return };
        let rhs: Vec<T> = active.iter().map(|&i| g[i]).collect();
        let delta = chol.solve(&rhs);
        let mut trial = eta.clone();
        for (k, &i) in active.iter().enumerate() {
            trial[i] = trial[i] + delta[k];
        }
        clamp_log(&mut trial, lo, hi);
        match obj.value_and_grad(&trial) {
            Some((ft, gt)) if ft >= *f => {
                let improved = inf_norm(&project(&trial, &gt, free, lo, hi)) <= inf_norm(&project(eta, g, free, lo, hi));
                *eta = trial;
                *f = ft;
                *g = gt;
                if !improved {
                    return;
                }
            }
            _ => return,
        }
    }
}

/// Maximize the marginal likelihood over `log β` from several starts and keep
/// the best.
pub fn fit<T: Real>(data: &Dataset<T>, config: &ModelConfig<T>) -> Result<FittedModel<T>> {
    config.validate()?;
    if data.len() < 2 {
        return Err(Error::InvalidParameter(format!("need at least 2 observations, got {}", data.len())));
    }
    data.check_finite()?;
    let opt = &config.optimizer;
    let p = data.dim();
    let np = 2 + 2 * p;
    let free = match &opt.free {
        Some(mask) if mask.len() != np => return Err(Error::DimensionMismatch { expected: np, found: mask.len() }),
        Some(mask) => mask.clone(),
        None => vec![true; np],
    };
    let first = match &opt.initial_beta {
        InitialBeta::DataScaled => data_scaled_start(data),
        InitialBeta::Fixed(b) => {
            if b.dim() != p {
                return Err(Error::DimensionMismatch { expected: p, found: b.dim() });
            }
            b.validate()?;
            b.clone()
        }
    };
    let mut starts = vec![first.to_log()];
    let mut rng = ChaCha8Rng::seed_from_u64(opt.seed);
    let (lo, hi) = (opt.start_range.0.to_f64_lossy().ln(), opt.start_range.1.to_f64_lossy().ln());
    for _ in 0..opt.random_starts {
        let mut s = starts[0].clone();
        for (i, v) in s.iter_mut().enumerate() {
            let draw = T::lit(rng.gen_range(lo..hi));
            if free[i] {
                *v = draw;
            }
        }
        starts.push(s);
    }

    let obj = Objective { data, config };
    let mut records = Vec::with_capacity(starts.len());
    let mut best: Option<AscentResult<T>> = None;
    for s in starts {
        let res = ascend(&obj, s.clone(), &free, opt);
        records.push(StartRecord {
            start: s.iter().map(|v| v.exp()).collect(),
            loglik: res.as_ref().map(|r| r.loglik),
            iterations: res.as_ref().map_or(0, |r| r.iterations),
            converged: res.as_ref().is_some_and(|r| r.converged),
        });
        if let Some(r) = res {
            if best.as_ref().map_or(true, |b| r.loglik > b.loglik) {
                best = Some(r);
            }
        }
    }
    let Some(best) = best else {
        let diag: Vec<String> = records.iter().map(|r| format!("start {:?}", r.start)).collect();
        return Err(Error::FitFailed(diag.join("; ")));
    };
    let lo_b = opt.lower_bound.ln();
    let hi_b = opt.upper_bound.ln();
    let tol = T::lit(1e-9);
    let at_bound: Vec<bool> = best.eta.iter().zip(&free).map(|(&e, &f)| f && (e <= lo_b + tol || e >= hi_b - tol)).collect();
    let mut values = Hyperparams::from_log(&best.eta)?.to_vec();
    for (v, (&f, &exact)) in values.iter_mut().zip(free.iter().zip(&first.to_vec())) {
        if !f {
            *v = exact;
        }
    }
    let beta = Hyperparams::from_slice(&values)?;
    FittedModel::assemble(beta, data, config, free, best.converged, best.iterations, at_bound, records)
}

/// Standard errors of `β̂` on the natural scale from the observed information
/// of the free parameters, mapped back from the log scale by the delta method.
/// Entries are `None` for fixed parameters or when the information matrix is
/// not positive definite.
pub fn std_errors<T: Real>(model: &FittedModel<T>) -> Vec<Option<T>> {
    let beta = model.beta_hat.to_vec();
    let active: Vec<usize> = (0..beta.len()).filter(|&i| model.free[i]).collect();
    let mut out = vec![None; beta.len()];
    if active.is_empty() {
        return out;
    }
    let info = Matrix::from_fn(active.len(), active.len(), |a, b| -model.hessian[(active[a], active[b])]);
    let Ok(chol) = Cholesky::new(&info) else { return out };
    // guard against numerically singular information
    let d: Vec<T> = (0..active.len()).map(|i| chol.factor()[(i, i)]).collect();
    let dmax = d.iter().copied().fold(T::zero(), T::max);
    let dmin = d.iter().copied().fold(T::infinity(), T::min);
    if !(dmin > dmax * T::eps().sqrt() * T::lit(1e-2)) {
        return out;
    }
    for (k, &i) in active.iter().enumerate() {
        let mut e = vec![T::zero(); active.len()];
        e[k] = T::one();
        let var_log = chol.solve(&e)[k];
        if var_log > T::zero() && var_log.is_finite() {
            out[i] = Some(beta[i] * var_log.sqrt());
        }
    }
    out
}

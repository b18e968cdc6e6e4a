//! Robust BLUP prediction.
//!
//! At a new input `u` the predictive law of `f(u)` given the data is
//! `EMTD(n/2+ν, n/2+ν−1, μ*, σ*)` with
//!
//! ```text
//! μ* = k_uᵀ Σ̃⁻¹ y
//! σ* = s0 (k(u,u) − k_uᵀ Σ̃⁻¹ k_u)
//! ```
//!
//! and `y(u)` adds `s0 φ` to the variance. The mean is the same linear
//! predictor under eTPR and GPR; only `s0` (1 under GPR) differs.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal, StudentsT};

use crate::data::Dataset;
use crate::emtd::{condition_blocks, conditional, log_density, log_density_1d, marginal, EmtdParams};
use crate::error::{Error, Result};
use crate::fit::{score, FittedModel, Hyperparams, ModelConfig, ModelKind};
use crate::kernel::{kernel_cross, kernel_eval, kernel_matrix};
use crate::linalg::{dot, Matrix};
use crate::scalar::Real;

/// Shape used to represent the Gaussian posterior of a GPR model as an EMTD.
pub const GAUSSIAN_SHAPE: f64 = 1e12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Prediction<T> {
    pub mean: T,
    pub var_f: T,
    pub var_y: T,
    /// Predictive shape `n/2 + ν`; infinite for GPR.
    pub nu_star: T,
    /// Predictive scale `n/2 + ν − 1`; infinite for GPR.
    pub omega_star: T,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IntervalTarget {
    F,
    Y,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IntervalMethod {
    /// `mean ± z_level √var`, the usual 1.96 band at 95%.
    #[default]
    Gaussian,
    /// Quantiles of the predictive EMTD (a scaled Student t with `2ν*` dof).
    Emtd,
}

fn check_model<T: Real>(model: &FittedModel<T>, data: &Dataset<T>) -> Result<()> {
    if model.n_obs != data.len() {
        return Err(Error::DimensionMismatch { expected: model.n_obs, found: data.len() });
    }
    if model.beta_hat.dim() != data.dim() {
        return Err(Error::DimensionMismatch { expected: model.beta_hat.dim(), found: data.dim() });
    }
    Ok(())
}

fn clip_variance<T: Real>(v: T, prior: T) -> Result<T> {
    if v >= T::zero() {
        return Ok(v);
    }
    let tol = T::lit(1e-10) * prior.abs().max(T::one());
    if v >= -tol {
        Ok(T::zero())
    } else {
        Err(Error::Numerical(format!("predictive variance {v} is negative beyond rounding")))
    }
}

fn predict_point<T: Real>(model: &FittedModel<T>, data: &Dataset<T>, u: &[T]) -> Result<Prediction<T>> {
    let kp = &model.beta_hat.kernel;
    let ku = kernel_cross(&data.x, u, kp)?;
    let kuu = kernel_eval(u, u, kp)?;
    let mean = dot(&ku, &model.alpha);
    let reduction = model.chol.quad_form_inv(&ku);
    let base = clip_variance(kuu - reduction, kuu)?;
    let var_f = model.s0 * base;
    let var_y = var_f + model.s0 * model.beta_hat.phi;
    let (nu_star, omega_star) = match model.kind {
        ModelKind::Etpr => {
            let half_n = T::from_usize_lossy(model.n_obs) * T::lit(0.5);
            (half_n + model.nu, half_n + model.nu - T::one())
        }
        ModelKind::Gpr => (T::infinity(), T::infinity()),
    };
    Ok(Prediction { mean, var_f, var_y, nu_star, omega_star })
}

/// Predictions of the latent function at each row of `u`.
pub fn predict_f<T: Real>(model: &FittedModel<T>, data: &Dataset<T>, u: &Matrix<T>) -> Result<Vec<Prediction<T>>> {
    check_model(model, data)?;
    (0..u.rows()).map(|i| predict_point(model, data, u.row(i))).collect()
}

/// Predictions of a new response at each row of `u`. Means agree with
/// [`predict_f`]; read `var_y` for the response variance.
pub fn predict_y<T: Real>(model: &FittedModel<T>, data: &Dataset<T>, u: &Matrix<T>) -> Result<Vec<Prediction<T>>> {
    predict_f(model, data, u)
}

/// Posterior of `f(X_n)`: `EMTD(n/2+ν, n/2+ν−1, KΣ̃⁻¹y, s0 φ KΣ̃⁻¹)`.
///
/// For a GPR model the Gaussian posterior is returned with shape and scale
/// both set to [`GAUSSIAN_SHAPE`], so the EMTD covariance equals `Σ_n`.
pub fn latent_posterior<T: Real>(model: &FittedModel<T>, data: &Dataset<T>) -> Result<EmtdParams<T>> {
    check_model(model, data)?;
    let k = kernel_matrix(&data.x, &model.beta_hat.kernel, T::zero())?;
    let mu = k.matvec(&model.alpha);
    // effective noise on the diagonal of Σ̃, including jitter
    let phi_eff = model.beta_hat.phi + model.jitter * model.beta_hat.kernel.theta0;
    let k_sinv = model.chol.solve_matrix(&k).transpose();
    let sigma = k_sinv.scale(model.s0 * phi_eff).symmetrize();
    let (nu, omega) = match model.kind {
        ModelKind::Etpr => {
            let half_n = T::from_usize_lossy(model.n_obs) * T::lit(0.5);
            (half_n + model.nu, half_n + model.nu - T::one())
        }
        ModelKind::Gpr => (T::lit(GAUSSIAN_SHAPE), T::lit(GAUSSIAN_SHAPE)),
    };
    EmtdParams::new(nu, omega, mu, sigma)
}

fn critical_value(level: f64, method: IntervalMethod, nu_star: f64) -> Result<f64> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidParameter(format!("interval level must lie in (0, 1), got {level}")));
    }
    let p = 0.5 * (1.0 + level);
    let q = match method {
        IntervalMethod::Emtd if nu_star.is_finite() => {
            StudentsT::new(0.0, 1.0, 2.0 * nu_star).map_err(|e| Error::InvalidParameter(e.to_string()))?.inverse_cdf(p)
        }
        _ => Normal::new(0.0, 1.0).expect("standard normal").inverse_cdf(p),
    };
    Ok(q)
}

/// Pointwise interval `mean ± c √var` for `f(u)` or `y(u)`.
pub fn credible_interval<T: Real>(
    pred: &Prediction<T>,
    level: T,
    target: IntervalTarget,
    method: IntervalMethod,
) -> Result<(T, T)> {
    let var = match target {
        IntervalTarget::F => pred.var_f,
        IntervalTarget::Y => pred.var_y,
    };
    let nu = pred.nu_star.to_f64_lossy();
    let c = critical_value(level.to_f64_lossy(), method, nu)?;
    // EMTD(ν*, ω*, μ, σ) is μ + √(ω*σ/ν*) t_{2ν*}
    let scale = match method {
        IntervalMethod::Emtd if nu.is_finite() => (pred.omega_star * var / pred.nu_star).sqrt(),
        _ => var.sqrt(),
    };
    let half = T::lit(c) * scale;
    Ok((pred.mean - half, pred.mean + half))
}

/// `Σ log p(y_i | X_i, y_{i−1})`, accumulated one observation at a time from
/// the conditional laws of the joint marginal of `y`.
pub fn sequential_log_density<T: Real>(data: &Dataset<T>, beta: &Hyperparams<T>, config: &ModelConfig<T>) -> Result<T> {
    if data.is_empty() {
        return Err(Error::InvalidParameter("empty dataset".into()));
    }
    let n = data.len();
    let mut sigma = kernel_matrix(&data.x, &beta.kernel, T::zero())?;
    sigma.add_diagonal(beta.phi + config.jitter * beta.kernel.theta0);
    let half = T::lit(0.5);
    match config.kind {
        ModelKind::Etpr => {
            let joint = EmtdParams::new(config.nu, config.omega(), vec![T::zero(); n], sigma)?;
            let mut total = log_density(&data.y[..1], &marginal(&joint, &[0])?)?;
            for i in 1..n {
                let idx: Vec<usize> = (0..=i).collect();
                let sub = marginal(&joint, &idx)?;
                let prefix: Vec<usize> = (0..i).collect();
                let step = conditional(&sub, &prefix, &data.y[..i])?;
                total = total + log_density(&data.y[i..=i], &step)?;
            }
            Ok(total)
        }
        ModelKind::Gpr => {
            let gauss = |z: T, m: T, v: T| -half * (T::TAU() * v).ln() - half * (z - m) * (z - m) / v;
            let mut total = gauss(data.y[0], T::zero(), sigma[(0, 0)]);
            let zeros = vec![T::zero(); n];
            for i in 1..n {
                let idx: Vec<usize> = (0..=i).collect();
                let sub = sigma.select(&idx, &idx);
                let prefix: Vec<usize> = (0..i).collect();
                let c = condition_blocks(&zeros[..=i], &sub, &prefix, &data.y[..i])?;
                total = total + gauss(data.y[i], c.mu[0], c.schur[(0, 0)]);
            }
            Ok(total)
        }
    }
}

/// One-step-ahead log predictive densities `log p(y_i | X_i, y_{i−1})`.
pub fn one_step_log_densities<T: Real>(data: &Dataset<T>, beta: &Hyperparams<T>, config: &ModelConfig<T>) -> Result<Vec<T>> {
    let mut out = Vec::with_capacity(data.len());
    let mut prev = T::zero();
    for i in 1..=data.len() {
        let cum = sequential_log_density(&data.head(i), beta, config)?;
        out.push(cum - prev);
        prev = cum;
    }
    Ok(out)
}

/// Studentized statistic `(f̂(u) − f0(u)) / √V` for the model's kind
/// (`M_T` under eTPR, `M_G` under GPR). `None` when the variance is zero.
pub fn robust_statistic<T: Real>(model: &FittedModel<T>, data: &Dataset<T>, u: &[T], f0_at_u: T) -> Result<Option<T>> {
    check_model(model, data)?;
    let p = predict_point(model, data, u)?;
    if !(p.var_f > T::zero()) {
        return Ok(None);
    }
    Ok(Some((p.mean - f0_at_u) / p.var_f.sqrt()))
}

/// One row of the influence sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow<T> {
    pub k: i32,
    pub scale: T,
    pub score_norm_etpr: T,
    pub score_norm_gpr: T,
    pub m_t: Option<T>,
    pub m_g: Option<T>,
}

/// Multiply response `index` by `10^k` for each `k`, and record the eTPR and
/// GPR score norms and studentized statistics at the fixed estimates of the
/// two given models.
pub fn influence_sweep<T: Real>(
    etpr: &FittedModel<T>,
    gpr: &FittedModel<T>,
    data: &Dataset<T>,
    index: usize,
    ks: &[i32],
    u: &[T],
    f0_at_u: T,
) -> Result<Vec<SweepRow<T>>> {
    if index >= data.len() {
        return Err(Error::InvalidParameter(format!("index {index} out of range for {} observations", data.len())));
    }
    let cfg_t = etpr.config();
    let cfg_g = gpr.config();
    let norm = |v: Vec<T>| v.iter().map(|&x| x * x).sum::<T>().sqrt();
    ks.iter()
        .map(|&k| {
            let scale = T::lit(10f64.powi(k));
            let mut d = data.clone();
            d.y[index] = d.y[index] * scale;
            let mt = FittedModel::at(etpr.beta_hat.clone(), &d, &cfg_t)?;
            let mg = FittedModel::at(gpr.beta_hat.clone(), &d, &cfg_g)?;
            Ok(SweepRow {
                k,
                scale,
                score_norm_etpr: norm(score(&etpr.beta_hat, &d, &cfg_t)?),
                score_norm_gpr: norm(score(&gpr.beta_hat, &d, &cfg_g)?),
                m_t: robust_statistic(&mt, &d, u, f0_at_u)?,
                m_g: robust_statistic(&mg, &d, u, f0_at_u)?,
            })
        })
        .collect()
}

/// Log-density of a scalar prediction under its predictive EMTD (or Gaussian for GPR).
pub fn predictive_log_density<T: Real>(pred: &Prediction<T>, target: IntervalTarget, value: T) -> T {
    let var = match target {
        IntervalTarget::F => pred.var_f,
        IntervalTarget::Y => pred.var_y,
    };
    if pred.nu_star.is_finite() {
        log_density_1d(value, pred.nu_star, pred.omega_star, pred.mean, var)
    } else {
        let half = T::lit(0.5);
        -half * (T::TAU() * var).ln() - half * (value - pred.mean) * (value - pred.mean) / var
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::KernelParams;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn beta1(phi: f64, t0: f64, t1: f64, t2: f64) -> Hyperparams<f64> {
        Hyperparams::new(phi, KernelParams::new(t0, vec![t1], vec![t2]).unwrap())
    }

    fn cfg(kind: ModelKind) -> ModelConfig<f64> {
        ModelConfig { kind, jitter: 0.0, ..ModelConfig::default() }
    }

    fn toy(n: usize, seed: u64) -> Dataset<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..3.0)).collect();
        let y = x.iter().map(|&v| v.sin() + 0.2 * rng.gen_range(-1.0..1.0)).collect();
        Dataset::from_1d(&x, y).unwrap()
    }

    #[test]
    fn orthogonal_input_under_linear_kernel_has_zero_mean() {
        // θ0 → 0 leaves only the linear term; u ⊥ every x_i
        let x = Matrix::from_rows(&[vec![1.0, 0.0], vec![2.0, 0.0], vec![-1.0, 0.0]]).unwrap();
        let data = Dataset::new(x, vec![0.5, 1.2, -0.3]).unwrap();
        let b = Hyperparams::new(0.1, KernelParams::from_slice(&[1e-300, 1.0, 1.0, 0.5, 0.5]).unwrap());
        let m = FittedModel::at(b, &data, &cfg(ModelKind::Etpr)).unwrap();
        let p = predict_f(&m, &data, &Matrix::from_rows(&[vec![0.0, 3.0]]).unwrap()).unwrap();
        assert!(p[0].mean.abs() < 1e-250);
    }

    #[test]
    fn interpolates_as_noise_vanishes() {
        let data = toy(5, 1);
        let b = beta1(1e-10, 1.0, 2.0, 0.1);
        let m = FittedModel::at(b, &data, &cfg(ModelKind::Etpr)).unwrap();
        let u = Matrix::from_rows(&[data.x.row(2).to_vec()]).unwrap();
        let p = predict_f(&m, &data, &u).unwrap()[0];
        assert!((p.mean - data.y[2]).abs() < 1e-6);
        assert!(p.var_f < 1e-8);
    }

    #[test]
    fn zero_cross_and_zero_response_variance() {
        // k_u = 0, y = 0 → var_y = s0 (k(u,u) + φ) with s0 = 2(ν−1)/(n+2(ν−1))
        let data = Dataset::from_1d(&[0.0, 0.1, 0.2], vec![0.0; 3]).unwrap();
        let b = beta1(0.3, 0.5, 1e4, 1e-300);
        let m = FittedModel::at(b, &data, &cfg(ModelKind::Etpr)).unwrap();
        let p = predict_y(&m, &data, &Matrix::from_rows(&[vec![50.0]]).unwrap()).unwrap()[0];
        let s0 = 0.1 / (3.0 + 0.1);
        let kuu = 0.5 + 1e-300 * 2500.0;
        assert!((p.var_y - s0 * (kuu + 0.3)).abs() < 1e-14);
    }

    #[test]
    fn gpr_variance_offset_is_phi() {
        let data = toy(6, 2);
        let b = beta1(0.27, 0.8, 1.5, 0.05);
        let m = FittedModel::at(b, &data, &cfg(ModelKind::Gpr)).unwrap();
        let u = Matrix::from_rows(&[vec![0.5], vec![2.9], vec![7.0]]).unwrap();
        for p in predict_y(&m, &data, &u).unwrap() {
            assert_eq!(p.var_y, p.var_f + 0.27);
        }
    }

    #[test]
    fn blup_means_shared_and_variances_scaled_by_s0() {
        let data = toy(8, 3);
        let b = beta1(0.2, 0.9, 1.1, 0.1);
        let mt = FittedModel::at(b.clone(), &data, &cfg(ModelKind::Etpr)).unwrap();
        let mg = FittedModel::at(b, &data, &cfg(ModelKind::Gpr)).unwrap();
        let u = Matrix::from_rows(&[vec![0.3], vec![1.7], vec![3.5]]).unwrap();
        let pt = predict_f(&mt, &data, &u).unwrap();
        let pg = predict_f(&mg, &data, &u).unwrap();
        for (a, g) in pt.iter().zip(&pg) {
            assert_eq!(a.mean, g.mean);
            assert!((a.var_f - mt.s0 * g.var_f).abs() < 1e-15);
        }
    }

    /// Joint of (y_n, f(u)) assembled explicitly and conditioned on y_n.
    #[test]
    fn prediction_matches_explicit_conditional() {
        let data = toy(2, 4);
        let b = beta1(0.15, 0.7, 1.3, 0.2);
        let c = cfg(ModelKind::Etpr);
        let m = FittedModel::at(b.clone(), &data, &c).unwrap();
        let u = [1.4];
        let mut joint = Matrix::zeros(3, 3);
        for i in 0..2 {
            for j in 0..2 {
                joint[(i, j)] = kernel_eval(data.x.row(i), data.x.row(j), &b.kernel).unwrap() + if i == j { 0.15 } else { 0.0 };
            }
            let kv = kernel_eval(data.x.row(i), &u, &b.kernel).unwrap();
            joint[(i, 2)] = kv;
            joint[(2, i)] = kv;
        }
        joint[(2, 2)] = kernel_eval(&u, &u, &b.kernel).unwrap();
        let e = EmtdParams::new(1.05, 0.05, vec![0.0; 3], joint).unwrap();
        let cond = conditional(&e, &[0, 1], &data.y).unwrap();
        let p = predict_f(&m, &data, &Matrix::from_rows(&[u.to_vec()]).unwrap()).unwrap()[0];
        assert!((p.mean - cond.mu[0]).abs() < 1e-12);
        assert!((p.var_f - cond.covariance().unwrap()[(0, 0)]).abs() < 1e-12);
        assert!((p.nu_star - cond.nu).abs() < 1e-15);
        assert!((p.omega_star - cond.omega).abs() < 1e-15);
    }

    #[test]
    fn latent_posterior_limits() {
        let data = toy(4, 5);
        // K ≈ 0
        let b = beta1(0.3, 1e-300, 1.0, 1e-300);
        let m = FittedModel::at(b, &data, &cfg(ModelKind::Etpr)).unwrap();
        let lp = latent_posterior(&m, &data).unwrap();
        assert!(lp.mu.iter().all(|v| v.abs() < 1e-200));
        assert!(lp.sigma.max_abs() < 1e-200);
        // φ → 0
        let b = beta1(1e-10, 1.0, 1.0, 0.1);
        let m = FittedModel::at(b, &data, &cfg(ModelKind::Etpr)).unwrap();
        let lp = latent_posterior(&m, &data).unwrap();
        for (a, y) in lp.mu.iter().zip(&data.y) {
            assert!((a - y).abs() < 1e-6);
        }
        assert!((lp.nu - (2.0 + 1.05)).abs() < 1e-15);
        assert!((lp.omega - (2.0 + 0.05)).abs() < 1e-15);
    }

    #[test]
    fn interval_conventions() {
        let p = Prediction { mean: 0.0f64, var_f: 1.0, var_y: 4.0, nu_star: 6.05, omega_star: 5.05 };
        let (lo, hi) = credible_interval(&p, 0.95, IntervalTarget::F, IntervalMethod::Gaussian).unwrap();
        assert!((hi - 1.96).abs() < 1e-4 && (lo + 1.96).abs() < 1e-4);
        let (lo2, hi2) = credible_interval(&p, 0.95, IntervalTarget::Y, IntervalMethod::Gaussian).unwrap();
        assert!(((hi2 - lo2) / (hi - lo) - 2.0).abs() < 1e-14);
        let q = Prediction { var_f: 2.0, ..p };
        let (lo3, hi3) = credible_interval(&q, 0.95, IntervalTarget::F, IntervalMethod::Gaussian).unwrap();
        assert!(((hi3 - lo3) / (hi - lo) - 2f64.sqrt()).abs() < 1e-14);
        let z = Prediction { var_f: 0.0, mean: 0.4, ..p };
        assert_eq!(credible_interval(&z, 0.9, IntervalTarget::F, IntervalMethod::Gaussian).unwrap(), (0.4, 0.4));
        assert!(credible_interval(&p, 1.0, IntervalTarget::F, IntervalMethod::Gaussian).is_err());
        // exact EMTD band is wider than the Gaussian one at the same variance
        let (elo, ehi) = credible_interval(&p, 0.95, IntervalTarget::F, IntervalMethod::Emtd).unwrap();
        assert!(ehi - elo > hi - lo);
        assert!(elo < 0.0 && ehi > 0.0);
    }

    #[test]
    fn emtd_interval_has_nominal_coverage() {
        // P(|Z − μ| ≤ half-width) under EMTD(ν*, ω*, 0, σ) by quadrature of the density
        let p = Prediction { mean: 0.0, var_f: 0.7, var_y: 0.7, nu_star: 2.05, omega_star: 1.05 };
        let (lo, hi) = credible_interval(&p, 0.9, IntervalTarget::F, IntervalMethod::Emtd).unwrap();
        let steps = 200_000;
        let h = (hi - lo) / steps as f64;
        let mut mass = 0.0;
        for i in 0..=steps {
            let z = lo + i as f64 * h;
            let w = if i == 0 || i == steps { 0.5 } else { 1.0 };
            mass += w * predictive_log_density(&p, IntervalTarget::F, z).exp() * h;
        }
        assert!((mass - 0.9).abs() < 1e-6, "{mass}");
    }

    #[test]
    fn sequential_density_single_point() {
        let data = toy(1, 6);
        let b = beta1(0.2, 0.5, 1.0, 0.1);
        for kind in [ModelKind::Etpr, ModelKind::Gpr] {
            let c = cfg(kind);
            let s = sequential_log_density(&data, &b, &c).unwrap();
            let l = crate::fit::marginal_loglik(&b, &data, &c).unwrap();
            assert!((s - l).abs() < 1e-12);
        }
    }

    #[test]
    fn sequential_density_factorizes_joint() {
        for seed in 0..20 {
            let data = toy(5, seed);
            let b = beta1(0.2, 0.5, 1.0, 0.1);
            for kind in [ModelKind::Etpr, ModelKind::Gpr] {
                let c = cfg(kind);
                let s = sequential_log_density(&data, &b, &c).unwrap();
                let l = crate::fit::marginal_loglik(&b, &data, &c).unwrap();
                assert!((s - l).abs() < 1e-10, "{kind}: {s} vs {l}");
                let order = [4, 2, 0, 3, 1];
                let sp = sequential_log_density(&data.permuted(&order), &b, &c).unwrap();
                assert!((sp - l).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn one_step_terms_sum_to_total() {
        let data = toy(4, 9);
        let b = beta1(0.2, 0.5, 1.0, 0.1);
        let c = cfg(ModelKind::Etpr);
        let terms = one_step_log_densities(&data, &b, &c).unwrap();
        let total = sequential_log_density(&data, &b, &c).unwrap();
        assert!((terms.iter().sum::<f64>() - total).abs() < 1e-12);
        let permuted = one_step_log_densities(&data.permuted(&[3, 1, 2, 0]), &b, &c).unwrap();
        assert!((terms[0] - permuted[0]).abs() > 1e-6);
    }

    #[test]
    fn outlier_inflates_etpr_variance() {
        let data = toy(8, 10);
        let b = beta1(0.1, 0.5, 2.0, 0.05);
        let c = cfg(ModelKind::Etpr);
        let clean = FittedModel::at(b.clone(), &data, &c).unwrap();
        let mut dirty = data.clone();
        dirty.y[3] += 8.0;
        let bad = FittedModel::at(b, &dirty, &c).unwrap();
        assert!(bad.s0 > clean.s0);
        let u = Matrix::from_rows(&[vec![0.2], vec![1.0], vec![2.5]]).unwrap();
        let pc = predict_f(&clean, &data, &u).unwrap();
        let pb = predict_f(&bad, &dirty, &u).unwrap();
        for (a, b) in pc.iter().zip(&pb) {
            assert!(b.var_f > a.var_f);
        }
    }

    #[test]
    fn statistic_is_zero_at_truth() {
        let data = toy(6, 11);
        let m = FittedModel::at(beta1(0.2, 0.5, 1.0, 0.1), &data, &cfg(ModelKind::Etpr)).unwrap();
        let u = [1.3];
        let mean = predict_f(&m, &data, &Matrix::from_rows(&[u.to_vec()]).unwrap()).unwrap()[0].mean;
        assert_eq!(robust_statistic(&m, &data, &u, mean).unwrap(), Some(0.0));
    }

    #[test]
    fn sweep_bounded_for_etpr_only() {
        let data = toy(10, 12);
        let b = beta1(0.1, 0.5, 2.0, 0.05);
        let mt = FittedModel::at(b.clone(), &data, &cfg(ModelKind::Etpr)).unwrap();
        let mg = FittedModel::at(b, &data, &cfg(ModelKind::Gpr)).unwrap();
        let ks: Vec<i32> = (0..=6).collect();
        let rows = influence_sweep(&mt, &mg, &data, 4, &ks, data.x.row(4), 0.0).unwrap();
        let r3 = &rows[3];
        let r6 = &rows[6];
        assert!((r6.score_norm_etpr / r3.score_norm_etpr - 1.0).abs() < 0.1);
        assert!(r6.score_norm_gpr / r3.score_norm_gpr > 10.0);
        let mg_abs: Vec<f64> = rows.iter().map(|r| r.m_g.unwrap().abs()).collect();
        assert!(mg_abs.windows(2).skip(1).all(|w| w[1] > w[0]));
        let mt_max = rows.iter().map(|r| r.m_t.unwrap().abs()).fold(0.0, f64::max);
        assert!(mt_max < 100.0);
    }
}

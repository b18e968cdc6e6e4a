//! Squared-exponential plus linear covariance kernel
//!
//! `k(x, x') = θ0 exp(−½ Σ_l θ1_l (x_l − x'_l)²) + Σ_l θ2_l x_l x'_l`
//!
//! Hyperparameters are flattened in the order `(θ0, θ1_1..θ1_p, θ2_1..θ2_p)`
//! wherever a vector or a list of derivative matrices is produced.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::scalar::Real;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelParams<T> {
    /// Vertical scale of the stationary part.
    pub theta0: T,
    /// Inverse squared length-scales, one per covariate.
    pub theta1: Vec<T>,
    /// Linear-trend scales, one per covariate.
    pub theta2: Vec<T>,
}

impl<T: Real> KernelParams<T> {
    pub fn new(theta0: T, theta1: Vec<T>, theta2: Vec<T>) -> Result<Self> {
        let p = Self { theta0, theta1, theta2 };
        p.validate()?;
        Ok(p)
    }

    /// Same `θ1` and `θ2` for every covariate.
    pub fn isotropic(theta0: T, theta1: T, theta2: T, dim: usize) -> Result<Self> {
        Self::new(theta0, vec![theta1; dim], vec![theta2; dim])
    }

    pub fn validate(&self) -> Result<()> {
        if self.theta1.len() != self.theta2.len() {
            return Err(Error::DimensionMismatch { expected: self.theta1.len(), found: self.theta2.len() });
        }
        let all_pos = std::iter::once(&self.theta0)
            .chain(&self.theta1)
            .chain(&self.theta2)
            .all(|&v| v > T::zero() && v.is_finite());
        if !all_pos {
            return Err(Error::InvalidParameter("kernel hyperparameters must be positive and finite".into()));
        }
        Ok(())
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.theta1.len()
    }

    /// Number of hyperparameters, `1 + 2p`.
    #[inline]
    pub fn n_params(&self) -> usize {
        1 + 2 * self.dim()
    }

    pub fn to_vec(&self) -> Vec<T> {
        let mut v = Vec::with_capacity(self.n_params());
        v.push(self.theta0);
        v.extend_from_slice(&self.theta1);
        v.extend_from_slice(&self.theta2);
        v
    }

    /// Inverse of [`to_vec`](Self::to_vec). No positivity check, so degenerate
    /// kernels (zero scales) can be built for limit cases.
    pub fn from_slice(v: &[T]) -> Result<Self> {
        if v.is_empty() || v.len() % 2 == 0 {
            return Err(Error::InvalidParameter(format!("kernel vector length {} is not 1 + 2p", v.len())));
        }
        let p = (v.len() - 1) / 2;
        Ok(Self { theta0: v[0], theta1: v[1..1 + p].to_vec(), theta2: v[1 + p..].to_vec() })
    }

    fn check_point(&self, x: &[T]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: x.len() });
        }
        Ok(())
    }

    #[inline]
    fn stationary(&self, xi: &[T], xj: &[T]) -> T {
        let half = T::lit(0.5);
        let s: T = self.theta1.iter().zip(xi.iter().zip(xj)).map(|(&t, (&a, &b))| t * (a - b) * (a - b)).sum();
        self.theta0 * (-half * s).exp()
    }

    #[inline]
    fn linear(&self, xi: &[T], xj: &[T]) -> T {
        self.theta2.iter().zip(xi.iter().zip(xj)).map(|(&t, (&a, &b))| t * (a * b)).sum()
    }

    #[inline]
    fn eval_unchecked(&self, xi: &[T], xj: &[T]) -> T {
        self.stationary(xi, xj) + self.linear(xi, xj)
    }
}

pub fn kernel_eval<T: Real>(xi: &[T], xj: &[T], params: &KernelParams<T>) -> Result<T> {
    params.check_point(xi)?;
    params.check_point(xj)?;
    Ok(params.eval_unchecked(xi, xj))
}

/// Gram matrix `K` with `jitter` added on the diagonal.
pub fn kernel_matrix<T: Real>(x: &Matrix<T>, params: &KernelParams<T>, jitter: T) -> Result<Matrix<T>> {
    if x.cols() != params.dim() {
        return Err(Error::DimensionMismatch { expected: params.dim(), found: x.cols() });
    }
    let n = x.rows();
    let mut k = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let v = params.eval_unchecked(x.row(i), x.row(j));
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
        k[(i, i)] = k[(i, i)] + jitter;
    }
    Ok(k)
}

/// `k_u = (k(u, x_1), ..., k(u, x_n))`.
pub fn kernel_cross<T: Real>(x: &Matrix<T>, u: &[T], params: &KernelParams<T>) -> Result<Vec<T>> {
    params.check_point(u)?;
    if x.cols() != params.dim() {
        return Err(Error::DimensionMismatch { expected: params.dim(), found: x.cols() });
    }
    Ok((0..x.rows()).map(|i| params.eval_unchecked(u, x.row(i))).collect())
}

/// `∂K/∂θ` for every hyperparameter, in flattened order.
pub fn kernel_grad<T: Real>(x: &Matrix<T>, params: &KernelParams<T>) -> Result<Vec<Matrix<T>>> {
    if x.cols() != params.dim() {
        return Err(Error::DimensionMismatch { expected: params.dim(), found: x.cols() });
    }
    let n = x.rows();
    let p = params.dim();
    let half = T::lit(0.5);
    let mut out: Vec<Matrix<T>> = (0..params.n_params()).map(|_| Matrix::zeros(n, n)).collect();
    for i in 0..n {
        for j in 0..=i {
            let (xi, xj) = (x.row(i), x.row(j));
            // exp-part without θ0
            let s: T = params.theta1.iter().zip(xi.iter().zip(xj)).map(|(&t, (&a, &b))| t * (a - b) * (a - b)).sum();
            let e = (-half * s).exp();
            let mut set = |m: usize, v: T| {
                out[m][(i, j)] = v;
                out[m][(j, i)] = v;
            };
            set(0, e);
            for l in 0..p {
                let d = xi[l] - xj[l];
                set(1 + l, -half * params.theta0 * e * d * d);
                set(1 + p + l, xi[l] * xj[l]);
            }
        }
    }
    Ok(out)
}

/// `∂²K/∂θ_a∂θ_b` in flattened indexing, or `None` when identically zero
/// (every pair involving a linear-trend scale, and `(θ0, θ0)`).
pub fn kernel_second_derivative<T: Real>(
    x: &Matrix<T>,
    params: &KernelParams<T>,
    a: usize,
    b: usize,
) -> Result<Option<Matrix<T>>> {
    if x.cols() != params.dim() {
        return Err(Error::DimensionMismatch { expected: params.dim(), found: x.cols() });
    }
    let p = params.dim();
    let (a, b) = if a <= b { (a, b) } else { (b, a) };
    if b > p || (a == 0 && b == 0) {
        return Ok(None);
    }
    let n = x.rows();
    let half = T::lit(0.5);
    let quarter = T::lit(0.25);
    let mut m = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let (xi, xj) = (x.row(i), x.row(j));
            let s: T = params.theta1.iter().zip(xi.iter().zip(xj)).map(|(&t, (&u, &v))| t * (u - v) * (u - v)).sum();
            let e = (-half * s).exp();
            let v = if a == 0 {
                let d = xi[b - 1] - xj[b - 1];
                -half * e * d * d
            } else {
                let da = xi[a - 1] - xj[a - 1];
                let db = xi[b - 1] - xj[b - 1];
                quarter * params.theta0 * e * da * da * db * db
            };
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    Ok(Some(m))
}

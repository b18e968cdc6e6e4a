//! LOESS local polynomial regression.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::linalg::{dot, Cholesky, Matrix};
use crate::scalar::Real;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LoessConfig<T> {
    /// Fraction of the training points in each local window, in (0, 1].
    pub span: T,
    /// Local polynomial degree, 1 or 2.
    pub degree: usize,
    /// Number of bisquare robustness passes.
    pub robust_iters: usize,
}

impl<T: Real> Default for LoessConfig<T> {
    fn default() -> Self {
        Self { span: T::lit(0.75), degree: 2, robust_iters: 0 }
    }
}

impl<T: Real> LoessConfig<T> {
    pub fn validate(&self, n: usize) -> Result<()> {
        if !(self.span > T::zero() && self.span <= T::one()) {
            return Err(Error::InvalidParameter(format!("span must lie in (0, 1], got {}", self.span)));
        }
        if !(1..=2).contains(&self.degree) {
            return Err(Error::InvalidParameter(format!("degree must be 1 or 2, got {}", self.degree)));
        }
        if self.window(n) < self.degree + 1 {
            return Err(Error::InvalidParameter(format!(
                "span {} leaves {} points per window for degree {}",
                self.span,
                self.window(n),
                self.degree
            )));
        }
        Ok(())
    }

    /// `⌈span·n⌉`, capped at `n`.
    pub fn window(&self, n: usize) -> usize {
        let k = (self.span * T::from_usize_lossy(n)).ceil().to_f64_lossy() as usize;
        k.clamp(1, n)
    }
}

/// Monomials of `d = (x − c)/s` up to `degree`, including cross products.
fn design_row<T: Real>(x: &[T], c: &[T], s: T, degree: usize) -> Vec<T> {
    let d: Vec<T> = x.iter().zip(c).map(|(&a, &b)| (a - b) / s).collect();
    let mut row = Vec::with_capacity(1 + d.len() + d.len() * (d.len() + 1) / 2);
    row.push(T::one());
    row.extend_from_slice(&d);
    if degree == 2 {
        for i in 0..d.len() {
            for j in i..d.len() {
                row.push(d[i] * d[j]);
            }
        }
    }
    row
}

fn tricube<T: Real>(r: T) -> T {
    if r >= T::one() {
        return T::zero();
    }
    let c = T::one() - r * r * r;
    c * c * c
}

fn bisquare<T: Real>(r: T) -> T {
    if r.abs() >= T::one() {
        return T::zero();
    }
    let c = T::one() - r * r;
    c * c
}

fn distance<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&x, &y)| (x - y) * (x - y)).sum::<T>().sqrt()
}

fn local_fit<T: Real>(data: &Dataset<T>, u: &[T], config: &LoessConfig<T>, robustness: &[T]) -> T {
    let n = data.len();
    let k = config.window(n);
    let mut order: Vec<(T, usize)> = (0..n).map(|i| (distance(data.x.row(i), u), i)).collect();
    // ties broken by index so the window does not depend on row order beyond ties
    order.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite distances").then(a.1.cmp(&b.1)));
    let dmax = order[k - 1].0;

    let mut window: Vec<(usize, T)> = Vec::with_capacity(k);
    for &(d, i) in &order {
        // every point tied with the k-th distance joins the window
        if d > dmax {
            break;
        }
        let w = if dmax > T::zero() { tricube(d / (dmax * T::lit(1.0 + 1e-10))) } else { T::one() };
        let w = w * robustness[i];
        if w > T::zero() {
            window.push((i, w));
        }
    }
    if window.is_empty() {
        return weighted_mean(data, &order[..k].iter().map(|&(_, i)| (i, robustness[i].max(T::lit(1e-300)))).collect::<Vec<_>>());
    }

    // centre and scale the local coordinates on the window for conditioning
    let p = data.dim();
    let total: T = window.iter().map(|&(_, w)| w).sum();
    let centre: Vec<T> = (0..p).map(|l| window.iter().map(|&(i, w)| w * data.x[(i, l)]).sum::<T>() / total).collect();
    let radius = window.iter().map(|&(i, _)| distance(data.x.row(i), &centre)).fold(T::zero(), T::max);
    if radius > T::zero() {
        for degree in (1..=config.degree).rev() {
            if let Some(v) = local_polynomial(data, &window, u, &centre, radius, degree) {
                return v;
            }
        }
    }
    weighted_mean(data, &window)
}

/// Weighted least-squares polynomial evaluated at `u`; `None` when the local
/// design is numerically singular.
fn local_polynomial<T: Real>(data: &Dataset<T>, window: &[(usize, T)], u: &[T], c: &[T], s: T, degree: usize) -> Option<T> {
    let m = design_row(data.x.row(window[0].0), c, s, degree).len();
    let mut xtwx = Matrix::zeros(m, m);
    let mut xtwy = vec![T::zero(); m];
    for &(i, w) in window {
        let row = design_row(data.x.row(i), c, s, degree);
        for a in 0..m {
            xtwy[a] = xtwy[a] + w * row[a] * data.y[i];
            for b in 0..m {
                xtwx[(a, b)] = xtwx[(a, b)] + w * row[a] * row[b];
            }
        }
    }
    let scale = (0..m).map(|a| xtwx[(a, a)]).fold(T::zero(), T::max);
    let tol = T::lit(1e-10) * scale;
    let chol = Cholesky::new(&xtwx).ok()?;
    if !(0..m).all(|a| chol.factor()[(a, a)] * chol.factor()[(a, a)] > tol) {
        return None;
    }
    let coef = chol.solve(&xtwy);
    Some(dot(&coef, &design_row(u, c, s, degree)))
}

fn weighted_mean<T: Real>(data: &Dataset<T>, window: &[(usize, T)]) -> T {
    let total: T = window.iter().map(|&(_, w)| w).sum();
    window.iter().map(|&(i, w)| w * data.y[i]).sum::<T>() / total
}

fn median<T: Real>(mut v: Vec<T>) -> T {
    v.sort_by(|a, b| a.partial_cmp(b).expect("finite residuals"));
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) * T::lit(0.5)
    }
}

/// Robustness weights after `config.robust_iters` bisquare passes.
pub fn robustness_weights<T: Real>(data: &Dataset<T>, config: &LoessConfig<T>) -> Result<Vec<T>> {
    config.validate(data.len())?;
    let n = data.len();
    let mut weights = vec![T::one(); n];
    for _ in 0..config.robust_iters {
        let residuals: Vec<T> =
            (0..n).into_par_iter().map(|i| data.y[i] - local_fit(data, data.x.row(i), config, &weights)).collect();
        let s = median(residuals.iter().map(|r| r.abs()).collect());
        if !(s > T::zero()) {
            break;
        }
        let six_s = T::lit(6.0) * s;
        weights = residuals.iter().map(|&r| bisquare(r / six_s)).collect();
    }
    Ok(weights)
}

/// LOESS predictions at each row of `u`.
pub fn loess_fit_predict<T: Real>(data: &Dataset<T>, u: &Matrix<T>, config: &LoessConfig<T>) -> Result<Vec<T>> {
    if data.is_empty() {
        return Err(Error::InvalidParameter("empty dataset".into()));
    }
    data.check_finite()?;
    if u.cols() != data.dim() {
        return Err(Error::DimensionMismatch { expected: data.dim(), found: u.cols() });
    }
    let weights = robustness_weights(data, config)?;
    Ok((0..u.rows()).into_par_iter().map(|j| local_fit(data, u.row(j), config, &weights)).collect())
}

/// Approximate pointwise band from the local residual variance. Not an exact
/// standard error; intended for curve plots only.
pub fn loess_band<T: Real>(data: &Dataset<T>, u: &Matrix<T>, config: &LoessConfig<T>, z: T) -> Result<Vec<(T, T, T)>> {
    let fitted = loess_fit_predict(data, &data.x, config)?;
    let n = T::from_usize_lossy(data.len());
    let rss: T = fitted.iter().zip(&data.y).map(|(&f, &y)| (y - f) * (y - f)).sum();
    let sd = (rss / n).sqrt();
    let pred = loess_fit_predict(data, u, config)?;
    Ok(pred.into_iter().map(|m| (m, m - z * sd, m + z * sd)).collect())
}

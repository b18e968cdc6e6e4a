use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::scalar::Real;

/// Covariates `X` (one row per observation) and responses `y`.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset<T> {
    pub x: Matrix<T>,
    pub y: Vec<T>,
}

impl<T: Real> Dataset<T> {
    pub fn new(x: Matrix<T>, y: Vec<T>) -> Result<Self> {
        if x.rows() != y.len() {
            return Err(Error::DimensionMismatch { expected: x.rows(), found: y.len() });
        }
        Ok(Self { x, y })
    }

    /// One-covariate dataset.
    pub fn from_1d(x: &[T], y: Vec<T>) -> Result<Self> {
        Self::new(Matrix::from_row_major(x.len(), 1, x.to_vec())?, y)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.y.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.x.cols()
    }

    pub fn check_finite(&self) -> Result<()> {
        if self.x.as_slice().iter().chain(&self.y).all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(Error::NonFinite("dataset contains NaN or infinite values".into()))
        }
    }

    /// Rows reordered as `order[0], order[1], ...`.
    pub fn permuted(&self, order: &[usize]) -> Self {
        let p = self.dim();
        let x = Matrix::from_fn(order.len(), p, |i, j| self.x[(order[i], j)]);
        let y = order.iter().map(|&i| self.y[i]).collect();
        Self { x, y }
    }

    /// The first `k` observations.
    pub fn head(&self, k: usize) -> Self {
        self.permuted(&(0..k).collect::<Vec<_>>())
    }
}

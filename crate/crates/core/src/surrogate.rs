//! Surrogate linear projection: OLS of the response on intercept-augmented
//! covariates.
//!
//! The fitted coefficient vector is the only piece of the observed data the
//! weighting engine ever sees.

use alloc::vec::Vec;
use core::ops::Deref;

use nalgebra::{DMatrix, DVector};

use crate::math::sqrt;
use crate::{Error, Result};

/// Fits whose Gram matrix `XᵀX` has a larger condition number are rejected.
pub const DEFAULT_CONDITION_THRESHOLD: f64 = 1e12;

/// Paired observations `(x_i, y_i)` with covariates of a common dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    xs: Vec<Vec<f64>>,
    ys: Vec<f64>,
    dim: usize,
}

impl Dataset {
    pub fn new(xs: Vec<Vec<f64>>, ys: Vec<f64>) -> Result<Self> {
        if xs.is_empty() {
            return Err(Error::EmptyInput);
        }
        if xs.len() != ys.len() {
            return Err(Error::LengthMismatch { expected: xs.len(), found: ys.len() });
        }
        let dim = xs[0].len();
        if let Some(bad) = xs.iter().find(|x| x.len() != dim) {
            return Err(Error::DimensionMismatch { expected: dim, found: bad.len() });
        }
        Ok(Self { xs, ys, dim })
    }

    pub fn len(&self) -> usize {
        self.ys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ys.is_empty()
    }

    /// Covariate dimension `d`.
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn xs(&self) -> &[Vec<f64>] {
        &self.xs
    }

    pub fn ys(&self) -> &[f64] {
        &self.ys
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[f64], f64)> + '_ {
        self.xs.iter().map(Vec::as_slice).zip(self.ys.iter().copied())
    }
}

/// `(1, x_1, …, x_d)`.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedRow(Vec<f64>);

impl AugmentedRow {
    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl Deref for AugmentedRow {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

pub fn augment(x: &[f64]) -> AugmentedRow {
    let mut v = Vec::with_capacity(x.len() + 1);
    v.push(1.0);
    v.extend_from_slice(x);
    AugmentedRow(v)
}

/// Fitted projection coefficients, intercept first, plus fit diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct SurrogateFit {
    pub beta: Vec<f64>,
    /// Observations used; zero for coefficients supplied analytically.
    pub n_fit: usize,
    /// `Σ r_i² / (n − d − 1)`, or zero when `n = d + 1`.
    pub residual_variance: f64,
    /// Condition number of `XᵀX`.
    pub gram_condition: f64,
}

impl SurrogateFit {
    /// Wraps known coefficients, e.g. an analytic best linear projection.
    pub fn from_coefficients(beta: Vec<f64>) -> Result<Self> {
        if beta.is_empty() {
            return Err(Error::EmptyInput);
        }
        if beta.iter().any(|b| !b.is_finite()) {
            return Err(Error::NonFinite("coefficient"));
        }
        Ok(Self { beta, n_fit: 0, residual_variance: 0.0, gram_condition: 1.0 })
    }

    /// Covariate dimension `d` (coefficients minus intercept).
    pub fn dim(&self) -> usize {
        self.beta.len() - 1
    }

    pub fn intercept(&self) -> f64 {
        self.beta[0]
    }

    pub fn slopes(&self) -> &[f64] {
        &self.beta[1..]
    }

    /// `β̂ᵀ(1, x)` without a dimension check.
    #[inline]
    pub fn predict_unchecked(&self, x: &[f64]) -> f64 {
        let mut acc = self.beta[0];
        for (b, xi) in self.beta[1..].iter().zip(x) {
            acc += b * xi;
        }
        acc
    }

    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: x.len() });
        }
        Ok(self.predict_unchecked(x))
    }
}

/// `y − β̂ᵀ(1, x)`.
pub fn residual(fit: &SurrogateFit, x: &[f64], y: f64) -> Result<f64> {
    Ok(y - fit.predict(x)?)
}

pub fn fit_ols(data: &Dataset) -> Result<SurrogateFit> {
    fit_ols_with_threshold(data, DEFAULT_CONDITION_THRESHOLD)
}

/// Least squares via Householder QR of the design matrix. The Gram condition
/// number is read off the singular values of `R`, which equal those of `X`.
pub fn fit_ols_with_threshold(data: &Dataset, condition_threshold: f64) -> Result<SurrogateFit> {
    let n = data.len();
    let cols = data.dim() + 1;
    if n < cols {
        return Err(Error::SingularDesign { condition: f64::INFINITY, threshold: condition_threshold });
    }
    if data.ys.iter().chain(data.xs.iter().flatten()).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("observation"));
    }

    let design = DMatrix::from_fn(n, cols, |i, j| if j == 0 { 1.0 } else { data.xs[i][j - 1] });
    let mut rhs = DVector::from_column_slice(&data.ys);

    let qr = design.qr();
    let r = qr.r();
    let sv = r.clone().singular_values();
    let s_max = sv.max();
    let s_min = sv.min();
    let condition = if s_min > 0.0 { (s_max / s_min) * (s_max / s_min) } else { f64::INFINITY };
    if !(condition <= condition_threshold) {
        return Err(Error::SingularDesign { condition, threshold: condition_threshold });
    }

    qr.q_tr_mul(&mut rhs);
    let head = rhs.rows(0, cols).into_owned();
    let beta = r
        .solve_upper_triangular(&head)
        .ok_or(Error::SingularDesign { condition, threshold: condition_threshold })?;
    let beta: Vec<f64> = beta.iter().copied().collect();

    let fit = SurrogateFit { beta, n_fit: n, residual_variance: 0.0, gram_condition: condition };
    let residual_variance = if n > cols {
        let ss: f64 = data.iter().map(|(x, y)| {
            let r = y - fit.predict_unchecked(x);
            r * r
        }).sum();
        ss / (n - cols) as f64
    } else {
        0.0
    };
    Ok(SurrogateFit { residual_variance, ..fit })
}

/// Root-mean-square of a slice, used as a scale in tolerance checks.
pub fn rms(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    sqrt(values.iter().map(|v| v * v).sum::<f64>() / values.len() as f64)
}

//! Least-squares engine: OLS with classical inference, Durbin–Watson,
//! Cochrane–Orcutt, linear trend fits and correlation significance.
//!
//! Fits use a Householder QR of the column-equilibrated design. Rank is
//! judged on the equilibrated matrix: a design whose smallest-to-largest
//! singular value ratio falls below [`RANK_TOL`] is rejected and the
//! offending columns are named.

mod dw_bounds;

use std::fmt;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::stats;

pub use dw_bounds::{dw_bounds, dw_lower_bound};

pub const RANK_TOL: f64 = 1e-10;

/// Residual sum of squares at or below this fraction of `Σy²` counts as an exact fit.
const EXACT_FIT_TOL: f64 = 1e-24;

/// A t-statistic, with explicit sentinels for zero standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TStat {
    Finite(f64),
    PosInfinity,
    NegInfinity,
}

impl TStat {
    /// Numeric value for comparisons; sentinels map to ±∞.
    pub fn value(self) -> f64 {
        match self {
            TStat::Finite(v) => v,
            TStat::PosInfinity => f64::INFINITY,
            TStat::NegInfinity => f64::NEG_INFINITY,
        }
    }

    pub fn is_finite(self) -> bool {
        matches!(self, TStat::Finite(_))
    }

    fn signed_infinity(sign: f64) -> TStat {
        if sign > 0.0 {
            TStat::PosInfinity
        } else {
            TStat::NegInfinity
        }
    }
}

impl fmt::Display for TStat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TStat::Finite(v) => match f.precision() {
                Some(p) => write!(f, "{v:.p$}"),
                None => write!(f, "{v}"),
            },
            TStat::PosInfinity => f.write_str("inf"),
            TStat::NegInfinity => f.write_str("-inf"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegressionFit {
    /// In design-column order; intercept first by convention.
    pub coefficients: Vec<f64>,
    pub std_errors: Vec<f64>,
    pub t_stats: Vec<TStat>,
    pub r_squared: f64,
    pub residuals: Vec<f64>,
    pub ssr: f64,
    pub n_obs: usize,
    pub n_params: usize,
    /// `None` when every residual is zero.
    pub durbin_watson: Option<f64>,
    pub has_intercept: bool,
}

impl RegressionFit {
    /// Classical residual variance `SSR / (n − k)`.
    pub fn sigma2(&self) -> f64 {
        self.ssr / (self.n_obs - self.n_params) as f64
    }
}

fn singular_ratio(m: &DMatrix<f64>) -> f64 {
    let sv = m.clone().svd(false, false).singular_values;
    let max = sv.max();
    if max <= 0.0 {
        0.0
    } else {
        sv.min() / max
    }
}

/// Columns of an equilibrated design that lie in the span of earlier columns.
fn dependent_columns(xs: &DMatrix<f64>, norms: &[f64]) -> Vec<usize> {
    let mut accepted: Vec<usize> = Vec::new();
    let mut dependent = Vec::new();
    for j in 0..xs.ncols() {
        if norms[j] == 0.0 {
            dependent.push(j);
            continue;
        }
        let mut cols = accepted.clone();
        cols.push(j);
        let sub = xs.select_columns(cols.iter());
        if singular_ratio(&sub) < RANK_TOL {
            dependent.push(j);
        } else {
            accepted.push(j);
        }
    }
    dependent
}

fn has_constant_column(x: &DMatrix<f64>) -> bool {
    x.column_iter().any(|c| {
        let first = c[0];
        first != 0.0 && c.iter().all(|&v| v == first)
    })
}

/// Ordinary least squares of `y` on the columns of `x`.
///
/// Standard errors are classical with `n − k` degrees of freedom. When the
/// design contains a nonzero constant column, R² is centered; otherwise it is
/// taken about zero.
pub fn ols_fit(x: &DMatrix<f64>, y: &[f64]) -> Result<RegressionFit> {
    let (n, k) = x.shape();
    if y.len() != n {
        return Err(Error::InvalidArgument(format!(
            "design has {n} rows but y has {} values",
            y.len()
        )));
    }
    if k == 0 || n <= k {
        return Err(Error::Insufficient(format!("need n > k, got n = {n}, k = {k}")));
    }

    let norms: Vec<f64> = x.column_iter().map(|c| c.norm()).collect();
    let mut xs = x.clone();
    for (j, &s) in norms.iter().enumerate() {
        if s > 0.0 {
            xs.column_mut(j).scale_mut(1.0 / s);
        }
    }
    if norms.contains(&0.0) || singular_ratio(&xs) < RANK_TOL {
        return Err(Error::RankDeficient {
            columns: dependent_columns(&xs, &norms),
        });
    }

    let qr = xs.qr();
    let q = qr.q();
    let r = qr.r();
    let yv = DVector::from_column_slice(y);
    let qty = q.transpose() * &yv;
    let scaled = r
        .solve_upper_triangular(&qty)
        .ok_or(Error::RankDeficient { columns: Vec::new() })?;
    let coefficients: Vec<f64> = scaled.iter().zip(&norms).map(|(b, s)| b / s).collect();

    let fitted = x * DVector::from_column_slice(&coefficients);
    let residuals: Vec<f64> = y.iter().zip(fitted.iter()).map(|(a, b)| a - b).collect();
    let ssr: f64 = residuals.iter().map(|e| e * e).sum();
    let yy: f64 = y.iter().map(|v| v * v).sum();
    let exact = ssr <= EXACT_FIT_TOL * yy;

    let has_intercept = has_constant_column(x);
    let sst = if has_intercept {
        let m = stats::mean(y);
        y.iter().map(|v| (v - m) * (v - m)).sum()
    } else {
        yy
    };
    let r_squared = if sst > 0.0 {
        if exact {
            1.0
        } else {
            (1.0 - ssr / sst).clamp(0.0, 1.0)
        }
    } else {
        0.0
    };

    let sigma2 = if exact { 0.0 } else { ssr / (n - k) as f64 };
    let identity = DMatrix::<f64>::identity(k, k);
    let r_inv = r
        .solve_upper_triangular(&identity)
        .ok_or(Error::RankDeficient { columns: Vec::new() })?;
    let coef_scale = coefficients.iter().fold(1.0f64, |m, b| m.max(b.abs()));
    let mut std_errors = Vec::with_capacity(k);
    let mut t_stats = Vec::with_capacity(k);
    for j in 0..k {
        let row_norm2: f64 = r_inv.row(j).iter().map(|v| v * v).sum();
        let se = (sigma2 * row_norm2).sqrt() / norms[j];
        let b = coefficients[j];
        let t = if se > 0.0 {
            TStat::Finite(b / se)
        } else if b.abs() > 1e-10 * coef_scale {
            TStat::signed_infinity(b)
        } else {
            TStat::Finite(0.0)
        };
        std_errors.push(se);
        t_stats.push(t);
    }

    let durbin_watson = if exact { None } else { durbin_watson(&residuals).ok() };

    Ok(RegressionFit {
        coefficients,
        std_errors,
        t_stats,
        r_squared,
        residuals,
        ssr,
        n_obs: n,
        n_params: k,
        durbin_watson,
        has_intercept,
    })
}

/// `Σ(e_t − e_{t−1})² / Σe_t²`.
pub fn durbin_watson(residuals: &[f64]) -> Result<f64> {
    if residuals.len() < 2 {
        return Err(Error::Insufficient("Durbin-Watson needs at least 2 residuals".into()));
    }
    let den: f64 = residuals.iter().map(|e| e * e).sum();
    if den == 0.0 {
        return Err(Error::ZeroVariance("all residuals are zero".into()));
    }
    let num: f64 = residuals.windows(2).map(|w| (w[1] - w[0]).powi(2)).sum();
    Ok(num / den)
}

/// Quasi-differences `(y_t − ρ y_{t−1}, X_t − ρ X_{t−1})`, dropping the first row.
pub fn quasi_difference(x: &DMatrix<f64>, y: &[f64], rho: f64) -> (DMatrix<f64>, Vec<f64>) {
    let n = x.nrows();
    let xd = DMatrix::from_fn(n - 1, x.ncols(), |i, j| x[(i + 1, j)] - rho * x[(i, j)]);
    let yd = y.windows(2).map(|w| w[1] - rho * w[0]).collect();
    (xd, yd)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CochraneOrcuttOptions {
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for CochraneOrcuttOptions {
    fn default() -> Self {
        CochraneOrcuttOptions {
            tolerance: 1e-6,
            max_iterations: 50,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CochraneOrcuttFit {
    pub rho: f64,
    pub iterations: usize,
    /// Fit on the quasi-differenced data; coefficients are on the original scale.
    pub fit: RegressionFit,
}

pub fn cochrane_orcutt(x: &DMatrix<f64>, y: &[f64]) -> Result<CochraneOrcuttFit> {
    cochrane_orcutt_with(x, y, CochraneOrcuttOptions::default())
}

/// Iterated Cochrane–Orcutt: estimate ρ from residuals on the original data,
/// quasi-difference, refit, and repeat until ρ settles.
pub fn cochrane_orcutt_with(
    x: &DMatrix<f64>,
    y: &[f64],
    opts: CochraneOrcuttOptions,
) -> Result<CochraneOrcuttFit> {
    let (n, k) = x.shape();
    if n <= k + 1 {
        return Err(Error::Insufficient(format!(
            "Cochrane-Orcutt needs n > k + 1, got n = {n}, k = {k}"
        )));
    }
    let mut beta = DVector::from_vec(ols_fit(x, y)?.coefficients);
    let mut previous: Option<f64> = None;
    let mut rho = 0.0;
    for iteration in 1..=opts.max_iterations {
        let fitted = x * &beta;
        let e: Vec<f64> = y.iter().zip(fitted.iter()).map(|(a, b)| a - b).collect();
        let num: f64 = e.windows(2).map(|w| w[1] * w[0]).sum();
        let den: f64 = e[..n - 1].iter().map(|v| v * v).sum();
        if den == 0.0 {
            return Err(Error::ZeroVariance("residuals vanish; rho undefined".into()));
        }
        rho = num / den;
        if rho.abs() >= 1.0 {
            return Err(Error::NonStationary { rho });
        }
        let (xd, yd) = quasi_difference(x, y, rho);
        let fit = ols_fit(&xd, &yd)?;
        beta = DVector::from_column_slice(&fit.coefficients);
        if previous.is_some_and(|p| (rho - p).abs() < opts.tolerance) {
            return Ok(CochraneOrcuttFit {
                rho,
                iterations: iteration,
                fit,
            });
        }
        previous = Some(rho);
    }
    Err(Error::NotConverged {
        rho,
        iterations: opts.max_iterations,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrendFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_t_stat: TStat,
    pub residuals: Vec<f64>,
}

/// OLS of `values` on `(1, t)` with `t = 0..n−1`.
pub fn time_trend_fit(values: &[f64]) -> Result<TrendFit> {
    let n = values.len();
    if n < 3 {
        return Err(Error::Insufficient(format!("trend fit needs 3 values, got {n}")));
    }
    if values.iter().all(|&v| v == values[0]) {
        return Ok(TrendFit {
            slope: 0.0,
            intercept: values[0],
            slope_t_stat: TStat::Finite(0.0),
            residuals: vec![0.0; n],
        });
    }
    let x = DMatrix::from_fn(n, 2, |i, j| if j == 0 { 1.0 } else { i as f64 });
    let fit = ols_fit(&x, values)?;
    Ok(TrendFit {
        slope: fit.coefficients[1],
        intercept: fit.coefficients[0],
        slope_t_stat: fit.t_stats[1],
        residuals: fit.residuals,
    })
}

/// t-statistic of a Pearson correlation, `r·√(n−2)/√(1−r²)`.
///
/// Correlations within 1e-12 of ±1 are treated as exact and map to the
/// infinite sentinels.
pub fn corr_t_stat(r: f64, n: usize) -> TStat {
    if 1.0 - r.abs() <= 1e-12 {
        return TStat::signed_infinity(r);
    }
    TStat::Finite(r * ((n as f64 - 2.0) / (1.0 - r * r)).sqrt())
}

pub fn corr_with_tstat(x: &[f64], y: &[f64]) -> Result<(f64, TStat)> {
    if x.len() != y.len() {
        return Err(Error::InvalidArgument("correlation inputs differ in length".into()));
    }
    if x.len() < 3 {
        return Err(Error::Insufficient(format!(
            "correlation needs 3 observations, got {}",
            x.len()
        )));
    }
    let r = stats::pearson(x, y).ok_or_else(|| Error::ZeroVariance("correlation input is constant".into()))?;
    Ok((r, corr_t_stat(r, x.len())))
}

/// t-statistic of a mean correlation under cross-coefficient independence.
pub fn mean_corr_tstat(mean: f64, sigma: f64, n: usize) -> Result<f64> {
    if sigma <= 0.0 || n < 2 {
        return Err(Error::InvalidArgument(format!(
            "need sigma > 0 and n >= 2, got sigma = {sigma}, n = {n}"
        )));
    }
    Ok(mean / (sigma / (n as f64).sqrt()))
}

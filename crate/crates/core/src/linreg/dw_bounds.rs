//! Critical bounds of the Durbin–Watson statistic.
//!
//! With `k` fitted parameters (intercept included) the bounding statistics are
//! ratios of quadratic forms in independent normals,
//!
//! ```text
//! d_L = Σ_{i=1}^{n−k} ν_i ξ_i² / Σ ξ_i²,   d_U = Σ_{i=1}^{n−k} ν_{i+k−1} ξ_i² / Σ ξ_i²,
//! ν_j = 2(1 − cos(πj/n)),
//! ```
//!
//! and `P(d < c) = P(Σ (ν_i − c) ξ_i² < 0)` is evaluated with Imhof's
//! inversion integral. The critical value is found by bisection on `c`.

use std::f64::consts::PI;

use crate::error::{Error, Result};

fn eigenvalues(n: usize) -> Vec<f64> {
    (0..n).map(|j| 2.0 * (1.0 - (PI * j as f64 / n as f64).cos())).collect()
}

/// `P(Σ λ_i ξ_i² < 0)` by Imhof's formula.
fn prob_negative(lambdas: &[f64]) -> f64 {
    let half_sum: f64 = 0.5 * lambdas.iter().sum::<f64>();
    let log_rho = |u: f64| 0.25 * lambdas.iter().map(|l| (l * l * u * u).ln_1p()).sum::<f64>();
    let integrand = |u: f64| {
        if u == 0.0 {
            return half_sum;
        }
        let theta: f64 = 0.5 * lambdas.iter().map(|l| (l * u).atan()).sum::<f64>();
        theta.sin() / (u * log_rho(u).exp())
    };

    // truncate where the envelope 1/(u·ρ(u)) is negligible
    let mut upper: f64 = 1.0;
    while upper < 1e6 && -(upper.ln() + log_rho(upper)) > -30.0 {
        upper *= 1.5;
    }
    let rate = 0.5 * lambdas.iter().map(|l| l.abs()).sum::<f64>();
    let mut steps = ((upper * rate.max(1.0)) * 16.0).ceil() as usize;
    steps = steps.clamp(2_000, 2_000_000);
    if steps % 2 == 1 {
        steps += 1;
    }
    let h = upper / steps as f64;
    let mut acc = integrand(0.0) + integrand(upper);
    for i in 1..steps {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * integrand(i as f64 * h);
    }
    let integral = acc * h / 3.0;
    (0.5 - integral / PI).clamp(0.0, 1.0)
}

fn critical_value(nus: &[f64], alpha: f64) -> f64 {
    let (mut lo, mut hi) = (0.0, 4.0);
    for _ in 0..40 {
        let mid = 0.5 * (lo + hi);
        let lambdas: Vec<f64> = nus.iter().map(|v| v - mid).collect();
        if prob_negative(&lambdas) < alpha {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Lower and upper `alpha`-level bounds for `n` observations and `regressors`
/// explanatory variables excluding the intercept.
pub fn dw_bounds(n: usize, regressors: usize, alpha: f64) -> Result<(f64, f64)> {
    let nu = checked_eigenvalues(n, regressors, alpha)?;
    let k = regressors + 1;
    Ok((critical_value(&nu[1..=n - k], alpha), critical_value(&nu[k..n], alpha)))
}

pub fn dw_lower_bound(n: usize, regressors: usize, alpha: f64) -> Result<f64> {
    let nu = checked_eigenvalues(n, regressors, alpha)?;
    Ok(critical_value(&nu[1..=n - regressors - 1], alpha))
}

fn checked_eigenvalues(n: usize, regressors: usize, alpha: f64) -> Result<Vec<f64>> {
    let k = regressors + 1;
    if n <= k + 1 {
        return Err(Error::Insufficient(format!(
            "Durbin-Watson bounds need n > k + 1, got n = {n}, k = {k}"
        )));
    }
    if !(0.0 < alpha && alpha < 1.0) {
        return Err(Error::InvalidArgument(format!("alpha {alpha} outside (0, 1)")));
    }
    Ok(eigenvalues(n))
}

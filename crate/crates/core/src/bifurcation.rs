//! Spectral data of the linearization about the constant solution `u = 1`.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpectralError {
    #[error("branch index must be at least 1")]
    ZeroIndex,
    #[error("exponent q must exceed 1 (got {0})")]
    Exponent(f64),
    #[error("period must be positive (got {0})")]
    Period(f64),
}

/// Parameter value where the `k`-th even mode of the linearization becomes
/// periodic.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DegeneracyInstant {
    pub k: u32,
    pub mu_k: f64,
    pub omega_k: f64,
}

fn check(q: f64, period: f64) -> Result<(), SpectralError> {
    if !(q > 1.0 && q.is_finite()) {
        return Err(SpectralError::Exponent(q));
    }
    if !(period > 0.0 && period.is_finite()) {
        return Err(SpectralError::Period(period));
    }
    Ok(())
}

pub fn degeneracy_instant(q: f64, period: f64, k: u32) -> Result<DegeneracyInstant, SpectralError> {
    check(q, period)?;
    if k == 0 {
        return Err(SpectralError::ZeroIndex);
    }
    let omega = 2.0 * PI * f64::from(k) / period;
    Ok(DegeneracyInstant {
        k,
        mu_k: omega * omega / (q - 1.0),
        omega_k: omega,
    })
}

/// `lambda_k(mu) = (2 pi k / T)^2 - (q - 1) mu`.
pub fn eigenvalue(q: f64, period: f64, mu: f64, k: u32) -> f64 {
    let omega = 2.0 * PI * f64::from(k) / period;
    omega * omega - (q - 1.0) * mu
}

/// Even eigenfunction `t -> cos(2 pi k t / T)`.
pub fn eigenfunction_even(period: f64, k: u32) -> impl Fn(f64) -> f64 {
    let omega = 2.0 * PI * f64::from(k) / period;
    move |t| (omega * t).cos()
}

/// Scaled parameter `x = T sqrt((q - 1) mu) / (2 pi)`; `mu_k` sits at `x = k`.
pub fn mode_coordinate(q: f64, period: f64, mu: f64) -> f64 {
    period * ((q - 1.0) * mu).sqrt() / (2.0 * PI)
}

/// Relative distance within which `x` is treated as sitting exactly on an
/// integer, so that `mu = mu_k` computed in floating point counts `k - 1`.
pub const INTEGER_SNAP: f64 = 1e-12;

/// Number of degeneracy instants strictly below `mu`.
pub fn count_lower_bound(q: f64, period: f64, mu: f64) -> u32 {
    let x = mode_coordinate(q, period, mu);
    if !(x > 1.0) {
        return 0;
    }
    let nearest = x.round();
    if (x - nearest).abs() <= INTEGER_SNAP * x {
        return (nearest as u32).saturating_sub(1);
    }
    x.floor() as u32
}

/// `T sqrt(q - 1) / (2 pi)`, the guaranteed growth rate of the count in `sqrt(mu)`.
pub fn asymptotic_density(q: f64, period: f64) -> f64 {
    period * (q - 1.0).sqrt() / (2.0 * PI)
}

//! The autonomous family `u'' = mu (u - |u|^(q-1) u)`, its first integral and
//! the explicit homoclinic orbit bounding the region of positive closed orbits.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParamError {
    #[error("q must exceed 1 (got {0})")]
    Exponent(f64),
    #[error("mu must be positive (got {0})")]
    Mu(f64),
    #[error("period must be positive (got {0})")]
    Period(f64),
    #[error("state value must be nonnegative (got {0})")]
    NegativeState(f64),
}

/// The triple `(q, mu, T)` of a periodic problem.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProblemParams {
    q: f64,
    mu: f64,
    period: f64,
}

impl ProblemParams {
    pub fn new(q: f64, mu: f64, period: f64) -> Result<Self, ParamError> {
        if !(q > 1.0) || !q.is_finite() {
            return Err(ParamError::Exponent(q));
        }
        if !(mu > 0.0) || !mu.is_finite() {
            return Err(ParamError::Mu(mu));
        }
        if !(period > 0.0) || !period.is_finite() {
            return Err(ParamError::Period(period));
        }
        Ok(Self { q, mu, period })
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    /// Same exponent and period, different `mu`.
    pub fn with_mu(&self, mu: f64) -> Result<Self, ParamError> {
        Self::new(self.q, mu, self.period)
    }

    pub fn with_period(&self, period: f64) -> Result<Self, ParamError> {
        Self::new(self.q, self.mu, period)
    }
}

/// A point `(u, u')` of the phase plane.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PhasePoint {
    pub u: f64,
    pub v: f64,
}

impl PhasePoint {
    pub const fn new(u: f64, v: f64) -> Self {
        Self { u, v }
    }

    pub fn is_finite(&self) -> bool {
        self.u.is_finite() && self.v.is_finite()
    }

    pub fn distance(&self, other: &PhasePoint) -> f64 {
        (self.u - other.u).hypot(self.v - other.v)
    }
}

/// `|u|^(q-1) u`, the odd extension of the power nonlinearity.
#[inline]
pub fn odd_power(u: f64, q: f64) -> f64 {
    if u == 0.0 {
        0.0
    } else {
        u.signum() * u.abs().powf(q)
    }
}

/// Restoring force `mu (u - |u|^(q-1) u)`.
#[inline]
pub fn force(p: &ProblemParams, u: f64) -> f64 {
    p.mu * (u - odd_power(u, p.q))
}

pub fn vector_field(p: &ProblemParams, x: PhasePoint) -> PhasePoint {
    PhasePoint::new(x.v, force(p, x.u))
}

/// Potential `V(u) = mu (u^(q+1)/(q+1) - u^2/2)`, for `u >= 0`.
pub fn potential(p: &ProblemParams, u: f64) -> Result<f64, ParamError> {
    if u < 0.0 || u.is_nan() {
        return Err(ParamError::NegativeState(u));
    }
    Ok(potential_unchecked(p, u))
}

#[inline]
pub(crate) fn potential_unchecked(p: &ProblemParams, u: f64) -> f64 {
    let q = p.q;
    p.mu * (u.powf(q + 1.0) / (q + 1.0) - 0.5 * u * u)
}

/// `V(u) - V(1)` evaluated without cancellation near the center `u = 1`.
///
/// With `x = u - 1`: `((1+x)^(q+1) - 1 - (q+1) x) / (q+1) - x^2 / 2`.
pub(crate) fn potential_above_center(p: &ProblemParams, u: f64) -> f64 {
    let q = p.q;
    let x = u - 1.0;
    if x.abs() < 0.5 {
        let lead = (q + 1.0) * x.ln_1p();
        let power_excess = lead.exp_m1() - (q + 1.0) * x;
        p.mu * (power_excess / (q + 1.0) - 0.5 * x * x)
    } else {
        potential_unchecked(p, u) - center_energy(p)
    }
}

/// First integral `H(u, v) = v^2/2 + V(u)`.
pub fn energy(p: &ProblemParams, x: PhasePoint) -> Result<f64, ParamError> {
    Ok(0.5 * x.v * x.v + potential(p, x.u)?)
}

/// Energy of the center `(1, 0)`: `mu (1/(q+1) - 1/2)`.
pub fn center_energy(p: &ProblemParams) -> f64 {
    p.mu * (1.0 / (p.q + 1.0) - 0.5)
}

/// Constants of the homoclinic orbit `A cosh(B t)^C`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HomoclinicData {
    pub amplitude: f64,
    pub decay_rate: f64,
    pub exponent: f64,
    pub center_energy: f64,
    pub homoclinic_energy: f64,
}

impl HomoclinicData {
    pub fn new(p: &ProblemParams) -> Self {
        let q = p.q;
        Self {
            amplitude: amplitude_for_exponent(q),
            decay_rate: 0.5 * (q - 1.0) * p.mu.sqrt(),
            exponent: -2.0 / (q - 1.0),
            center_energy: center_energy(p),
            homoclinic_energy: 0.0,
        }
    }
}

fn amplitude_for_exponent(q: f64) -> f64 {
    // ((q+1)/2)^(1/(q-1)) = exp(ln(1 + (q-1)/2) / (q-1)), stable as q -> 1+
    let h = q - 1.0;
    ((0.5 * h).ln_1p() / h).exp()
}

/// Bound `A_q` on the sup norm of every positive periodic solution.
pub fn amplitude_bound(p: &ProblemParams) -> f64 {
    amplitude_for_exponent(p.q)
}

/// `ln cosh(x)` without overflow for large `|x|`.
fn ln_cosh(x: f64) -> f64 {
    let a = x.abs();
    a + (-2.0 * a).exp().ln_1p() - std::f64::consts::LN_2
}

/// The homoclinic solution `u(t) = A cosh(B t)^C`, with `u(0) = A`.
pub fn homoclinic_solution(p: &ProblemParams, t: f64) -> f64 {
    let h = HomoclinicData::new(p);
    h.amplitude * (h.exponent * ln_cosh(h.decay_rate * t)).exp()
}

/// Phase point of the homoclinic orbit at time `t`, derivative taken from the
/// closed form: `u' = A B C cosh^(C-1) sinh = B C tanh(B t) u`.
pub fn homoclinic_state(p: &ProblemParams, t: f64) -> PhasePoint {
    let h = HomoclinicData::new(p);
    let u = homoclinic_solution(p, t);
    let v = h.decay_rate * h.exponent * (h.decay_rate * t).tanh() * u;
    PhasePoint::new(u, v)
}

/// Analytic second derivative of the homoclinic solution.
///
/// `u'' = B^2 C u [ (C - 1) tanh^2(B t) + 1 ]`.
pub fn homoclinic_second_derivative(p: &ProblemParams, t: f64) -> f64 {
    let h = HomoclinicData::new(p);
    let u = homoclinic_solution(p, t);
    let th = (h.decay_rate * t).tanh();
    h.decay_rate * h.decay_rate * h.exponent * u * ((h.exponent - 1.0) * th * th + 1.0)
}

/// Strict interior of the region bounded by the homoclinic loop:
/// `0 < u < A_q` and `H(u, v) < 0`.
pub fn in_invariant_region(p: &ProblemParams, x: PhasePoint) -> bool {
    if !x.is_finite() || !(x.u > 0.0) || x.u >= amplitude_bound(p) {
        return false;
    }
    0.5 * x.v * x.v + potential_unchecked(p, x.u) < 0.0
}

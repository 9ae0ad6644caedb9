//! Checks that any candidate profile must pass to count as a solution.
//!
//! The integral identity and the Wirtinger margin are evaluated in the
//! normalized variable `w = mu^(1/(q-1)) u` after rescaling the period to
//! `2 pi`, where the equation reads `w'' = mu w - w^q`. Second derivatives
//! always come from that equation, never from differencing the samples.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::continuation::{count_zeros, PeriodicSolution, SolveError, SIMPLE_ZERO_SLOPE};
use crate::integrator::{integrate, IntegrateError, IntegratorConfig};
use crate::ode::{force, potential_unchecked, PhasePoint, ProblemParams};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    pub ode_residual: f64,
    pub energy_drift: f64,
    pub identity: f64,
    pub wirtinger: f64,
    pub zero_slope: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            ode_residual: 1e-8,
            energy_drift: 1e-10,
            identity: 1e-6,
            wirtinger: -1e-10,
            zero_slope: SIMPLE_ZERO_SLOPE,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum IdentityCheck {
    /// Constant profile: every integral vanishes.
    NotApplicable,
    Residual(f64),
}

impl IdentityCheck {
    pub fn value(&self) -> Option<f64> {
        match self {
            Self::NotApplicable => None,
            Self::Residual(r) => Some(*r),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub ode_residual_max: f64,
    pub energy_drift: f64,
    pub identity_relative_residual: Option<f64>,
    pub wirtinger_margin: f64,
    pub zero_count: usize,
    pub expected_zero_count: usize,
    pub zero_simplicity_min: Option<f64>,
    pub thresholds: Thresholds,
    pub ode_residual_pass: bool,
    pub energy_drift_pass: bool,
    pub identity_applicable: bool,
    pub identity_pass: bool,
    pub wirtinger_pass: bool,
    pub zero_count_pass: bool,
    pub zero_simplicity_pass: bool,
}

impl VerificationReport {
    pub fn all_passed(&self) -> bool {
        self.ode_residual_pass
            && self.energy_drift_pass
            && self.identity_pass
            && self.wirtinger_pass
            && self.zero_count_pass
            && self.zero_simplicity_pass
    }
}

/// `t -> T t / (2 pi)`: same samples, period `2 pi`, `mu -> T^2 mu / (4 pi^2)`.
pub fn rescale_to_2pi(sol: &PeriodicSolution) -> PeriodicSolution {
    let p = sol.params;
    let c = p.period() / (2.0 * PI);
    if c == 1.0 {
        return sol.clone();
    }
    let params = ProblemParams::new(p.q(), c * c * p.mu(), 2.0 * PI)
        .expect("rescaling preserves valid parameters");
    PeriodicSolution {
        params,
        profile: sol
            .profile
            .iter()
            .map(|x| PhasePoint::new(x.u, c * x.v))
            .collect(),
        energy: c * c * sol.energy,
        ..sol.clone()
    }
}

/// Profile of `w = mu^(1/(q-1)) u`, a solution of `w'' - mu w + w^q = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedProfile {
    pub mu: f64,
    pub q: f64,
    pub w: Vec<f64>,
    pub dw: Vec<f64>,
    /// `w''` through the equation for `u`.
    pub d2w: Vec<f64>,
    /// Max of `|w'' - mu w + w^q|` on the grid.
    pub residual: f64,
}

pub fn normalize_form(sol: &PeriodicSolution) -> NormalizedProfile {
    let p = &sol.params;
    let (q, mu) = (p.q(), p.mu());
    let c = mu.powf(1.0 / (q - 1.0));
    let w: Vec<f64> = sol.profile.iter().map(|x| c * x.u).collect();
    let dw = sol.profile.iter().map(|x| c * x.v).collect();
    let d2w: Vec<f64> = sol.profile.iter().map(|x| c * force(p, x.u)).collect();
    let residual = w
        .iter()
        .zip(&d2w)
        .map(|(&w, &d2)| (d2 - mu * w + w.powf(q)).abs())
        .fold(0.0, f64::max);
    NormalizedProfile {
        mu,
        q,
        w,
        dw,
        d2w,
        residual,
    }
}

/// `(sqrt w)'' = w''/(2 sqrt w) - w'^2/(4 w^(3/2))`.
fn sqrt_second_derivative(w: f64, dw: f64, d2w: f64) -> f64 {
    0.5 * d2w / w.sqrt() - 0.25 * dw * dw / (w * w.sqrt())
}

/// Relative mismatch of `mu (q-1) I1 = (2q/3 - 1/4) I2 + 4 I3` with
/// `I1 = int w'^2/w`, `I2 = int w'^4/w^3`, `I3 = int ((sqrt w)'')^2` over one
/// `2 pi` period (trapezoidal rule on the periodic grid).
pub fn identity_residual(sol: &PeriodicSolution) -> IdentityCheck {
    let wn = normalize_form(&rescale_to_2pi(sol));
    if wn.dw.iter().all(|&d| d == 0.0) {
        return IdentityCheck::NotApplicable;
    }
    let h = 2.0 * PI / wn.w.len() as f64;
    let (mut i1, mut i2, mut i3) = (0.0, 0.0, 0.0);
    for ((&w, &dw), &d2w) in wn.w.iter().zip(&wn.dw).zip(&wn.d2w) {
        let r = dw * dw / w;
        i1 += r;
        i2 += r * r / w;
        let f2 = sqrt_second_derivative(w, dw, d2w);
        i3 += f2 * f2;
    }
    let (i1, i2, i3) = (h * i1, h * i2, h * i3);
    let lhs = wn.mu * (wn.q - 1.0) * i1;
    let rhs = (2.0 * wn.q / 3.0 - 0.25) * i2 + 4.0 * i3;
    IdentityCheck::Residual((lhs - rhs).abs() / lhs.max(rhs))
}

/// `int f''^2 - int f'^2` over a uniform periodic grid of spacing `h`.
pub fn wirtinger_margin_from_derivatives(df: &[f64], d2f: &[f64], h: f64) -> f64 {
    let a: f64 = d2f.iter().map(|x| x * x).sum();
    let b: f64 = df.iter().map(|x| x * x).sum();
    h * (a - b)
}

/// Wirtinger margin of `f = sqrt(w)` after rescaling to period `2 pi`.
pub fn wirtinger_check(sol: &PeriodicSolution) -> f64 {
    let wn = normalize_form(&rescale_to_2pi(sol));
    let df: Vec<f64> =
        wn.w.iter()
            .zip(&wn.dw)
            .map(|(&w, &dw)| 0.5 * dw / w.sqrt())
            .collect();
    let d2f: Vec<f64> =
        wn.w.iter()
            .zip(&wn.dw)
            .zip(&wn.d2w)
            .map(|((&w, &dw), &d2w)| sqrt_second_derivative(w, dw, d2w))
            .collect();
    wirtinger_margin_from_derivatives(&df, &d2f, 2.0 * PI / wn.w.len() as f64)
}

/// Max over grid cells of the defect in `u''`: each cell is re-integrated from
/// its left sample, and the cell average of `u''` implied by the stored
/// samples, `(u'_{j+1} - u'_j)/h`, is compared with the one along the exact
/// flow.
pub fn ode_residual(sol: &PeriodicSolution) -> Result<f64, IntegrateError> {
    let n = sol.profile.len();
    let h = sol.grid_step();
    let p = sol.params;
    let defects: Result<Vec<f64>, IntegrateError> = (0..n)
        .into_par_iter()
        .map(|j| {
            let x0 = sol.profile[j];
            let x1 = sol.profile[(j + 1) % n];
            let cfg = IntegratorConfig::with_tolerances(1e-14, 1e-17 * x0.u.abs().min(1.0));
            let end = integrate(&p, x0, (0.0, h), &cfg)?.final_state();
            Ok((end.v - x1.v).abs() / h)
        })
        .collect();
    Ok(defects?.into_iter().fold(0.0, f64::max))
}

/// Max of `|u'' - mu (u - u^q)|` over supplied samples with known `u''`.
pub fn pointwise_ode_residual(p: &ProblemParams, u: &[f64], d2u: &[f64]) -> f64 {
    u.iter()
        .zip(d2u)
        .map(|(&u, &d2)| (d2 - force(p, u)).abs())
        .fold(0.0, f64::max)
}

/// Max deviation of `H(u, u')` from the stored orbit energy, in units of `|E_center|`.
pub fn energy_drift(sol: &PeriodicSolution) -> f64 {
    let p = &sol.params;
    let scale = crate::ode::center_energy(p).abs();
    sol.profile
        .iter()
        .map(|x| (0.5 * x.v * x.v + potential_unchecked(p, x.u) - sol.energy).abs() / scale)
        .fold(0.0, f64::max)
}

/// Run every check on `sol`; `sol.k` fixes the expected zero count `2k`.
pub fn verify(sol: &PeriodicSolution) -> Result<VerificationReport, SolveError> {
    if let Some(x) = sol.profile.iter().find(|x| !x.is_finite() || x.u <= 0.0) {
        return Err(SolveError::Invariant {
            reason: format!(
                "profile not positive and finite (u = {}, u' = {})",
                x.u, x.v
            ),
            diagnostics: Box::new(sol.diagnostics),
        });
    }
    let th = Thresholds::default();
    let ode = ode_residual(sol)?;
    let drift = energy_drift(sol);
    let identity = identity_residual(sol).value();
    let margin = wirtinger_check(sol);
    let zeros = count_zeros(sol)?;
    let slope = zeros.min_slope();
    let expected = 2 * sol.k as usize;
    Ok(VerificationReport {
        ode_residual_max: ode,
        energy_drift: drift,
        identity_relative_residual: identity,
        wirtinger_margin: margin,
        zero_count: zeros.count,
        expected_zero_count: expected,
        zero_simplicity_min: slope,
        thresholds: th,
        ode_residual_pass: ode < th.ode_residual,
        energy_drift_pass: drift < th.energy_drift,
        identity_applicable: identity.is_some(),
        identity_pass: identity.is_none_or(|r| r < th.identity),
        wirtinger_pass: margin >= th.wirtinger,
        zero_count_pass: zeros.count == expected,
        zero_simplicity_pass: slope.is_none_or(|s| s > th.zero_slope),
    })
}

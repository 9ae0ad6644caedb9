//! Period function of the closed orbits around the center `(1, 0)`.
//!
//! Every closed orbit inside the homoclinic loop is a level set
//! `v^2/2 + V(u) = E` with `E_center < E < 0`. Its period is
//! `T(E) = sqrt(2) * int_{u-}^{u+} du / sqrt(E - V(u))`, evaluated after the
//! substitution `u = c + d sin(theta)` (c, d the midpoint and half-width of the
//! turning points), which removes the endpoint singularities and leaves a smooth
//! periodic integrand in `theta`; the midpoint rule is then spectrally accurate.
//!
//! This module never integrates the flow and serves as an independent check
//! on the shooting solver.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ode::{
    amplitude_bound, center_energy, potential_above_center, potential_unchecked, ProblemParams,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("energy {energy} outside the open interval ({center}, 0)")]
    EnergyOutOfRange { energy: f64, center: f64 },
    #[error("period quadrature did not converge: last estimates {previous} and {last}")]
    NoConvergence { previous: f64, last: f64 },
    #[error("target period must be positive (got {0})")]
    InvalidTarget(f64),
}

/// Default relative agreement between successive node doublings.
pub const QUADRATURE_TOL: f64 = 1e-10;
/// Node cap for the period quadrature.
pub const MAX_NODES: usize = 1 << 22;
/// Number of energy samples in a period scan.
pub const SCAN_SAMPLES: usize = 256;
/// Closest approach to the center in a scan, as a fraction of `|E_center|`.
pub const SCAN_CENTER_GAP: f64 = 1e-6;
/// Closest approach to the homoclinic energy, as a fraction of `|E_center|`.
pub const SCAN_EDGE_GAP: f64 = 1e-10;
/// Target accuracy of [`orbit_for_period`].
pub const PERIOD_MATCH_TOL: f64 = 1e-10;

/// An energy strictly between the center and the homoclinic level.
///
/// Both `E` and `E - E_center` are kept, each computed without cancellation
/// from whichever end the level was constructed near.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyLevel {
    energy: f64,
    above_center: f64,
}

impl EnergyLevel {
    pub fn new(p: &ProblemParams, energy: f64) -> Result<Self, OracleError> {
        let center = center_energy(p);
        if !(energy > center && energy < 0.0) {
            return Err(OracleError::EnergyOutOfRange { energy, center });
        }
        Ok(Self {
            energy,
            above_center: energy - center,
        })
    }

    /// Level at height `fraction * |E_center|` above the center, `0 < fraction < 1`.
    pub fn above_center(p: &ProblemParams, fraction: f64) -> Result<Self, OracleError> {
        let depth = center_energy(p).abs();
        let level = Self {
            energy: -(depth - fraction * depth),
            above_center: fraction * depth,
        };
        level.check(p)
    }

    /// Level at `fraction * E_center`, i.e. `fraction * |E_center|` below zero.
    pub fn below_homoclinic(p: &ProblemParams, fraction: f64) -> Result<Self, OracleError> {
        let depth = center_energy(p).abs();
        let level = Self {
            energy: -fraction * depth,
            above_center: depth - fraction * depth,
        };
        level.check(p)
    }

    /// Scan coordinate: negative `s` sits `exp(s)/2` above the center, nonnegative
    /// `s` sits `exp(-s)/2` below zero (both in units of `|E_center|`).
    fn from_scan_coordinate(p: &ProblemParams, s: f64) -> Result<Self, OracleError> {
        if s < 0.0 {
            Self::above_center(p, 0.5 * s.exp())
        } else {
            Self::below_homoclinic(p, 0.5 * (-s).exp())
        }
    }

    fn check(self, p: &ProblemParams) -> Result<Self, OracleError> {
        if !(self.energy < 0.0 && self.above_center > 0.0) {
            return Err(OracleError::EnergyOutOfRange {
                energy: self.energy,
                center: center_energy(p),
            });
        }
        Ok(self)
    }

    pub fn energy(&self) -> f64 {
        self.energy
    }

    pub fn height_above_center(&self) -> f64 {
        self.above_center
    }
}

/// `E - V(u)`, accurate near the center and near `u = 0`.
fn energy_gap(p: &ProblemParams, level: &EnergyLevel, u: f64) -> f64 {
    if (u - 1.0).abs() < 0.5 {
        level.above_center - potential_above_center(p, u)
    } else {
        level.energy - potential_unchecked(p, u)
    }
}

/// Turning points `0 < u- < 1 < u+ < A_q` of the orbit at `level`.
pub fn turning_points(p: &ProblemParams, level: &EnergyLevel) -> (f64, f64) {
    let gap = |u: f64| energy_gap(p, level, u);

    // lower root: gap < 0 near 0, gap > 0 at 1; bisect geometrically while the
    // bracket spans more than a factor of two
    let mut lo = 0.5;
    while gap(lo) >= 0.0 && lo > f64::MIN_POSITIVE {
        lo *= 0.5;
    }
    let mut hi = if lo == 0.5 { 1.0 } else { 2.0 * lo };
    for _ in 0..2000 {
        let mid = if hi > 2.0 * lo {
            (lo * hi).sqrt()
        } else {
            0.5 * (lo + hi)
        };
        if mid <= lo || mid >= hi {
            break;
        }
        if gap(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let u_minus = if gap(lo).abs() < gap(hi).abs() {
        lo
    } else {
        hi
    };

    let (mut lo, mut hi) = (1.0, amplitude_bound(p));
    for _ in 0..2000 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if gap(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let u_plus = if gap(lo).abs() < gap(hi).abs() {
        lo
    } else {
        hi
    };
    (u_minus, u_plus)
}

/// `E - V(w + delta)` expanded about a turning point `w`:
/// `(E - V(w)) - delta * [V(w + delta) - V(w)] / delta`, with the divided
/// difference of the power term formed through `exp_m1`/`ln_1p`.
fn gap_near(p: &ProblemParams, level: &EnergyLevel, w: f64, delta: f64) -> f64 {
    let a = p.q() + 1.0;
    let x = delta / w;
    let ratio = if x == 0.0 {
        1.0
    } else {
        (a * x.ln_1p()).exp_m1() / (a * x)
    };
    let slope = p.mu() * (w.powf(p.q()) * ratio - w - 0.5 * delta);
    energy_gap(p, level, w) - delta * slope
}

/// Midpoint rule with `nodes` points in `phi = theta + pi/2` on `(0, pi)`.
///
/// The distance to the nearer turning point is formed as `2 d sin^2(phi/2)`
/// (or its mirror) rather than `c + d sin(theta) - u-`, which would lose all
/// relative precision at the nodes nearest the endpoints.
fn period_estimate(
    p: &ProblemParams,
    level: &EnergyLevel,
    u_minus: f64,
    u_plus: f64,
    nodes: usize,
) -> f64 {
    use std::f64::consts::{FRAC_PI_2, PI, SQRT_2};
    let d = 0.5 * (u_plus - u_minus);
    let h = PI / nodes as f64;
    // Neumaier-compensated sum: up to millions of positive terms
    let (mut sum, mut carry) = (0.0f64, 0.0f64);
    for i in 0..nodes {
        let phi = (i as f64 + 0.5) * h;
        let gap = if phi < FRAC_PI_2 {
            let s = (0.5 * phi).sin();
            gap_near(p, level, u_minus, 2.0 * d * s * s)
        } else {
            let s = (0.5 * (PI - phi)).sin();
            gap_near(p, level, u_plus, -2.0 * d * s * s)
        };
        if gap > 0.0 {
            let term = d * phi.sin() / gap.sqrt();
            let t = sum + term;
            carry += if sum.abs() >= term.abs() {
                (sum - t) + term
            } else {
                (term - t) + sum
            };
            sum = t;
        }
    }
    SQRT_2 * h * (sum + carry)
}

/// Period of the orbit at `level`, refined by node doubling until two
/// successive estimates agree to `rel_tol`.
pub fn period_with_tolerance(
    p: &ProblemParams,
    level: &EnergyLevel,
    rel_tol: f64,
) -> Result<f64, OracleError> {
    let (u_minus, u_plus) = turning_points(p, level);
    let mut nodes = 32;
    let mut previous = period_estimate(p, level, u_minus, u_plus, nodes);
    while nodes < MAX_NODES {
        nodes *= 2;
        let next = period_estimate(p, level, u_minus, u_plus, nodes);
        if (next - previous).abs() <= rel_tol * next.abs() {
            return Ok(next);
        }
        previous = next;
    }
    let last = period_estimate(p, level, u_minus, u_plus, nodes * 2);
    Err(OracleError::NoConvergence { previous, last })
}

pub fn period(p: &ProblemParams, level: &EnergyLevel) -> Result<f64, OracleError> {
    period_with_tolerance(p, level, QUADRATURE_TOL)
}

/// Small-amplitude limit `2 pi / sqrt(mu (q - 1))`.
pub fn center_period(p: &ProblemParams) -> f64 {
    2.0 * std::f64::consts::PI / (p.mu() * (p.q() - 1.0)).sqrt()
}

/// Periods sampled on the energy grid, refined geometrically toward both ends.
#[derive(Debug, Clone)]
pub struct PeriodScan {
    params: ProblemParams,
    coordinates: Vec<f64>,
    pub levels: Vec<EnergyLevel>,
    pub periods: Vec<f64>,
}

impl PeriodScan {
    pub fn params(&self) -> &ProblemParams {
        &self.params
    }

    pub fn min_period(&self) -> f64 {
        self.periods.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_period(&self) -> f64 {
        self.periods
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Diagnostic: `false` as soon as one sample fails to increase.
    pub fn is_monotone(&self) -> bool {
        self.periods.windows(2).all(|w| w[1] > w[0])
    }

    /// First bracketed crossing `T(E) = target`, refined by bisection on the
    /// scan coordinate. `None` when the scan never reaches below `target`
    /// or never crosses it.
    pub fn orbit_for_period(&self, target: f64) -> Result<Option<EnergyLevel>, OracleError> {
        if !(target > 0.0) {
            return Err(OracleError::InvalidTarget(target));
        }
        if self.min_period() >= target {
            return Ok(None);
        }
        let Some(j) = self
            .periods
            .windows(2)
            .position(|w| (w[0] - target) * (w[1] - target) <= 0.0)
        else {
            return Ok(None);
        };
        let p = &self.params;
        let eval = |s: f64| -> Result<(EnergyLevel, f64), OracleError> {
            let level = EnergyLevel::from_scan_coordinate(p, s)?;
            Ok((level, period_with_tolerance(p, &level, 1e-13)? - target))
        };
        let (mut lo, mut hi) = (self.coordinates[j], self.coordinates[j + 1]);
        let (mut best, mut f_lo) = eval(lo)?;
        let mut best_err = f_lo.abs();
        // refine well past the acceptance threshold; quadrature noise sits near 1e-13
        let stop = 1e-12 * target.max(1.0);
        for _ in 0..200 {
            if best_err < stop {
                break;
            }
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            let (level, f_mid) = eval(mid)?;
            if f_mid.abs() < best_err {
                best = level;
                best_err = f_mid.abs();
            }
            if f_mid.signum() == f_lo.signum() {
                lo = mid;
                f_lo = f_mid;
            } else {
                hi = mid;
            }
        }
        if best_err >= PERIOD_MATCH_TOL {
            return Err(OracleError::NoConvergence {
                previous: target,
                last: target + best_err,
            });
        }
        Ok(Some(best))
    }
}

pub fn scan_periods(p: &ProblemParams) -> Result<PeriodScan, OracleError> {
    let s_min = (2.0 * SCAN_CENTER_GAP).ln();
    let s_max = (0.5 / SCAN_EDGE_GAP).ln();
    let coordinates: Vec<f64> = (0..SCAN_SAMPLES)
        .map(|i| s_min + (s_max - s_min) * i as f64 / (SCAN_SAMPLES - 1) as f64)
        .collect();
    let samples: Result<Vec<(EnergyLevel, f64)>, OracleError> = coordinates
        .par_iter()
        .map(|&s| {
            let level = EnergyLevel::from_scan_coordinate(p, s)?;
            Ok((level, period(p, &level)?))
        })
        .collect();
    let (levels, periods) = samples?.into_iter().unzip();
    Ok(PeriodScan {
        params: *p,
        coordinates,
        levels,
        periods,
    })
}

/// Energy of an orbit whose period is `target`, or `None` (see [`PeriodScan::orbit_for_period`]).
pub fn orbit_for_period(
    p: &ProblemParams,
    target: f64,
) -> Result<Option<EnergyLevel>, OracleError> {
    if !(target > 0.0) {
        return Err(OracleError::InvalidTarget(target));
    }
    scan_periods(p)?.orbit_for_period(target)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ode::potential;
    use std::f64::consts::PI;

    fn params(q: f64, mu: f64) -> ProblemParams {
        ProblemParams::new(q, mu, 2.0 * PI).unwrap()
    }

    fn agm(mut a: f64, mut b: f64) -> f64 {
        for _ in 0..64 {
            let (an, bn) = (0.5 * (a + b), (a * b).sqrt());
            a = an;
            b = bn;
            if (a - b).abs() <= 1e-16 * a {
                break;
            }
        }
        0.5 * (a + b)
    }

    /// For q = 3 the period is a complete elliptic integral:
    /// `T = sqrt(2) pi / (sqrt(mu) AGM(u+, u-))`, with `u+-^2 = 1 +- sqrt(1 + 4E/mu)`.
    fn cubic_period_oracle(mu: f64, e: f64) -> (f64, f64, f64) {
        let r = (1.0 + 4.0 * e / mu).sqrt();
        let (um, up) = ((-4.0 * e / mu / (1.0 + r)).sqrt(), (1.0 + r).sqrt());
        (
            um,
            up,
            std::f64::consts::SQRT_2 * PI / (mu.sqrt() * agm(up, um)),
        )
    }

    #[test]
    fn energy_level_range() {
        let p = params(3.0, 1.0);
        assert!(EnergyLevel::new(&p, -0.25).is_err());
        assert!(EnergyLevel::new(&p, 0.0).is_err());
        assert!(EnergyLevel::new(&p, -0.1).is_ok());
        assert!(EnergyLevel::above_center(&p, 1.0).is_err());
        assert!(EnergyLevel::below_homoclinic(&p, 0.0).is_err());
    }

    #[test]
    fn turning_points_for_cubic_closed_form() {
        let p = params(3.0, 1.0);
        let level = EnergyLevel::new(&p, -0.125).unwrap();
        let (um, up) = turning_points(&p, &level);
        assert!((um - (1.0 - 0.5f64.sqrt()).sqrt()).abs() < 1e-14);
        assert!((up - (1.0 + 0.5f64.sqrt()).sqrt()).abs() < 1e-14);
        assert!((um - 0.54120).abs() < 1e-5 && (up - 1.30656).abs() < 1e-5);
    }

    #[test]
    fn turning_point_residuals_and_ordering() {
        for &(q, mu) in &[(1.3, 0.2), (2.0, 1.0), (3.0, 5.0), (7.0, 40.0)] {
            let p = params(q, mu);
            let ec = center_energy(&p).abs();
            for &s in &[-13.0, -5.0, -1.0, 0.0, 3.0, 10.0, 22.0] {
                let level = EnergyLevel::from_scan_coordinate(&p, s).unwrap();
                let (um, up) = turning_points(&p, &level);
                assert!(0.0 < um && um < 1.0 && 1.0 < up && up < amplitude_bound(&p));
                for u in [um, up] {
                    let r = (potential(&p, u).unwrap() - level.energy()).abs();
                    assert!(r < 1e-13 * ec, "q={q} mu={mu} s={s} u={u} residual {r}");
                }
            }
        }
    }

    #[test]
    fn turning_point_limits() {
        let p = params(3.0, 1.0);
        let near_center = EnergyLevel::above_center(&p, 1e-12).unwrap();
        let (um, up) = turning_points(&p, &near_center);
        assert!((um - 1.0).abs() < 1e-5 && (up - 1.0).abs() < 1e-5);
        let near_zero = EnergyLevel::below_homoclinic(&p, 1e-14).unwrap();
        let (um, up) = turning_points(&p, &near_zero);
        assert!(um < 1e-6 && (up - 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn quadrature_matches_elliptic_oracle() {
        for &mu in &[0.25, 1.0, 3.0, 100.0] {
            let p = params(3.0, mu);
            for &s in &[-12.0, -4.0, -0.5, 0.0, 2.0, 8.0, 20.0] {
                let level = EnergyLevel::from_scan_coordinate(&p, s).unwrap();
                let t = period(&p, &level).unwrap();
                let (_, _, exact) = cubic_period_oracle(mu, level.energy());
                // the closed form loses accuracy near the center through sqrt(1 + 4E/mu)
                let tol = if s < -8.0 { 1e-7 } else { 1e-10 };
                assert!(
                    (t - exact).abs() < tol * exact,
                    "mu={mu} s={s}: {t} vs {exact}"
                );
            }
        }
    }

    #[test]
    fn golden_period_at_minus_one_eighth() {
        // frozen from a 40-digit evaluation of sqrt(2) pi / AGM(u+, u-), cross-checked by
        // adaptive quadrature of the turning-point integral
        const GOLDEN: f64 = 5.037_854_093_619_307;
        let (_, _, exact) = cubic_period_oracle(1.0, -0.125);
        assert!((exact - GOLDEN).abs() < 1e-14, "oracle {exact}");
        let p = params(3.0, 1.0);
        let level = EnergyLevel::new(&p, -0.125).unwrap();
        let t = period_with_tolerance(&p, &level, 1e-12).unwrap();
        assert!((t - GOLDEN).abs() < 1e-12, "quadrature {t}");
    }

    #[test]
    fn period_limits() {
        let p = params(3.0, 1.0);
        let tc = center_period(&p);
        assert!((tc - 4.442883).abs() < 1e-6);
        let mut gaps = Vec::new();
        for &f in &[1e-2, 1e-3, 1e-4, 1e-5] {
            let level = EnergyLevel::above_center(&p, f).unwrap();
            gaps.push((f, period(&p, &level).unwrap() - tc));
        }
        for w in gaps.windows(2) {
            // observed order in (E - E_center)
            let order = (w[0].1 / w[1].1).ln() / (w[0].0 / w[1].0).ln();
            assert!(order >= 0.95, "order {order}");
        }
        let mut prev = 0.0;
        for &f in &[1e-1, 1e-3, 1e-5, 1e-7, 1e-9] {
            let level = EnergyLevel::below_homoclinic(&p, f).unwrap();
            let t = period(&p, &level).unwrap();
            assert!(t > prev);
            prev = t;
        }
        assert!(prev > 24.0);
    }

    #[test]
    fn no_orbit_below_first_threshold() {
        let p = params(3.0, 0.25);
        assert!((center_period(&p) - 8.886).abs() < 1e-3);
        assert_eq!(orbit_for_period(&p, 2.0 * PI).unwrap(), None);
    }

    #[test]
    fn orbit_for_period_hits_target() {
        let p = params(3.0, 3.0);
        for target in [2.0 * PI, PI] {
            let level = orbit_for_period(&p, target).unwrap().unwrap();
            let t = period_with_tolerance(&p, &level, 1e-13).unwrap();
            assert!((t - target).abs() < PERIOD_MATCH_TOL);
            let (_, up) = turning_points(&p, &level);
            assert!(up < 2f64.sqrt());
            let (_, _, exact) = cubic_period_oracle(3.0, level.energy());
            assert!((exact - target).abs() < 1e-9);
        }
        assert!(matches!(
            orbit_for_period(&p, -1.0),
            Err(OracleError::InvalidTarget(_))
        ));
    }

    #[test]
    fn scan_is_monotone_for_power_family() {
        for &(q, mu) in &[(2.0, 1.0), (3.0, 3.0), (5.0, 0.7)] {
            let scan = scan_periods(&params(q, mu)).unwrap();
            assert_eq!(scan.periods.len(), SCAN_SAMPLES);
            assert!(scan.is_monotone(), "q={q} mu={mu}");
            assert!(scan.min_period() > center_period(scan.params()));
        }
    }
}

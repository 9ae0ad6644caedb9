//! Even periodic solutions by shooting, and continuation of the branches that
//! leave the constant solution at each degeneracy instant.
//!
//! A nonconstant solution is determined by its orbit minimum `b = u_min`:
//! integrating from `(b, 0)` for half the minimal period lands on the maximum
//! with `u' = 0`, and reflection plus periodic extension gives the whole
//! profile. The unknown is `s = ln b`. Near the homoclinic loop `b` becomes
//! exponentially small while the maximum crowds against `A_q`; in `s` the
//! problem stays well scaled on both counts.
//!
//! Stored profiles are centered at the maximum (`t = 0`), so they are even
//! about `t = 0` and, by periodicity, about `T/2`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bifurcation::{
    count_lower_bound, degeneracy_instant, eigenvalue, DegeneracyInstant, SpectralError,
};
use crate::integrator::{
    integrate, solve, solve_until_event, IntegrateError, IntegratorConfig, ParametricFlow,
    PlanarFlow, VariationalFlow,
};
use crate::ode::{
    amplitude_bound, center_energy, potential_above_center, potential_unchecked, ParamError,
    PhasePoint, ProblemParams,
};
use crate::verify::{energy_drift, ode_residual};

/// Below this `|u'|` a crossing of `u = 1` is not considered simple.
pub const SIMPLE_ZERO_SLOPE: f64 = 1e-8;
/// Allowed excess of `max u` over `A_q`.
pub const BOUND_SLACK: f64 = 1e-12;
/// Tolerance of the reflection symmetry `u(T - t) = u(t)` on the grid.
pub const SYMMETRY_TOL: f64 = 1e-9;

const SHOOT_REL_TOL: f64 = 1e-12;
const PROFILE_REL_TOL: f64 = 1e-13;
const SCAN_SAMPLES: usize = 256;
/// Scan range of `-ln b`: from just below the center to `b ~ 1e-130`.
const SCAN_DEPTH: (f64, f64) = (1e-8, 300.0);

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolveError {
    #[error("no branch {k} at mu = {mu}: it starts at mu_{k} = {mu_k} (eigenvalue {eigenvalue})")]
    BelowInstant {
        k: u32,
        mu: f64,
        mu_k: f64,
        eigenvalue: f64,
    },
    #[error("no orbit with half period {half_period} found for branch {k}")]
    NotBracketed { k: u32, half_period: f64 },
    #[error("Newton did not converge in {iterations} iterations (residual {residual:e})")]
    Newton { iterations: usize, residual: f64 },
    #[error("seeding branch {k} failed at mu = {mu} (local eigenvalue {eigenvalue})")]
    Seed { k: u32, mu: f64, eigenvalue: f64 },
    #[error("arclength step underflow at mu = {mu}")]
    StepUnderflow { mu: f64 },
    #[error("starting value {0} lies outside the orbit region")]
    OutsideRegion(f64),
    #[error("candidate rejected: {reason}")]
    Invariant {
        reason: String,
        diagnostics: Box<Diagnostics>,
    },
    #[error("could not resolve the crossings of u = 1 in the cell at t = {0}")]
    ZeroRefinement(f64),
    #[error("invalid shooting configuration: {0}")]
    Config(&'static str),
    #[error(transparent)]
    Integrate(#[from] IntegrateError),
    #[error(transparent)]
    Param(#[from] ParamError),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShootingConfig {
    pub newton_tol: f64,
    pub max_newton_iters: usize,
    pub seed_offset: f64,
    pub arclength_step: f64,
    pub max_step: f64,
    pub grid_size: usize,
}

impl Default for ShootingConfig {
    fn default() -> Self {
        Self {
            newton_tol: 1e-11,
            max_newton_iters: 25,
            seed_offset: 1e-3,
            arclength_step: 1e-2,
            max_step: 0.5,
            grid_size: 1024,
        }
    }
}

impl ShootingConfig {
    pub fn validate(&self) -> Result<(), SolveError> {
        let positive = [
            self.newton_tol,
            self.seed_offset,
            self.arclength_step,
            self.max_step,
        ];
        if positive.iter().any(|x| !(*x > 0.0 && x.is_finite())) {
            return Err(SolveError::Config(
                "tolerances and step sizes must be positive",
            ));
        }
        if self.max_newton_iters == 0 {
            return Err(SolveError::Config("max_newton_iters must be positive"));
        }
        if self.seed_offset >= 0.25 {
            return Err(SolveError::Config("seed_offset must be below 0.25"));
        }
        if !self.grid_size.is_power_of_two() || self.grid_size < 16 {
            return Err(SolveError::Config(
                "grid_size must be a power of two, at least 16",
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Diagnostics {
    pub newton_iterations: usize,
    pub shooting_residual: f64,
    pub ode_residual: f64,
    pub energy_drift: f64,
}

/// A positive `T`-periodic solution sampled at `t_j = j T / N`, `j < N`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodicSolution {
    pub params: ProblemParams,
    /// Branch index; 0 for the constant solution.
    pub k: u32,
    /// `u(0) = max u`.
    pub a: f64,
    pub u_min: f64,
    pub profile: Vec<PhasePoint>,
    pub energy: f64,
    pub zero_count: usize,
    /// Smallest `|u'|` over the crossings of `u = 1`; `None` without crossings.
    pub min_crossing_slope: Option<f64>,
    pub diagnostics: Diagnostics,
}

impl PeriodicSolution {
    pub fn constant(params: ProblemParams, grid_size: usize) -> Self {
        Self {
            params,
            k: 0,
            a: 1.0,
            u_min: 1.0,
            profile: vec![PhasePoint::new(1.0, 0.0); grid_size],
            energy: center_energy(&params),
            zero_count: 0,
            min_crossing_slope: None,
            diagnostics: Diagnostics::default(),
        }
    }

    /// Wrap externally supplied samples. Amplitude, minimum, energy and the
    /// zero count are recomputed from the data; diagnostics start empty.
    pub fn from_samples(
        params: ProblemParams,
        k: u32,
        profile: Vec<PhasePoint>,
    ) -> Result<Self, SolveError> {
        if profile.is_empty() {
            return Err(SolveError::Config("empty profile"));
        }
        let a = profile
            .iter()
            .map(|x| x.u)
            .fold(f64::NEG_INFINITY, f64::max);
        let u_min = profile.iter().map(|x| x.u).fold(f64::INFINITY, f64::min);
        let x0 = profile[0];
        let mut sol = Self {
            params,
            k,
            a,
            u_min,
            profile,
            energy: 0.5 * x0.v * x0.v + potential_unchecked(&params, x0.u),
            zero_count: 0,
            min_crossing_slope: None,
            diagnostics: Diagnostics::default(),
        };
        let zeros = count_zeros(&sol)?;
        sol.zero_count = zeros.count;
        sol.min_crossing_slope = zeros.min_slope();
        Ok(sol)
    }

    pub fn grid_size(&self) -> usize {
        self.profile.len()
    }

    pub fn grid_step(&self) -> f64 {
        self.params.period() / self.profile.len() as f64
    }

    pub fn times(&self) -> Vec<f64> {
        let h = self.grid_step();
        (0..self.profile.len()).map(|j| j as f64 * h).collect()
    }

    pub fn is_constant(&self) -> bool {
        self.profile.iter().all(|x| x.u == 1.0 && x.v == 0.0)
    }

    /// Sample `j` of the profile reflected about `t = 0`: `u(T - t_j)`.
    pub fn reflected(&self, j: usize) -> PhasePoint {
        let n = self.profile.len();
        let x = self.profile[(n - j % n) % n];
        PhasePoint::new(x.u, -x.v)
    }

    /// Checks every structural property a returned solution must have.
    pub fn check_invariants(&self) -> Result<(), SolveError> {
        let fail = |reason: String| {
            Err(SolveError::Invariant {
                reason,
                diagnostics: Box::new(self.diagnostics),
            })
        };
        let p = &self.params;
        if let Some(x) = self.profile.iter().find(|x| !x.is_finite() || x.u <= 0.0) {
            return fail(format!("profile not positive and finite (u = {})", x.u));
        }
        if self.is_constant() {
            return Ok(());
        }
        let bound = amplitude_bound(p);
        if self.a > bound + BOUND_SLACK {
            return fail(format!("max u = {} exceeds A_q = {bound}", self.a));
        }
        if !(self.u_min < 1.0 && self.a > 1.0) {
            return fail(format!(
                "range [{}, {}] does not straddle 1",
                self.u_min, self.a
            ));
        }
        if !(self.energy > center_energy(p) && self.energy < 0.0) {
            return fail(format!("energy {} outside (E_center, 0)", self.energy));
        }
        let expected = 2 * self.k as usize;
        if self.zero_count != expected {
            return fail(format!(
                "{} zeros of u - 1, expected {expected}",
                self.zero_count
            ));
        }
        match self.min_crossing_slope {
            Some(s) if s > SIMPLE_ZERO_SLOPE => {}
            other => return fail(format!("non-simple crossing (min |u'| = {other:?})")),
        }
        let asym = (0..self.profile.len())
            .map(|j| (self.profile[j].u - self.reflected(j).u).abs())
            .fold(0.0, f64::max);
        if asym > SYMMETRY_TOL {
            return fail(format!("reflection asymmetry {asym:e}"));
        }
        Ok(())
    }
}

/// Crossing of `u = 1` located on dense output.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Crossing {
    pub t: f64,
    pub slope: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZeroReport {
    pub count: usize,
    pub crossings: Vec<Crossing>,
    pub all_simple: bool,
}

impl ZeroReport {
    pub fn min_slope(&self) -> Option<f64> {
        self.crossings
            .iter()
            .map(|c| c.slope.abs())
            .reduce(f64::min)
    }
}

fn tight_config(scale: f64) -> IntegratorConfig {
    IntegratorConfig::with_tolerances(SHOOT_REL_TOL, 1e-3 * SHOOT_REL_TOL * scale.min(1.0))
}

fn bisect<F: Fn(f64) -> f64>(g: F, mut lo: f64, mut hi: f64) -> f64 {
    let g_lo = g(lo);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if (g(mid) >= 0.0) == (g_lo >= 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Crossings of `u = 1` over one period. Each grid cell with a sign change of
/// `u - 1`, or with an interior extremum that might hide a pair of crossings,
/// is re-integrated from its left sample and resolved by bisection on the
/// dense output.
pub fn count_zeros(sol: &PeriodicSolution) -> Result<ZeroReport, SolveError> {
    let n = sol.profile.len();
    let h = sol.grid_step();
    let p = sol.params;
    let cells: Vec<Result<Vec<Crossing>, SolveError>> = (0..n)
        .into_par_iter()
        .map(|j| {
            let x0 = sol.profile[j];
            let x1 = sol.profile[(j + 1) % n];
            let changes = (x0.u >= 1.0) != (x1.u >= 1.0);
            let turns = x0.v * x1.v < 0.0;
            if !changes && !turns {
                return Ok(Vec::new());
            }
            let t0 = j as f64 * h;
            let tr = integrate(&p, x0, (0.0, h), &tight_config(x0.u).dense())?;
            let at = |t: f64| {
                tr.eval(t.clamp(0.0, h))
                    .expect("dense output inside the cell")
            };
            let mut cuts = vec![0.0];
            if turns {
                let te = bisect(|t| at(t).v, 0.0, h);
                let ue = at(te).u;
                if (ue >= 1.0) == (x0.u >= 1.0) && !changes {
                    return Ok(Vec::new());
                }
                if (at(te).v).abs() > 1e-6 * (x0.v.abs() + x1.v.abs()) {
                    return Err(SolveError::ZeroRefinement(t0));
                }
                cuts.push(te);
            }
            cuts.push(h);
            let mut found = Vec::new();
            for w in cuts.windows(2) {
                let (a, b) = (w[0], w[1]);
                // stored samples decide the sign at the cell ends
                let ga = if a == 0.0 { x0.u - 1.0 } else { at(a).u - 1.0 };
                let gb = if b == h { x1.u - 1.0 } else { at(b).u - 1.0 };
                if (ga >= 0.0) == (gb >= 0.0) {
                    continue;
                }
                let tz = bisect(|t| at(t).u - 1.0, a, b);
                found.push(Crossing {
                    t: t0 + tz,
                    slope: at(tz).v,
                });
            }
            Ok(found)
        })
        .collect();
    let mut crossings = Vec::new();
    for c in cells {
        crossings.extend(c?);
    }
    let all_simple = crossings.iter().all(|c| c.slope.abs() > SIMPLE_ZERO_SLOPE);
    Ok(ZeroReport {
        count: crossings.len(),
        crossings,
        all_simple,
    })
}

/// Residual `u'(T/(2k))` of the orbit started at `(a, 0)` and its derivative
/// with respect to `a`. Zero exactly when `T/(2k)` is an odd multiple of the
/// orbit's half period (the constant `a = 1` included).
pub fn shoot_half_period(p: &ProblemParams, k: u32, a: f64) -> Result<(f64, f64), SolveError> {
    if k == 0 {
        return Err(SpectralError::ZeroIndex.into());
    }
    if !(a > 0.0 && a < amplitude_bound(p)) {
        return Err(SolveError::OutsideRegion(a));
    }
    let half = p.period() / (2.0 * f64::from(k));
    let sys = VariationalFlow { params: *p };
    let sol = solve(
        &sys,
        [a, 0.0, 1.0, 0.0, 0.0, 1.0],
        0.0,
        half,
        &tight_config(a),
    )
    .map_err(|_| SolveError::OutsideRegion(a))?;
    let y = sol.final_state();
    Ok((y[1], y[4]))
}

#[derive(Debug, Clone, Copy)]
struct Shot {
    residual: f64,
    d_ds: f64,
    d_dmu: f64,
}

/// Shot from the minimum `(e^s, 0)` with derivatives in `s` and in `mu`.
fn shoot_from_min(p: &ProblemParams, k: u32, s: f64) -> Result<Shot, SolveError> {
    let b = s.exp();
    let half = p.period() / (2.0 * f64::from(k));
    let sys = ParametricFlow { params: *p };
    let y0 = [b, 0.0, 1.0, 0.0, 0.0, 1.0, 0.0, 0.0];
    let y = solve(&sys, y0, 0.0, half, &tight_config(b))?.final_state();
    if !y.iter().all(|x| x.is_finite()) {
        return Err(SolveError::OutsideRegion(b));
    }
    Ok(Shot {
        residual: y[1],
        d_ds: b * y[4],
        d_dmu: y[7],
    })
}

/// Velocity scale used to judge the shooting residual.
fn residual_scale(p: &ProblemParams) -> f64 {
    p.mu().sqrt().max(1.0)
}

fn converged(p: &ProblemParams, cfg: &ShootingConfig, residual: f64) -> bool {
    residual.abs() <= cfg.newton_tol * residual_scale(p)
}

#[derive(Debug, Clone, Copy)]
struct Root {
    s: f64,
    iterations: usize,
    residual: f64,
}

/// Newton in `s = ln u_min`, safeguarded by bisection when a bracket is known.
fn newton_in_s(
    p: &ProblemParams,
    k: u32,
    s0: f64,
    bracket: Option<(f64, f64)>,
    cfg: &ShootingConfig,
) -> Result<Root, SolveError> {
    let mut br = bracket.map(|(a, b)| if a < b { (a, b) } else { (b, a) });
    // sign of the residual at the lower end of the bracket
    let lower_sign = match br {
        Some((lo, _)) => Some(shoot_from_min(p, k, lo)?.residual >= 0.0),
        None => None,
    };
    let mut s = s0;
    let mut last = f64::INFINITY;
    let budget = cfg.max_newton_iters + if br.is_some() { 64 } else { 0 };
    for it in 1..=budget {
        let shot = shoot_from_min(p, k, s)?;
        last = shot.residual;
        if converged(p, cfg, shot.residual) {
            return Ok(Root {
                s,
                iterations: it,
                residual: shot.residual,
            });
        }
        if let (Some((lo, hi)), Some(sl)) = (br.as_mut(), lower_sign) {
            if (shot.residual >= 0.0) == sl {
                *lo = s;
            } else {
                *hi = s;
            }
        }
        let step = -shot.residual / shot.d_ds;
        let mut next = s + step.clamp(-2.0, 2.0);
        if let Some((lo, hi)) = br {
            if !(next > lo && next < hi) || !step.is_finite() {
                next = 0.5 * (lo + hi);
            }
            if hi - lo <= 4.0 * f64::EPSILON * s.abs().max(1e-300) {
                break;
            }
        } else if !next.is_finite() || next >= 0.0 {
            break;
        }
        if next == s {
            break;
        }
        s = next;
    }
    Err(SolveError::Newton {
        iterations: budget,
        residual: last,
    })
}

/// Half periods `tau(b)` of the orbits through `(b, 0)`, sampled on a grid that
/// is geometric in `-ln b`. Entries beyond `cap` are `+inf`.
#[derive(Debug, Clone)]
pub struct HalfPeriodScan {
    pub coordinates: Vec<f64>,
    pub half_periods: Vec<f64>,
}

impl HalfPeriodScan {
    pub fn new(p: &ProblemParams, cap: f64) -> Result<Self, SolveError> {
        let (z0, z1) = (SCAN_DEPTH.0.ln(), SCAN_DEPTH.1.ln());
        let coordinates: Vec<f64> = (0..SCAN_SAMPLES)
            .map(|i| -(z0 + (z1 - z0) * i as f64 / (SCAN_SAMPLES - 1) as f64).exp())
            .collect();
        let sys = PlanarFlow { params: *p };
        let half_periods: Result<Vec<f64>, SolveError> = coordinates
            .par_iter()
            .map(|&s| {
                let b = s.exp();
                let cfg = IntegratorConfig::with_tolerances(1e-10, 1e-3 * 1e-10 * b);
                let (_, hit) = solve_until_event(&sys, [b, 0.0], 0.0, cap, &cfg, |y| y[1])?;
                Ok(hit.map_or(f64::INFINITY, |h| h.t))
            })
            .collect();
        Ok(Self {
            coordinates,
            half_periods: half_periods?,
        })
    }

    /// Grid intervals on which `tau = target`, ordered from the center outward.
    pub fn brackets(&self, target: f64) -> Vec<(f64, f64)> {
        (0..self.coordinates.len() - 1)
            .filter(|&j| (self.half_periods[j] >= target) != (self.half_periods[j + 1] >= target))
            .map(|j| (self.coordinates[j], self.coordinates[j + 1]))
            .collect()
    }
}

fn check_branch_exists(p: &ProblemParams, k: u32) -> Result<DegeneracyInstant, SolveError> {
    let inst = degeneracy_instant(p.q(), p.period(), k)?;
    if count_lower_bound(p.q(), p.period(), p.mu()) < k {
        return Err(SolveError::BelowInstant {
            k,
            mu: p.mu(),
            mu_k: inst.mu_k,
            eigenvalue: eigenvalue(p.q(), p.period(), p.mu(), k),
        });
    }
    Ok(inst)
}

/// Extra Newton steps past the convergence test. The reflected profile has a
/// velocity jump of twice the residual at its maximum, so the residual is
/// pushed down to roundoff before sampling.
fn polish(p: &ProblemParams, k: u32, mut root: Root) -> Result<Root, SolveError> {
    for _ in 0..3 {
        let shot = shoot_from_min(p, k, root.s)?;
        let s = root.s - shot.residual / shot.d_ds;
        if !(s.is_finite() && s < 0.0) {
            break;
        }
        let next = shoot_from_min(p, k, s)?;
        if next.residual.abs() >= root.residual.abs() {
            break;
        }
        root = Root {
            s,
            iterations: root.iterations + 1,
            residual: next.residual,
        };
    }
    Ok(root)
}

/// Assemble and validate the solution whose orbit minimum is `e^s`.
fn build_solution(
    p: &ProblemParams,
    k: u32,
    root: Root,
    cfg: &ShootingConfig,
) -> Result<PeriodicSolution, SolveError> {
    let root = polish(p, k, root)?;
    let b = root.s.exp();
    let half = p.period() / (2.0 * f64::from(k));
    let n = cfg.grid_size;
    // offset of each grid time along the trajectory from the minimum, and
    // whether the sample lies on the descending (time-reversed) half
    let offsets: Vec<(f64, bool)> = (0..n)
        .map(|j| {
            let m = (p.period() * j as f64 / n as f64) % (2.0 * half);
            if m <= half {
                (half - m, true)
            } else {
                ((m - half).min(half), false)
            }
        })
        .collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| offsets[i].0.total_cmp(&offsets[j].0));
    // step exactly onto every sample time: no interpolation error in the profile;
    // offsets equal up to roundoff share one state
    let cfg_int =
        IntegratorConfig::with_tolerances(PROFILE_REL_TOL, 1e-3 * PROFILE_REL_TOL * b.min(1.0));
    let merge = 1e-13 * half;
    let mut states = vec![PhasePoint::default(); n];
    let (mut t, mut x) = (0.0, PhasePoint::new(b, 0.0));
    for &j in &order {
        let stop = offsets[j].0;
        if stop - t > merge {
            x = integrate(p, x, (t, stop), &cfg_int)?.final_state();
            t = stop;
        }
        states[j] = x;
    }
    let u_max = if half - t > merge {
        integrate(p, x, (t, half), &cfg_int)?.final_state().u
    } else {
        x.u
    };
    let profile: Vec<PhasePoint> = offsets
        .iter()
        .zip(&states)
        .map(|(&(_, descending), &y)| {
            if descending {
                PhasePoint::new(y.u, -y.v)
            } else {
                y
            }
        })
        .collect();
    let energy = if b > 0.5 {
        center_energy(p) + potential_above_center(p, b)
    } else {
        potential_unchecked(p, b)
    };
    let mut sol = PeriodicSolution {
        params: *p,
        k,
        a: u_max,
        u_min: b,
        profile,
        energy,
        zero_count: 0,
        min_crossing_slope: None,
        diagnostics: Diagnostics {
            newton_iterations: root.iterations,
            shooting_residual: root.residual,
            ode_residual: 0.0,
            energy_drift: 0.0,
        },
    };
    let zeros = count_zeros(&sol)?;
    sol.zero_count = zeros.count;
    sol.min_crossing_slope = zeros.min_slope();
    sol.diagnostics.ode_residual = ode_residual(&sol)?;
    sol.diagnostics.energy_drift = energy_drift(&sol);
    sol.check_invariants()?;
    Ok(sol)
}

/// Find the orbit minimum `u_min` with `V(u_min) = V(a)` for `a > 1`.
fn partner_minimum(p: &ProblemParams, a: f64) -> f64 {
    let e = potential_unchecked(p, a);
    let g = |s: f64| potential_unchecked(p, s.exp()) - e;
    // V decreases on (0, 1); search s = ln b in (-700, 0)
    bisect(g, -700.0, 0.0)
}

/// Solve for the branch-`k` solution at the parameters `p`, starting Newton
/// from the amplitude guess `a_guess` (either turning point of the orbit is
/// accepted). Falls back to a bracketing scan when Newton fails or lands on
/// another branch.
pub fn solve_branch_point(
    p: &ProblemParams,
    k: u32,
    a_guess: f64,
    cfg: &ShootingConfig,
) -> Result<PeriodicSolution, SolveError> {
    cfg.validate()?;
    check_branch_exists(p, k)?;
    let bound = amplitude_bound(p);
    let s0 = if a_guess > 0.0 && a_guess < 1.0 {
        Some(a_guess.ln())
    } else if a_guess > 1.0 && a_guess < bound {
        Some(partner_minimum(p, a_guess))
    } else {
        None
    };
    let refuse = (1.0 - 0.5 * cfg.seed_offset).ln();
    if let Some(s0) = s0.filter(|&s| s < refuse) {
        if let Ok(root) = newton_in_s(p, k, s0, None, cfg) {
            if let Ok(sol) = build_solution(p, k, root, cfg) {
                return Ok(sol);
            }
        }
    }
    let scan = HalfPeriodScan::new(p, 0.5 * p.period() / f64::from(k) * 1.05)?;
    locate(p, k, &scan, cfg).map(|(sol, _)| sol)
}

/// Solutions found for branch `k` in every bracket of the scan. The first
/// (innermost) one is returned; the energies of any further distinct
/// solutions are reported alongside.
fn locate(
    p: &ProblemParams,
    k: u32,
    scan: &HalfPeriodScan,
    cfg: &ShootingConfig,
) -> Result<(PeriodicSolution, Vec<f64>), SolveError> {
    let target = 0.5 * p.period() / f64::from(k);
    let brackets = scan.brackets(target);
    let Some(&(lo, hi)) = brackets.first() else {
        return Err(SolveError::NotBracketed {
            k,
            half_period: target,
        });
    };
    let root = newton_in_s(p, k, 0.5 * (lo + hi), Some((lo, hi)), cfg)?;
    let sol = build_solution(p, k, root, cfg)?;
    let mut others = Vec::new();
    for &(lo, hi) in &brackets[1..] {
        if let Ok(root) = newton_in_s(p, k, 0.5 * (lo + hi), Some((lo, hi)), cfg) {
            if let Ok(other) = build_solution(p, k, root, cfg) {
                if (other.energy - sol.energy).abs() > 1e-9 * center_energy(p).abs() {
                    others.push(other.energy);
                }
            }
        }
    }
    Ok((sol, others))
}

/// Two solutions of the same branch at the same parameters with different
/// orbit energies: they cannot be time translates of each other.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NonEquivalence {
    pub k: u32,
    pub mu: f64,
    pub energies: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BranchOutcome {
    pub k: u32,
    pub result: Result<PeriodicSolution, SolveError>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolutionSet {
    pub params: ProblemParams,
    pub lower_bound: u32,
    pub constant: PeriodicSolution,
    pub branches: Vec<BranchOutcome>,
    pub findings: Vec<NonEquivalence>,
}

impl SolutionSet {
    /// Accepted solutions, the constant one first.
    pub fn solutions(&self) -> Vec<&PeriodicSolution> {
        std::iter::once(&self.constant)
            .chain(self.branches.iter().filter_map(|b| b.result.as_ref().ok()))
            .collect()
    }

    pub fn found_count(&self) -> usize {
        self.solutions().len()
    }

    pub fn nonconstant_count(&self) -> usize {
        self.found_count() - 1
    }
}

/// The constant solution plus one solution on each branch `k` whose
/// degeneracy instant lies strictly below `mu`.
pub fn distinct_solutions(
    q: f64,
    period: f64,
    mu: f64,
    cfg: &ShootingConfig,
) -> Result<SolutionSet, SolveError> {
    cfg.validate()?;
    let p = ProblemParams::new(q, mu, period)?;
    let lower_bound = count_lower_bound(q, period, mu);
    let mut set = SolutionSet {
        params: p,
        lower_bound,
        constant: PeriodicSolution::constant(p, cfg.grid_size),
        branches: Vec::new(),
        findings: Vec::new(),
    };
    if lower_bound == 0 {
        return Ok(set);
    }
    let scan = HalfPeriodScan::new(&p, 0.5 * period * 1.05)?;
    let outcomes: Vec<_> = (1..=lower_bound)
        .into_par_iter()
        .map(|k| (k, locate(&p, k, &scan, cfg)))
        .collect();
    for (k, outcome) in outcomes {
        match outcome {
            Ok((sol, others)) => {
                if !others.is_empty() {
                    let mut energies = vec![sol.energy];
                    energies.extend(others);
                    set.findings.push(NonEquivalence { k, mu, energies });
                }
                set.branches.push(BranchOutcome { k, result: Ok(sol) });
            }
            Err(e) => set.branches.push(BranchOutcome { k, result: Err(e) }),
        }
    }
    Ok(set)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchPoint {
    pub mu: f64,
    pub solution: PeriodicSolution,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Branch {
    pub k: u32,
    pub origin: DegeneracyInstant,
    pub points: Vec<BranchPoint>,
}

/// Solve `R(mu, s) = 0` for `mu` at fixed `s`.
fn newton_in_mu(
    base: &ProblemParams,
    k: u32,
    s: f64,
    mu0: f64,
    cfg: &ShootingConfig,
) -> Result<(f64, Root), SolveError> {
    let mut mu = mu0;
    let mut last = f64::INFINITY;
    for it in 1..=cfg.max_newton_iters {
        let p = base.with_mu(mu)?;
        let shot = shoot_from_min(&p, k, s)?;
        last = shot.residual;
        if converged(&p, cfg, shot.residual) {
            return Ok((
                mu,
                Root {
                    s,
                    iterations: it,
                    residual: shot.residual,
                },
            ));
        }
        let step = -shot.residual / shot.d_dmu;
        if !step.is_finite() {
            break;
        }
        mu = (mu + step).max(0.5 * mu);
    }
    Err(SolveError::Newton {
        iterations: cfg.max_newton_iters,
        residual: last,
    })
}

/// Corrector of pseudo-arclength continuation: `R(z) = 0` on the hyperplane
/// through `pred` orthogonal to `tangent`, `z = (mu, s)`.
fn arclength_corrector(
    base: &ProblemParams,
    k: u32,
    pred: [f64; 2],
    tangent: [f64; 2],
    max_iters: usize,
    cfg: &ShootingConfig,
) -> Result<([f64; 2], Root), SolveError> {
    let mut z = pred;
    for it in 1..=max_iters {
        if !(z[0] > 0.0 && z[1] < 0.0) {
            break;
        }
        let p = base.with_mu(z[0])?;
        let shot = shoot_from_min(&p, k, z[1])?;
        let g = tangent[0] * (z[0] - pred[0]) + tangent[1] * (z[1] - pred[1]);
        let det = shot.d_dmu * tangent[1] - shot.d_ds * tangent[0];
        if det == 0.0 || !det.is_finite() {
            break;
        }
        let dmu = -(shot.residual * tangent[1] - shot.d_ds * g) / det;
        let ds = -(shot.d_dmu * g - shot.residual * tangent[0]) / det;
        if converged(&p, cfg, shot.residual) && g.abs() < 1e-9 {
            return Ok((
                z,
                Root {
                    s: z[1],
                    iterations: it,
                    residual: shot.residual,
                },
            ));
        }
        z = [z[0] + dmu, z[1] + ds];
    }
    Err(SolveError::Newton {
        iterations: max_iters,
        residual: f64::NAN,
    })
}

/// Trace branch `k` from its degeneracy instant up to `mu_max`.
///
/// Two seed points at amplitudes `1 - delta` and `1 - 2 delta` below the
/// constant are solved for `mu`; from there a secant predictor and the
/// arclength corrector march in `(mu, ln u_min)`. Steps are halved on
/// failure and doubled after three consecutive easy steps. The last point sits
/// exactly at `mu_max`.
pub fn continue_branch(
    q: f64,
    period: f64,
    k: u32,
    mu_max: f64,
    cfg: &ShootingConfig,
) -> Result<Branch, SolveError> {
    cfg.validate()?;
    let origin = degeneracy_instant(q, period, k)?;
    if !(mu_max > origin.mu_k) {
        return Err(SolveError::BelowInstant {
            k,
            mu: mu_max,
            mu_k: origin.mu_k,
            eigenvalue: eigenvalue(q, period, mu_max, k),
        });
    }
    let base = ProblemParams::new(q, origin.mu_k, period)?;
    let delta = cfg.seed_offset;
    let seed_fail = |mu: f64| SolveError::Seed {
        k,
        mu,
        eigenvalue: eigenvalue(q, period, mu, k),
    };
    let s1 = (-delta).ln_1p();
    let s2 = (-2.0 * delta).ln_1p();
    let (mu1, root1) =
        newton_in_mu(&base, k, s1, origin.mu_k, cfg).map_err(|_| seed_fail(origin.mu_k))?;
    let (mu2, root2) = newton_in_mu(&base, k, s2, mu1, cfg).map_err(|_| seed_fail(mu1))?;
    let mut branch = Branch {
        k,
        origin,
        points: Vec::new(),
    };
    if mu1 >= mu_max {
        let p = base.with_mu(mu_max)?;
        let sol = solve_branch_point(&p, k, 1.0 + delta, cfg)?;
        branch.points.push(BranchPoint {
            mu: mu_max,
            solution: sol,
        });
        return Ok(branch);
    }
    for (mu, root) in [(mu1, root1), (mu2, root2)] {
        if mu >= mu_max {
            break;
        }
        let sol = build_solution(&base.with_mu(mu)?, k, root, cfg)?;
        branch.points.push(BranchPoint { mu, solution: sol });
    }
    let refuse = (-0.5 * delta).ln_1p();
    let mut z_prev = [mu1, s1];
    let mut z = [mu2, s2];
    if mu2 >= mu_max {
        z = z_prev;
        z_prev = [origin.mu_k, 0.0];
    }
    let mut h = cfg.arclength_step;
    let mut easy = 0;
    let corrector_iters = cfg.max_newton_iters.min(8);
    loop {
        let d = [z[0] - z_prev[0], z[1] - z_prev[1]];
        let norm = d[0].hypot(d[1]);
        let tangent = [d[0] / norm, d[1] / norm];
        let pred = [z[0] + h * tangent[0], z[1] + h * tangent[1]];
        let finishing = pred[0] >= mu_max;
        let attempt = if finishing {
            let frac = (mu_max - z[0]) / (pred[0] - z[0]);
            let s_guess = z[1] + frac * (pred[1] - z[1]);
            base.with_mu(mu_max)
                .map_err(SolveError::from)
                .and_then(|p| {
                    let root = newton_in_s(&p, k, s_guess, None, cfg)?;
                    Ok(([mu_max, root.s], root))
                })
        } else {
            arclength_corrector(&base, k, pred, tangent, corrector_iters, cfg)
        };
        let accepted = attempt.and_then(|(z_new, root)| {
            if z_new[1] >= refuse || z_new[1] >= z[1] {
                return Err(SolveError::Newton {
                    iterations: root.iterations,
                    residual: root.residual,
                });
            }
            let sol = build_solution(&base.with_mu(z_new[0])?, k, root, cfg)?;
            Ok((z_new, root, sol))
        });
        match accepted {
            Ok((z_new, root, sol)) => {
                branch.points.push(BranchPoint {
                    mu: z_new[0],
                    solution: sol,
                });
                if finishing {
                    return Ok(branch);
                }
                z_prev = z;
                z = z_new;
                easy = if root.iterations <= 3 { easy + 1 } else { 0 };
                if easy >= 3 {
                    h = (2.0 * h).min(cfg.max_step);
                    easy = 0;
                }
            }
            Err(_) => {
                h *= 0.5;
                easy = 0;
                if h < 1e-9 {
                    return Err(SolveError::StepUnderflow { mu: z[0] });
                }
            }
        }
    }
}

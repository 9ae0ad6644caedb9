//! Conformal factors `u(t)` on `N x S^1(r)` with constant scalar curvature.
//!
//! For `g = u^(4/(n-1)) (g_N + r^2 dt^2)` with `u` depending on the circle
//! angle only, constant curvature `R_N` is exactly the periodic problem with
//! `q = (n+3)/(n-1)`, `mu = (n-1) R_N r^2 / (4n)` and period `2 pi`. Mapping
//! tori of `N` reduce to the same equation.

use rayon::prelude::*;
use rustfft::{num_complex::Complex, FftPlanner};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use thiserror::Error;

use crate::bifurcation::{count_lower_bound, mode_coordinate};
use crate::continuation::{distinct_solutions, PeriodicSolution, ShootingConfig, SolveError};
use crate::ode::ProblemParams;
use crate::verify::verify;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum YamabeError {
    #[error("dimension n must be at least 2 (got {0})")]
    Dimension(u32),
    #[error("scalar curvature R_N must be positive (got {0})")]
    Curvature(f64),
    #[error("radius must be positive (got {0})")]
    Radius(f64),
    #[error("solution parameters (q = {q}, mu = {mu}, T = {period}) do not match the geometry")]
    Mismatch { q: f64, mu: f64, period: f64 },
    #[error(transparent)]
    Solve(#[from] SolveError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeometryParams {
    n: u32,
    r_n: f64,
    r: f64,
}

impl GeometryParams {
    pub fn new(n: u32, r_n: f64, r: f64) -> Result<Self, YamabeError> {
        if n < 2 {
            return Err(YamabeError::Dimension(n));
        }
        if !(r_n > 0.0 && r_n.is_finite()) {
            return Err(YamabeError::Curvature(r_n));
        }
        if !(r > 0.0 && r.is_finite()) {
            return Err(YamabeError::Radius(r));
        }
        Ok(Self { n, r_n, r })
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn scalar_curvature(&self) -> f64 {
        self.r_n
    }

    pub fn radius(&self) -> f64 {
        self.r
    }

    pub fn with_radius(&self, r: f64) -> Result<Self, YamabeError> {
        Self::new(self.n, self.r_n, r)
    }

    fn dim(&self) -> f64 {
        f64::from(self.n)
    }

    pub fn exponent(&self) -> f64 {
        (self.dim() + 3.0) / (self.dim() - 1.0)
    }

    pub fn mu(&self) -> f64 {
        (self.dim() - 1.0) * self.r_n * self.r * self.r / (4.0 * self.dim())
    }
}

pub fn to_ode_params(g: &GeometryParams) -> ProblemParams {
    ProblemParams::new(g.exponent(), g.mu(), 2.0 * PI).expect("geometry maps to valid parameters")
}

/// `r_k = k sqrt(n / R_N)`, the radii at which branch `k` appears.
pub fn critical_radii(g: &GeometryParams, k_max: u32) -> Vec<f64> {
    let unit = (g.dim() / g.r_n).sqrt();
    (1..=k_max).map(|k| f64::from(k) * unit).collect()
}

fn check_match(g: &GeometryParams, sol: &PeriodicSolution) -> Result<(), YamabeError> {
    let p = &sol.params;
    let close = |a: f64, b: f64| (a - b).abs() <= 1e-12 * b.abs();
    if close(p.q(), g.exponent()) && close(p.mu(), g.mu()) && close(p.period(), 2.0 * PI) {
        Ok(())
    } else {
        Err(YamabeError::Mismatch {
            q: p.q(),
            mu: p.mu(),
            period: p.period(),
        })
    }
}

/// Derivative of periodic samples on `[0, period)` by the discrete Fourier
/// transform (Nyquist mode dropped).
pub fn spectral_derivative(samples: &[f64], period: f64) -> Vec<f64> {
    let n = samples.len();
    let mut planner = FftPlanner::new();
    let mut buf: Vec<Complex<f64>> = samples.iter().map(|&x| Complex::new(x, 0.0)).collect();
    planner.plan_fft_forward(n).process(&mut buf);
    let base = 2.0 * PI / period;
    for (j, c) in buf.iter_mut().enumerate() {
        let wave = if j < n / 2 {
            j as f64
        } else if j > n / 2 {
            j as f64 - n as f64
        } else {
            0.0
        };
        *c *= Complex::new(0.0, wave * base);
    }
    planner.plan_fft_inverse(n).process(&mut buf);
    buf.iter().map(|c| c.re / n as f64).collect()
}

/// Scalar curvature of `u^(4/(n-1)) (g_N + r^2 dt^2)` at the grid times:
/// `R_g = 4n/(n-1) u^(-(n+3)/(n-1)) (-u''/r^2 + (n-1)/(4n) R_N u)`.
///
/// `u''` comes from the samples, not from the equation, so a profile that is
/// not a solution shows up as non-constant curvature. It is formed as
/// `u''/u = l'' + l'^2` with `l = ln u`, `l'' ` the spectral derivative of the
/// sampled `l' = u'/u`; this keeps relative accuracy where `u` is small.
pub fn conformal_scalar_curvature(
    g: &GeometryParams,
    sol: &PeriodicSolution,
) -> Result<Vec<f64>, YamabeError> {
    check_match(g, sol)?;
    let n = g.dim();
    let dl: Vec<f64> = sol.profile.iter().map(|x| x.v / x.u).collect();
    let d2l = if dl.iter().all(|&d| d == 0.0) {
        dl.clone()
    } else {
        spectral_derivative(&dl, 2.0 * PI)
    };
    let lead = 4.0 * n / (n - 1.0);
    let mass = (n - 1.0) * g.r_n / (4.0 * n);
    let r2 = g.r * g.r;
    Ok(sol
        .profile
        .iter()
        .zip(dl.iter().zip(&d2l))
        .map(|(x, (&l1, &l2))| lead * x.u.powf(1.0 - g.exponent()) * (mass - (l2 + l1 * l1) / r2))
        .collect())
}

/// `max |R_g - R_N| / R_N` over the grid.
pub fn curvature_deviation(g: &GeometryParams, sol: &PeriodicSolution) -> Result<f64, YamabeError> {
    Ok(conformal_scalar_curvature(g, sol)?
        .iter()
        .map(|r| (r - g.r_n).abs() / g.r_n)
        .fold(0.0, f64::max))
}

/// Volume relative to the product metric: `(1/2pi) int u^(2(n+1)/(n-1)) dt`.
pub fn relative_volume(g: &GeometryParams, sol: &PeriodicSolution) -> Result<f64, YamabeError> {
    check_match(g, sol)?;
    let power = 2.0 * (g.dim() + 1.0) / (g.dim() - 1.0);
    let sum: f64 = sol.profile.iter().map(|x| x.u.powf(power)).sum();
    Ok(sum / sol.profile.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountRow {
    pub r: f64,
    pub lower_bound: u32,
    /// Verified solutions, the constant one included.
    pub found: usize,
    pub failures: Vec<String>,
}

/// Lower bound and verified solution count at each radius of `r_grid`.
pub fn solution_count_vs_radius(
    g_base: &GeometryParams,
    r_grid: &[f64],
    cfg: &ShootingConfig,
) -> Result<Vec<CountRow>, YamabeError> {
    r_grid
        .par_iter()
        .map(|&r| {
            let g = g_base.with_radius(r)?;
            let p = to_ode_params(&g);
            let set = distinct_solutions(p.q(), p.period(), p.mu(), cfg)?;
            let mut failures = Vec::new();
            let mut found = 0;
            for sol in set.solutions() {
                match verify(sol) {
                    Ok(rep) if rep.all_passed() => found += 1,
                    Ok(_) => failures.push(format!("k={}: verification failed", sol.k)),
                    Err(e) => failures.push(format!("k={}: {e}", sol.k)),
                }
            }
            for b in &set.branches {
                if let Err(e) = &b.result {
                    failures.push(format!("k={}: {e}", b.k));
                }
            }
            Ok(CountRow {
                r,
                lower_bound: count_lower_bound(p.q(), p.period(), p.mu()),
                found,
                failures,
            })
        })
        .collect()
}

/// `x = r sqrt(R_N / n)`; branch `k` exists once `x > k`.
pub fn radius_mode_coordinate(g: &GeometryParams) -> f64 {
    let p = to_ode_params(g);
    mode_coordinate(p.q(), p.period(), p.mu())
}

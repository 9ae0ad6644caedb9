//! Adaptive time integration of the planar flow and its variational equation.
//!
//! The stepper is the Dormand-Prince 8(5,3) embedded pair with step-size
//! control on the combined 5th/3rd-order error estimate and a 7th-order
//! continuous extension, generic over the state dimension. All stepping is
//! deterministic: identical inputs give bit-identical trajectories.

mod dop853;
mod tableau;

pub use dop853::{solve, solve_until_event, AutonomousSystem, EventHit, Solution};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ode::{force, PhasePoint, ProblemParams};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IntegrateError {
    #[error("step size underflow at t = {t}")]
    StepUnderflow { t: f64 },
    #[error("non-finite state at t = {t}")]
    NonFinite { t: f64 },
    #[error("step budget exhausted at t = {t}")]
    TooManySteps { t: f64 },
    #[error("empty or reversed time span [{0}, {1}]")]
    EmptySpan(f64, f64),
    #[error("invalid integrator configuration: {0}")]
    InvalidConfig(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegratorConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_step: f64,
    pub dense_output: bool,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            rel_tol: 1e-10,
            abs_tol: 1e-12,
            max_step: f64::INFINITY,
            dense_output: false,
        }
    }
}

impl IntegratorConfig {
    pub fn with_tolerances(rel_tol: f64, abs_tol: f64) -> Self {
        Self {
            rel_tol,
            abs_tol,
            ..Self::default()
        }
    }

    pub fn dense(mut self) -> Self {
        self.dense_output = true;
        self
    }

    pub fn max_step(mut self, max_step: f64) -> Self {
        self.max_step = max_step;
        self
    }

    pub(crate) fn validate(&self) -> Result<(), IntegrateError> {
        if !(self.rel_tol > 0.0) || !(self.abs_tol > 0.0) {
            return Err(IntegrateError::InvalidConfig("tolerances must be positive"));
        }
        if !(self.max_step > 0.0) {
            return Err(IntegrateError::InvalidConfig("max_step must be positive"));
        }
        Ok(())
    }
}

/// `(u, v)` flow of `u'' = mu (u - |u|^(q-1) u)`.
#[derive(Debug, Clone, Copy)]
pub struct PlanarFlow {
    pub params: ProblemParams,
}

impl AutonomousSystem<2> for PlanarFlow {
    #[inline]
    fn rhs(&self, y: &[f64; 2]) -> [f64; 2] {
        [y[1], force(&self.params, y[0])]
    }
}

#[inline]
fn linearized_coefficient(p: &ProblemParams, u: f64) -> f64 {
    p.mu() * (1.0 - p.q() * u.abs().powf(p.q() - 1.0))
}

/// Flow coupled with the 2x2 fundamental matrix, stored row-major after the
/// state: `[u, v, phi_uu, phi_uv, phi_vu, phi_vv]`.
#[derive(Debug, Clone, Copy)]
pub struct VariationalFlow {
    pub params: ProblemParams,
}

impl AutonomousSystem<6> for VariationalFlow {
    #[inline]
    fn rhs(&self, y: &[f64; 6]) -> [f64; 6] {
        let a = linearized_coefficient(&self.params, y[0]);
        [
            y[1],
            force(&self.params, y[0]),
            y[4],
            y[5],
            a * y[2],
            a * y[3],
        ]
    }
}

/// Variational flow extended by the derivative of the state with respect to
/// `mu`, appended as `[du/dmu, dv/dmu]`.
#[derive(Debug, Clone, Copy)]
pub struct ParametricFlow {
    pub params: ProblemParams,
}

impl AutonomousSystem<8> for ParametricFlow {
    #[inline]
    fn rhs(&self, y: &[f64; 8]) -> [f64; 8] {
        let p = &self.params;
        let a = linearized_coefficient(p, y[0]);
        let f = force(p, y[0]);
        [
            y[1],
            f,
            y[4],
            y[5],
            a * y[2],
            a * y[3],
            y[7],
            a * y[6] + f / p.mu(),
        ]
    }
}

/// Derivative of the time-t flow map, `[[du/du0, du/dv0], [dv/du0, dv/dv0]]`.
pub type Sensitivity = [[f64; 2]; 2];

#[derive(Debug, Clone)]
enum DenseData {
    State(Solution<2>),
    Variational(Solution<6>),
}

/// Sampled solution of the planar system, optionally with the flow derivative.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<PhasePoint>,
    pub sensitivity: Option<Vec<Sensitivity>>,
    dense: DenseData,
}

fn unpack_sensitivity(y: &[f64; 6]) -> Sensitivity {
    [[y[2], y[3]], [y[4], y[5]]]
}

impl Trajectory {
    pub fn final_state(&self) -> PhasePoint {
        *self
            .states
            .last()
            .expect("trajectory has at least one sample")
    }

    pub fn final_sensitivity(&self) -> Option<Sensitivity> {
        self.sensitivity.as_ref().and_then(|s| s.last().copied())
    }

    /// Dense-output state; `None` outside the span or without dense output.
    pub fn eval(&self, t: f64) -> Option<PhasePoint> {
        match &self.dense {
            DenseData::State(s) => s.eval(t).map(|y| PhasePoint::new(y[0], y[1])),
            DenseData::Variational(s) => s.eval(t).map(|y| PhasePoint::new(y[0], y[1])),
        }
    }

    pub fn eval_sensitivity(&self, t: f64) -> Option<Sensitivity> {
        match &self.dense {
            DenseData::State(_) => None,
            DenseData::Variational(s) => s.eval(t).map(|y| unpack_sensitivity(&y)),
        }
    }

    pub fn has_dense_output(&self) -> bool {
        match &self.dense {
            DenseData::State(s) => s.has_dense_output(),
            DenseData::Variational(s) => s.has_dense_output(),
        }
    }
}

pub fn integrate(
    p: &ProblemParams,
    x0: PhasePoint,
    t_span: (f64, f64),
    cfg: &IntegratorConfig,
) -> Result<Trajectory, IntegrateError> {
    let sys = PlanarFlow { params: *p };
    let sol = solve(&sys, [x0.u, x0.v], t_span.0, t_span.1, cfg)?;
    Ok(Trajectory {
        times: sol.times.clone(),
        states: sol
            .states
            .iter()
            .map(|y| PhasePoint::new(y[0], y[1]))
            .collect(),
        sensitivity: None,
        dense: DenseData::State(sol),
    })
}

pub fn integrate_with_variational(
    p: &ProblemParams,
    x0: PhasePoint,
    t_span: (f64, f64),
    cfg: &IntegratorConfig,
) -> Result<Trajectory, IntegrateError> {
    let sys = VariationalFlow { params: *p };
    let y0 = [x0.u, x0.v, 1.0, 0.0, 0.0, 1.0];
    let sol = solve(&sys, y0, t_span.0, t_span.1, cfg)?;
    Ok(Trajectory {
        times: sol.times.clone(),
        states: sol
            .states
            .iter()
            .map(|y| PhasePoint::new(y[0], y[1]))
            .collect(),
        sensitivity: Some(sol.states.iter().map(unpack_sensitivity).collect()),
        dense: DenseData::Variational(sol),
    })
}

// Negated comparisons below double as NaN rejection.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bifurcation;
pub mod continuation;
pub mod integrator;
pub mod ode;
pub mod period;
pub mod verify;
pub mod yamabe;

//! Exact symbolic verification of measurement-based identities.
//!
//! This module is independent of the floating-point simulator: it works in
//! rational arithmetic with explicit radical symbols for the coupler
//! reflectivity, so the feedforward identities it certifies hold exactly,
//! not to a tolerance.

mod circuit;
mod derive;
mod expr;

pub use circuit::{poisson_bracket, propagate, CircuitStep, MeasurementRecord, Propagation};
pub use derive::{
    derive_squeezer_law, ideal_limit_check, nullifier_solve, verify_cubic_identity, CubicProof,
    IdealLimitProof, NullifierSolution, SqueezerLaw,
};
pub use expr::{ratio, Mono, QuadExpr, Var, ALL_VARS, N_VARS};

//! Core engine for simulating a loop-based single-mode photonic quantum
//! processor that realizes programmable Gaussian gates by measurement-induced
//! squeezing.
//!
//! The crate is split along the processing chain:
//!
//! * [`gaussian`]: Gaussian states (mean vector + covariance), symplectic
//!   gates, pure loss, homodyne measurement and feedforward, fidelity and
//!   ellipse summaries.
//! * [`compiler`]: translation of an abstract gate list into per-roundtrip
//!   hardware settings (beam-splitter reflectivity, phase levels, feedforward
//!   gain) and a timing chart.
//! * [`machine`]: the loop processor itself: ancilla preparation, one
//!   roundtrip step, schedule execution under a configurable loss budget.
//! * [`tomography`]: temporal-mode extraction from raw traces, quadrature
//!   sampling, maximum-likelihood state reconstruction with subset errors.
//! * [`symbolic`]: exact rational quadrature propagation used to derive and
//!   verify the measurement-induced gate identities, including the cubic
//!   (non-Gaussian) extension.
//!
//! Conventions, fixed everywhere: quadrature ordering is `(x1, p1, x2, p2,
//! ...)`; the vacuum has unit variance in every quadrature; angles cross
//! public interfaces in degrees and are converted to radians internally;
//! homodyne angle 0 measures `x`, 90 measures `p`.

#![no_std]
#![deny(unsafe_code)]
// validation guards are written `!(x > 0.0)` so that NaN fails them too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod compiler;
pub mod error;
pub mod gaussian;
pub mod machine;
pub mod rng;
pub mod symbolic;
pub mod tomography;

pub use error::Error;

/// Convenience alias used across the crate.
pub type Result<T> = core::result::Result<T, Error>;

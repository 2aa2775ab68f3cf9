//! Single-mode Gaussian fidelity.

use alloc::format;
use nalgebra::{Matrix2, Vector2};
use num_traits::Float;

use super::GaussianState;
use crate::{Error, Result};

/// Fidelity between two single-mode Gaussian states, in the transition
/// probability convention: `F(rho, sigma) = (tr sqrt(sqrt(rho) sigma
/// sqrt(rho)))^2`, so that for a pure target `F = <psi|rho|psi>`.
///
/// Closed form in vacuum-variance-1 units:
/// `F = 2 exp(-d^T (V1+V2)^{-1} d / 2) / (sqrt(D + g) - sqrt(g))` with
/// `D = det(V1+V2)`, `g = (det V1 - 1)(det V2 - 1)` and `d` the mean
/// difference.
pub fn fidelity(a: &GaussianState, b: &GaussianState) -> Result<f64> {
    if a.n_modes() != 1 || b.n_modes() != 1 {
        return Err(Error::DimensionMismatch(format!(
            "fidelity is defined here for single-mode states, got {} and {}",
            a.n_modes(),
            b.n_modes()
        )));
    }
    fidelity_moments(
        &a.mean_pair(0)?,
        &a.cov_block(0)?,
        &b.mean_pair(0)?,
        &b.cov_block(0)?,
    )
}

/// Same fidelity directly from first and second moments. Accepts any
/// positive-definite covariances, including statistically reconstructed
/// ones that sit marginally below the physicality bound.
pub fn fidelity_moments(
    mean_a: &Vector2<f64>,
    cov_a: &Matrix2<f64>,
    mean_b: &Vector2<f64>,
    cov_b: &Matrix2<f64>,
) -> Result<f64> {
    let sum = cov_a + cov_b;
    let det_sum = sum[(0, 0)] * sum[(1, 1)] - sum[(0, 1)] * sum[(1, 0)];
    if det_sum <= 0.0 {
        return Err(Error::Unphysical(format!(
            "det(V1+V2) = {det_sum:.3e} not positive"
        )));
    }
    let det_a = cov_a[(0, 0)] * cov_a[(1, 1)] - cov_a[(0, 1)] * cov_a[(1, 0)];
    let det_b = cov_b[(0, 0)] * cov_b[(1, 1)] - cov_b[(0, 1)] * cov_b[(1, 0)];
    // purity defect terms; clamp tiny negatives from pure states
    let g = ((det_a - 1.0) * (det_b - 1.0)).max(0.0);
    let dx = mean_a[0] - mean_b[0];
    let dp = mean_a[1] - mean_b[1];
    // d^T (V1+V2)^{-1} d via the 2x2 adjugate
    let quad = (sum[(1, 1)] * dx * dx - 2.0 * sum[(0, 1)] * dx * dp + sum[(0, 0)] * dp * dp)
        / det_sum;
    let denom = Float::sqrt(det_sum + g) - Float::sqrt(g);
    let f = 2.0 * Float::exp(-0.5 * quad) / denom;
    Ok(f.clamp(0.0, 1.0))
}

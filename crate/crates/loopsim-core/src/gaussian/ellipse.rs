//! Phase-space ellipse summaries for plotting and reporting.

use alloc::format;
use alloc::vec::Vec;
use nalgebra::{Matrix2, Vector2};
use num_traits::Float;

use super::GaussianState;
use crate::{Error, Result};

/// One-sigma error-ellipse description of a single-mode state.
///
/// `tilt_deg` is the angle of the major axis, in `(-90, 90]`; a circular
/// covariance reports tilt 0 (tie-break pinned here).
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct EllipseSummary {
    pub mean_x: f64,
    pub mean_p: f64,
    pub major_variance: f64,
    pub minor_variance: f64,
    pub tilt_deg: f64,
}

/// Eigen-summary of a single-mode covariance.
pub fn ellipse_summary(state: &GaussianState) -> Result<EllipseSummary> {
    if state.n_modes() != 1 {
        return Err(Error::DimensionMismatch(format!(
            "ellipse summary needs a single-mode state, got {} modes",
            state.n_modes()
        )));
    }
    Ok(ellipse_from_moments(
        &state.mean_pair(0)?,
        &state.cov_block(0)?,
    ))
}

/// Same summary directly from first and second moments (no physicality
/// requirement beyond symmetry of the covariance).
pub fn ellipse_from_moments(mean: &Vector2<f64>, cov: &Matrix2<f64>) -> EllipseSummary {
    let (a, b, c) = (cov[(0, 0)], cov[(0, 1)], cov[(1, 1)]);
    let scale = a.max(c).max(1.0);
    let (major, minor, tilt_deg) = if Float::abs(b) < 1e-12 * scale && Float::abs(a - c) < 1e-12 * scale {
        ((a + c) / 2.0, (a + c) / 2.0, 0.0)
    } else {
        let half_tr = (a + c) / 2.0;
        let disc = Float::sqrt((a - c) * (a - c) / 4.0 + b * b);
        let tilt = Float::to_degrees(0.5 * Float::atan2(2.0 * b, a - c));
        // atan2 yields (-180, 180], halved to (-90, 90]
        (half_tr + disc, half_tr - disc, tilt)
    };
    EllipseSummary {
        mean_x: mean[0],
        mean_p: mean[1],
        major_variance: major,
        minor_variance: minor,
        tilt_deg,
    }
}

impl EllipseSummary {
    /// Polyline of the 1-sigma contour (standard-deviation ellipse),
    /// `n_points` equally spaced in parameter angle, not closed.
    pub fn contour(&self, n_points: usize) -> Vec<[f64; 2]> {
        let t0 = Float::to_radians(self.tilt_deg);
        let (ux, up) = (Float::cos(t0), Float::sin(t0));
        let (wx, wp) = (-up, ux);
        let sa = Float::sqrt(self.major_variance.max(0.0));
        let sb = Float::sqrt(self.minor_variance.max(0.0));
        (0..n_points)
            .map(|k| {
                let t = core::f64::consts::TAU * k as f64 / n_points as f64;
                let (ca, sb_t) = (sa * Float::cos(t), sb * Float::sin(t));
                [
                    self.mean_x + ca * ux + sb_t * wx,
                    self.mean_p + ca * up + sb_t * wp,
                ]
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::super::{make_gate, GateSpec};
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn sheared_vacuum_has_exact_eigenvalues_and_tilt() {
        // [[1, 1.5], [1.5, 3.25]] has eigenvalues exactly 4 and 1/4
        let g = make_gate(GateSpec::QuadraticPhase { kappa: 0.75 }).unwrap();
        let s = GaussianState::vacuum(1).apply(&g).unwrap();
        let e = ellipse_summary(&s).unwrap();
        assert_relative_eq!(e.major_variance, 4.0, epsilon = 1e-12);
        assert_relative_eq!(e.minor_variance, 0.25, epsilon = 1e-12);
        assert_relative_eq!(e.tilt_deg, Float::to_degrees(Float::atan2(2.0, 1.0)), epsilon = 1e-9);
        // cross-check against a generic eigensolver
        let eig = nalgebra::linalg::SymmetricEigen::new(s.cov().clone());
        assert_relative_eq!(eig.eigenvalues.max(), e.major_variance, epsilon = 1e-12);
        assert_relative_eq!(eig.eigenvalues.min(), e.minor_variance, epsilon = 1e-12);
    }

    #[test]
    fn squeezed_state_tilt_is_zero_antisqueezed_axis_is_x() {
        let e = ellipse_summary(&GaussianState::squeezed_vacuum(0.44)).unwrap();
        assert_relative_eq!(e.tilt_deg, 0.0);
        assert_relative_eq!(e.major_variance, Float::exp(0.88), epsilon = 1e-12);
    }

    #[test]
    fn p_squeezed_reports_major_axis_along_p() {
        let e = ellipse_summary(&GaussianState::squeezed_vacuum(-0.44)).unwrap();
        assert_relative_eq!(e.tilt_deg, 90.0, epsilon = 1e-12);
    }

    #[test]
    fn circular_state_tie_breaks_to_zero_tilt() {
        let e = ellipse_summary(&GaussianState::thermal(2.0).unwrap()).unwrap();
        assert_relative_eq!(e.tilt_deg, 0.0);
        assert_relative_eq!(e.major_variance, 2.0);
        assert_relative_eq!(e.minor_variance, 2.0);
    }

    #[test]
    fn tilt_is_rotation_equivariant() {
        let base = GaussianState::squeezed_vacuum(0.6);
        for &th in &[10.0, 45.0, 89.0, 120.0, -30.0] {
            let rot = make_gate(GateSpec::Phase { theta_deg: th }).unwrap();
            let e = ellipse_summary(&base.apply(&rot).unwrap()).unwrap();
            let mut want = th % 180.0;
            if want > 90.0 {
                want -= 180.0;
            }
            if want <= -90.0 {
                want += 180.0;
            }
            assert_relative_eq!(e.tilt_deg, want, epsilon = 1e-9);
        }
    }

    #[test]
    fn contour_points_satisfy_the_ellipse_equation() {
        let g = make_gate(GateSpec::QuadraticPhase { kappa: 0.46 }).unwrap();
        let s = GaussianState::coherent(1.0, -0.5).apply(&g).unwrap();
        let e = ellipse_summary(&s).unwrap();
        let v = s.cov_block(0).unwrap();
        let inv = v.try_inverse().unwrap();
        for pt in e.contour(64) {
            let dx = pt[0] - e.mean_x;
            let dp = pt[1] - e.mean_p;
            let q = inv[(0, 0)] * dx * dx + 2.0 * inv[(0, 1)] * dx * dp + inv[(1, 1)] * dp * dp;
            assert_relative_eq!(q, 1.0, epsilon = 1e-9);
        }
    }
}

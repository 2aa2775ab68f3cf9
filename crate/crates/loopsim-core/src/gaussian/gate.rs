//! Symplectic gates and their construction.

use alloc::format;
use nalgebra::{DMatrix, DVector};
use num_traits::Float;

use super::omega;
use crate::{Error, Result};

/// Tolerance on the symplectic-form defect `S Omega S^T - Omega`.
pub const SYMPLECTIC_FORM_TOL: f64 = 1e-12;

/// Gate descriptions accepted by [`make_gate`].
///
/// Angles are in degrees. The beam splitter follows the convention, used by
/// every module in this crate, that the retained port is
/// `sqrt(R)*a - sqrt(T)*b` and the tap port `sqrt(T)*a + sqrt(R)*b`
/// (identically for x and p), where `R` is the reflectivity, `T = 1 - R`,
/// and `(a, b)` are the two addressed modes in listed order.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GateSpec {
    /// `diag(e^r, e^{-r})` on (x, p): stretches x, squeezes p for r > 0.
    Squeeze { r: f64 },
    /// Quadratic phase gate `[[1, 0], [2*kappa, 1]]`: shears p by x.
    QuadraticPhase { kappa: f64 },
    /// Rotation by `theta_deg`: `x' = x cos - p sin`, `p' = x sin + p cos`.
    Phase { theta_deg: f64 },
    /// Displacement of the mean by `(dx, dp)`.
    Displace { dx: f64, dp: f64 },
    /// Two-mode beam splitter with reflectivity `R` in [0, 1].
    BeamSplitter { reflectivity: f64 },
}

/// Affine symplectic map: `z -> S z + d` with `S Omega S^T = Omega`.
#[derive(Debug, Clone, PartialEq)]
pub struct SymplecticOp {
    matrix: DMatrix<f64>,
    displacement: DVector<f64>,
}

impl SymplecticOp {
    /// Validates the symplectic form before accepting the map.
    pub fn new(matrix: DMatrix<f64>, displacement: DVector<f64>) -> Result<Self> {
        let dim = matrix.nrows();
        if dim == 0 || !dim.is_multiple_of(2) || matrix.ncols() != dim {
            return Err(Error::DimensionMismatch(format!(
                "symplectic matrix is {}x{}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        if displacement.len() != dim {
            return Err(Error::DimensionMismatch(format!(
                "displacement length {} for {dim}x{dim} matrix",
                displacement.len()
            )));
        }
        if matrix.iter().chain(displacement.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("symplectic map"));
        }
        let om = omega(dim / 2);
        let defect = (&matrix * &om * matrix.transpose() - &om).amax();
        // Scale-aware: entries of S Omega S^T grow like |S|^2, and so does
        // the attainable rounding error.
        let scale = matrix.amax().max(1.0);
        if defect > SYMPLECTIC_FORM_TOL * scale * scale {
            return Err(Error::NotSymplectic(defect));
        }
        Ok(Self { matrix, displacement })
    }

    pub fn identity(n_modes: usize) -> Self {
        Self {
            matrix: DMatrix::identity(2 * n_modes, 2 * n_modes),
            displacement: DVector::zeros(2 * n_modes),
        }
    }

    pub fn n_modes(&self) -> usize {
        self.matrix.nrows() / 2
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn displacement(&self) -> &DVector<f64> {
        &self.displacement
    }

    /// Composition `other after self`: applying the result equals applying
    /// `self` first, then `other`.
    pub fn then(&self, other: &Self) -> Result<Self> {
        if other.n_modes() != self.n_modes() {
            return Err(Error::DimensionMismatch(format!(
                "composing {}-mode with {}-mode map",
                self.n_modes(),
                other.n_modes()
            )));
        }
        Ok(Self {
            matrix: &other.matrix * &self.matrix,
            displacement: &other.matrix * &self.displacement + &other.displacement,
        })
    }
}

/// Builds the symplectic map for a gate description. Single-mode gates come
/// out as 1-mode maps, the beam splitter as a 2-mode map; use
/// [`super::GaussianState::apply_on`] to address specific modes.
pub fn make_gate(spec: GateSpec) -> Result<SymplecticOp> {
    match spec {
        GateSpec::Squeeze { r } => {
            if !r.is_finite() || Float::abs(r) > 20.0 {
                return Err(Error::BadParameter(format!(
                    "squeeze parameter r = {r} outside sane range"
                )));
            }
            SymplecticOp::new(
                DMatrix::from_row_slice(2, 2, &[Float::exp(r), 0.0, 0.0, Float::exp(-r)]),
                DVector::zeros(2),
            )
        }
        GateSpec::QuadraticPhase { kappa } => {
            if !kappa.is_finite() {
                return Err(Error::NonFinite("quadratic phase strength"));
            }
            SymplecticOp::new(
                DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 2.0 * kappa, 1.0]),
                DVector::zeros(2),
            )
        }
        GateSpec::Phase { theta_deg } => {
            if !theta_deg.is_finite() {
                return Err(Error::NonFinite("phase angle"));
            }
            let t = Float::to_radians(theta_deg);
            let (s, c) = (Float::sin(t), Float::cos(t));
            SymplecticOp::new(
                DMatrix::from_row_slice(2, 2, &[c, -s, s, c]),
                DVector::zeros(2),
            )
        }
        GateSpec::Displace { dx, dp } => {
            if !dx.is_finite() || !dp.is_finite() {
                return Err(Error::NonFinite("displacement"));
            }
            SymplecticOp::new(DMatrix::identity(2, 2), DVector::from_vec(alloc::vec![dx, dp]))
        }
        GateSpec::BeamSplitter { reflectivity } => {
            if !(0.0..=1.0).contains(&reflectivity) {
                return Err(Error::BadParameter(format!(
                    "beam-splitter reflectivity {reflectivity} outside [0, 1]"
                )));
            }
            let sr = Float::sqrt(reflectivity);
            let st = Float::sqrt(1.0 - reflectivity);
            let mut m = DMatrix::zeros(4, 4);
            for d in 0..2 {
                m[(d, d)] = sr;
                m[(d, 2 + d)] = -st;
                m[(2 + d, d)] = st;
                m[(2 + d, 2 + d)] = sr;
            }
            SymplecticOp::new(m, DVector::zeros(4))
        }
    }
}

//! Gaussian states and the operations the processor applies to them.
//!
//! A state over N modes (N <= 4) is a mean vector of length 2N and a
//! symmetric 2N x 2N covariance matrix in the quadrature ordering
//! `(x1, p1, x2, p2, ...)`. Vacuum variance is 1, so the Heisenberg bound
//! reads `V + i*Omega >= 0` with `Omega` the block-diagonal form
//! `[[0, 1], [-1, 0]]` per mode, and every symplectic eigenvalue of a
//! physical covariance is >= 1.

mod channel;
mod ellipse;
mod fidelity;
mod gate;
mod measure;

pub use channel::LossChannel;
pub use ellipse::{ellipse_from_moments, ellipse_summary, EllipseSummary};
pub use fidelity::{fidelity, fidelity_moments};
pub use gate::{make_gate, GateSpec, SymplecticOp};

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use nalgebra::{DMatrix, DVector, Matrix2, Vector2};
use num_traits::Float;

use crate::{Error, Result};

/// Largest mode count the engine accepts. The loop hardware never holds more
/// than two modes at once; four leaves room for composite checks.
pub const MAX_MODES: usize = 4;

/// Relative floor used by [`GaussianState::validate`]: symplectic eigenvalues
/// may undershoot 1 by this much before the state counts as unphysical.
pub const SYMPLECTIC_TOL: f64 = 1e-9;

/// Symplectic form for `n` modes: `Omega[2k..2k+2, 2k..2k+2] = [[0,1],[-1,0]]`.
pub fn omega(n_modes: usize) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(2 * n_modes, 2 * n_modes);
    for k in 0..n_modes {
        m[(2 * k, 2 * k + 1)] = 1.0;
        m[(2 * k + 1, 2 * k)] = -1.0;
    }
    m
}

/// Physicality figures returned by [`GaussianState::validate`].
#[derive(Debug, Clone, Copy)]
pub struct StateCheck {
    /// Smallest eigenvalue of the covariance matrix.
    pub min_cov_eigenvalue: f64,
    /// Smallest symplectic eigenvalue (>= 1 for physical states).
    pub min_symplectic_eigenvalue: f64,
}

/// Mean vector plus covariance matrix of a Gaussian state.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianState {
    n_modes: usize,
    mean: DVector<f64>,
    cov: DMatrix<f64>,
}

impl GaussianState {
    /// Builds a state from explicit moments. The covariance is symmetrized;
    /// asymmetry beyond `1e-6 * scale` is rejected rather than papered over.
    pub fn new(mean: DVector<f64>, cov: DMatrix<f64>) -> Result<Self> {
        let dim = mean.len();
        if dim == 0 || !dim.is_multiple_of(2) {
            return Err(Error::DimensionMismatch(format!(
                "mean length {dim} is not a positive even number"
            )));
        }
        let n_modes = dim / 2;
        if n_modes > MAX_MODES {
            return Err(Error::ModeCount(n_modes));
        }
        if cov.nrows() != dim || cov.ncols() != dim {
            return Err(Error::DimensionMismatch(format!(
                "covariance is {}x{}, expected {dim}x{dim}",
                cov.nrows(),
                cov.ncols()
            )));
        }
        if mean.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("mean vector"));
        }
        if cov.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("covariance matrix"));
        }
        let scale = cov.amax().max(1.0);
        let asym = (&cov - cov.transpose()).amax();
        if asym > 1e-6 * scale {
            return Err(Error::NotSymmetric(asym));
        }
        let cov = (&cov + cov.transpose()) * 0.5;
        Ok(Self { n_modes, mean, cov })
    }

    /// N-mode vacuum: zero mean, identity covariance.
    pub fn vacuum(n_modes: usize) -> Self {
        assert!((1..=MAX_MODES).contains(&n_modes));
        Self {
            n_modes,
            mean: DVector::zeros(2 * n_modes),
            cov: DMatrix::identity(2 * n_modes, 2 * n_modes),
        }
    }

    /// Single-mode coherent state displaced to `(x, p)`.
    pub fn coherent(x: f64, p: f64) -> Self {
        Self {
            n_modes: 1,
            mean: DVector::from_vec(vec![x, p]),
            cov: DMatrix::identity(2, 2),
        }
    }

    /// Single-mode squeezed vacuum with covariance `diag(e^{2r}, e^{-2r})`:
    /// positive `r` stretches x and squeezes p.
    pub fn squeezed_vacuum(r: f64) -> Self {
        Self {
            n_modes: 1,
            mean: DVector::zeros(2),
            cov: DMatrix::from_diagonal(&DVector::from_vec(vec![
                Float::exp(2.0 * r),
                Float::exp(-2.0 * r),
            ])),
        }
    }

    /// Single-mode thermal state with symplectic eigenvalue `nu >= 1`.
    pub fn thermal(nu: f64) -> Result<Self> {
        if !(nu >= 1.0) {
            return Err(Error::BadParameter(format!(
                "thermal occupation parameter nu = {nu} must be >= 1"
            )));
        }
        Ok(Self {
            n_modes: 1,
            mean: DVector::zeros(2),
            cov: DMatrix::identity(2, 2) * nu,
        })
    }

    pub fn n_modes(&self) -> usize {
        self.n_modes
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn cov(&self) -> &DMatrix<f64> {
        &self.cov
    }

    /// Mean `(x, p)` of one mode.
    pub fn mean_pair(&self, mode: usize) -> Result<Vector2<f64>> {
        self.check_mode(mode)?;
        Ok(Vector2::new(self.mean[2 * mode], self.mean[2 * mode + 1]))
    }

    /// 2x2 covariance block of one mode.
    pub fn cov_block(&self, mode: usize) -> Result<Matrix2<f64>> {
        self.check_mode(mode)?;
        let k = 2 * mode;
        Ok(Matrix2::new(
            self.cov[(k, k)],
            self.cov[(k, k + 1)],
            self.cov[(k + 1, k)],
            self.cov[(k + 1, k + 1)],
        ))
    }

    fn check_mode(&self, mode: usize) -> Result<()> {
        if mode >= self.n_modes {
            return Err(Error::BadModeIndex(format!(
                "mode {mode} out of range for {} modes",
                self.n_modes
            )));
        }
        Ok(())
    }

    /// Tensor product, other appended after self.
    pub fn tensor(&self, other: &Self) -> Result<Self> {
        let n = self.n_modes + other.n_modes;
        if n > MAX_MODES {
            return Err(Error::ModeCount(n));
        }
        let mut mean = DVector::zeros(2 * n);
        mean.rows_mut(0, 2 * self.n_modes).copy_from(&self.mean);
        mean.rows_mut(2 * self.n_modes, 2 * other.n_modes)
            .copy_from(&other.mean);
        let mut cov = DMatrix::zeros(2 * n, 2 * n);
        cov.view_mut((0, 0), (2 * self.n_modes, 2 * self.n_modes))
            .copy_from(&self.cov);
        cov.view_mut(
            (2 * self.n_modes, 2 * self.n_modes),
            (2 * other.n_modes, 2 * other.n_modes),
        )
        .copy_from(&other.cov);
        Ok(Self { n_modes: n, mean, cov })
    }

    /// Applies a symplectic map covering every mode of the state.
    pub fn apply(&self, op: &SymplecticOp) -> Result<Self> {
        if op.n_modes() != self.n_modes {
            return Err(Error::DimensionMismatch(format!(
                "operation on {} modes applied to {}-mode state",
                op.n_modes(),
                self.n_modes
            )));
        }
        let s = op.matrix();
        let mean = s * &self.mean + op.displacement();
        let cov = s * &self.cov * s.transpose();
        let cov = (&cov + cov.transpose()) * 0.5;
        Ok(Self { n_modes: self.n_modes, mean, cov })
    }

    /// Applies a smaller symplectic map to the listed modes (identity on the
    /// rest). Mode indices must be distinct and in range.
    pub fn apply_on(&self, op: &SymplecticOp, modes: &[usize]) -> Result<Self> {
        if modes.len() != op.n_modes() {
            return Err(Error::DimensionMismatch(format!(
                "operation on {} modes given {} target modes",
                op.n_modes(),
                modes.len()
            )));
        }
        for (i, &m) in modes.iter().enumerate() {
            self.check_mode(m)?;
            if modes[..i].contains(&m) {
                return Err(Error::BadModeIndex(format!("mode {m} listed twice")));
            }
        }
        let dim = 2 * self.n_modes;
        let mut s = DMatrix::identity(dim, dim);
        let mut d = DVector::zeros(dim);
        let sm = op.matrix();
        let dm = op.displacement();
        for (i, &mi) in modes.iter().enumerate() {
            for di in 0..2 {
                let row = 2 * mi + di;
                s[(row, row)] = 0.0;
                for (j, &mj) in modes.iter().enumerate() {
                    for dj in 0..2 {
                        s[(row, 2 * mj + dj)] = sm[(2 * i + di, 2 * j + dj)];
                    }
                }
                d[row] = dm[2 * i + di];
            }
        }
        let full = SymplecticOp::new(s, d)?;
        self.apply(&full)
    }

    /// Removes the listed modes, keeping the marginal over the rest.
    pub fn drop_modes(&self, modes: &[usize]) -> Result<Self> {
        for &m in modes {
            self.check_mode(m)?;
        }
        let keep: Vec<usize> = (0..self.n_modes).filter(|m| !modes.contains(m)).collect();
        if keep.is_empty() {
            return Err(Error::MeasureLastMode);
        }
        let idx: Vec<usize> = keep.iter().flat_map(|&m| [2 * m, 2 * m + 1]).collect();
        let mean = DVector::from_iterator(idx.len(), idx.iter().map(|&i| self.mean[i]));
        let mut cov = DMatrix::zeros(idx.len(), idx.len());
        for (a, &i) in idx.iter().enumerate() {
            for (b, &j) in idx.iter().enumerate() {
                cov[(a, b)] = self.cov[(i, j)];
            }
        }
        Ok(Self { n_modes: keep.len(), mean, cov })
    }

    /// Smallest symplectic eigenvalue of the covariance, computed as the
    /// smallest singular value of `V^{1/2} Omega V^{1/2}` (each symplectic
    /// eigenvalue appears as a doubled singular value of that product).
    pub fn min_symplectic_eigenvalue(&self) -> f64 {
        min_symplectic_eigenvalue(&self.cov)
    }

    /// Physicality check: covariance eigenvalues must be nonnegative and
    /// symplectic eigenvalues must reach 1 up to [`SYMPLECTIC_TOL`]. The
    /// tolerance widens proportionally to the covariance magnitude so that
    /// capped near-ideal states (variances ~1e12) are judged by achievable
    /// floating-point accuracy rather than an impossible absolute bound.
    pub fn validate(&self) -> Result<StateCheck> {
        let eig = nalgebra::linalg::SymmetricEigen::new(self.cov.clone());
        let min_cov = eig.eigenvalues.min();
        let nu_min = self.min_symplectic_eigenvalue();
        let scale = self.cov.amax().max(1.0);
        let tol = SYMPLECTIC_TOL.max(1e-12 * scale);
        if min_cov < -tol {
            return Err(Error::Unphysical(format!(
                "covariance eigenvalue {min_cov:.6e} below zero"
            )));
        }
        if nu_min < 1.0 - tol {
            return Err(Error::Unphysical(format!(
                "symplectic eigenvalue {nu_min:.9} below 1"
            )));
        }
        Ok(StateCheck {
            min_cov_eigenvalue: min_cov,
            min_symplectic_eigenvalue: nu_min,
        })
    }
}

/// See [`GaussianState::min_symplectic_eigenvalue`].
pub fn min_symplectic_eigenvalue(cov: &DMatrix<f64>) -> f64 {
    let n = cov.nrows() / 2;
    let eig = nalgebra::linalg::SymmetricEigen::new(cov.clone());
    let sqrt_vals = eig.eigenvalues.map(|l| if l > 0.0 { Float::sqrt(l) } else { 0.0 });
    let root = &eig.eigenvectors
        * DMatrix::from_diagonal(&sqrt_vals)
        * eig.eigenvectors.transpose();
    let m = &root * omega(n) * &root;
    let svd = m.svd(false, false);
    svd.singular_values.min()
}

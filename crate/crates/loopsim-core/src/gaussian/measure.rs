//! Homodyne measurement: sampled, projective, and unconditional-feedforward
//! forms.

use alloc::format;
use alloc::vec::Vec;
use nalgebra::DVector;
use num_traits::Float;
use rand::Rng;
use rand_distr::StandardNormal;

use super::GaussianState;
use crate::{Error, Result};

impl GaussianState {
    /// Marginal `(mean, variance)` of the quadrature `cos(phi) x + sin(phi) p`
    /// of one mode.
    pub fn quadrature_marginal(&self, mode: usize, angle_deg: f64) -> Result<(f64, f64)> {
        self.check_mode(mode)?;
        let t = Float::to_radians(angle_deg);
        let (s, c) = (Float::sin(t), Float::cos(t));
        let k = 2 * mode;
        let mean = c * self.mean[k] + s * self.mean[k + 1];
        let var = c * c * self.cov[(k, k)]
            + 2.0 * c * s * self.cov[(k, k + 1)]
            + s * s * self.cov[(k + 1, k + 1)];
        Ok((mean, var))
    }

    /// Draws a homodyne outcome at `angle_deg` on `mode` and returns it with
    /// the conditioned state over the remaining modes.
    pub fn homodyne_measure<R: Rng + ?Sized>(
        &self,
        mode: usize,
        angle_deg: f64,
        rng: &mut R,
    ) -> Result<(f64, GaussianState)> {
        let (mean, var) = self.quadrature_marginal(mode, angle_deg)?;
        if var <= 0.0 {
            return Err(Error::SingularMeasurement(var));
        }
        let z: f64 = rng.sample(StandardNormal);
        let outcome = mean + Float::sqrt(var) * z;
        let state = self.homodyne_project(mode, angle_deg, outcome)?;
        Ok((outcome, state))
    }

    /// Conditions on a given homodyne outcome at `angle_deg` on `mode`,
    /// removing that mode. Standard Gaussian conditioning: with
    /// `e` the measured direction, `v = V e`, `s2 = e^T V e`,
    /// `mean' = mean + v (m - e.mean)/s2` and `cov' = V - v v^T / s2`,
    /// both restricted to the kept modes.
    pub fn homodyne_project(
        &self,
        mode: usize,
        angle_deg: f64,
        outcome: f64,
    ) -> Result<GaussianState> {
        self.check_mode(mode)?;
        if self.n_modes() == 1 {
            return Err(Error::MeasureLastMode);
        }
        if !outcome.is_finite() {
            return Err(Error::NonFinite("homodyne outcome"));
        }
        let t = Float::to_radians(angle_deg);
        let (s, c) = (Float::sin(t), Float::cos(t));
        let dim = 2 * self.n_modes();
        let mut e = DVector::zeros(dim);
        e[2 * mode] = c;
        e[2 * mode + 1] = s;
        let v = &self.cov * &e;
        let s2 = e.dot(&v);
        if s2 <= 0.0 {
            return Err(Error::SingularMeasurement(s2));
        }
        let shift = (outcome - e.dot(&self.mean)) / s2;
        let mean = &self.mean + &v * shift;
        let cov = &self.cov - &v * v.transpose() / s2;
        let keep: Vec<usize> = (0..self.n_modes()).filter(|&m| m != mode).collect();
        let idx: Vec<usize> = keep.iter().flat_map(|&m| [2 * m, 2 * m + 1]).collect();
        let mean_out = DVector::from_iterator(idx.len(), idx.iter().map(|&i| mean[i]));
        let mut cov_out = nalgebra::DMatrix::zeros(idx.len(), idx.len());
        for (a, &i) in idx.iter().enumerate() {
            for (b, &j) in idx.iter().enumerate() {
                cov_out[(a, b)] = cov[(i, j)];
            }
        }
        GaussianState::new(mean_out, cov_out)
    }

    /// Measures `mode` at `angle_deg`, scales the outcome by `gain` applied
    /// to `(x, p)` of `target` among the kept modes, and averages over all
    /// outcomes. This is the deterministic (unconditional) description of a
    /// measure-and-displace feedforward loop. With `e` the measured direction
    /// and `G` the gain vector embedded over kept indices:
    /// `mean' = mean_K + G (e.mean)`,
    /// `cov' = V_KK + (e^T V e) G G^T + (V e)_K G^T + G (V e)_K^T`.
    pub fn measure_feedforward(
        &self,
        mode: usize,
        angle_deg: f64,
        target: usize,
        gain: (f64, f64),
    ) -> Result<GaussianState> {
        self.check_mode(mode)?;
        self.check_mode(target)?;
        if target == mode {
            return Err(Error::BadModeIndex(format!(
                "feedforward target {target} is the measured mode"
            )));
        }
        if self.n_modes() == 1 {
            return Err(Error::MeasureLastMode);
        }
        let t = Float::to_radians(angle_deg);
        let (s, c) = (Float::sin(t), Float::cos(t));
        let dim = 2 * self.n_modes();
        let mut e = DVector::zeros(dim);
        e[2 * mode] = c;
        e[2 * mode + 1] = s;
        let v = &self.cov * &e;
        let s2 = e.dot(&v);
        if s2 <= 0.0 {
            return Err(Error::SingularMeasurement(s2));
        }
        let mut g = DVector::zeros(dim);
        g[2 * target] = gain.0;
        g[2 * target + 1] = gain.1;
        let mean = &self.mean + &g * e.dot(&self.mean);
        let cov = &self.cov + (&g * g.transpose()) * s2 + &v * g.transpose() + &g * v.transpose();
        let keep: Vec<usize> = (0..self.n_modes()).filter(|&m| m != mode).collect();
        let idx: Vec<usize> = keep.iter().flat_map(|&m| [2 * m, 2 * m + 1]).collect();
        let mean_out = DVector::from_iterator(idx.len(), idx.iter().map(|&i| mean[i]));
        let mut cov_out = nalgebra::DMatrix::zeros(idx.len(), idx.len());
        for (a, &i) in idx.iter().enumerate() {
            for (b, &j) in idx.iter().enumerate() {
                cov_out[(a, b)] = cov[(i, j)];
            }
        }
        GaussianState::new(mean_out, cov_out)
    }
}

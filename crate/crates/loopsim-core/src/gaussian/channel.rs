//! Pure-loss channel.

use alloc::format;
use num_traits::Float;

use super::GaussianState;
use crate::{Error, Result};

/// Pure loss with transmissivity `eta` on one mode: the mode is mixed with
/// vacuum on a beam splitter of transmissivity `eta` and the vacuum port is
/// traced out.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct LossChannel {
    pub transmissivity: f64,
    pub mode: usize,
}

impl LossChannel {
    pub fn new(transmissivity: f64, mode: usize) -> Result<Self> {
        if !(0.0..=1.0).contains(&transmissivity) {
            return Err(Error::BadParameter(format!(
                "transmissivity {transmissivity} outside [0, 1]"
            )));
        }
        Ok(Self { transmissivity, mode })
    }
}

impl GaussianState {
    /// Applies pure loss to one mode: means scale by `sqrt(eta)`, the mode's
    /// covariance block becomes `eta*V + (1-eta)*I`, and cross-covariances
    /// with other modes scale by `sqrt(eta)`.
    pub fn apply_loss(&self, channel: &LossChannel) -> Result<Self> {
        let m = channel.mode;
        if m >= self.n_modes() {
            return Err(Error::BadModeIndex(format!(
                "loss on mode {m} of {}-mode state",
                self.n_modes()
            )));
        }
        let eta = channel.transmissivity;
        let root = Float::sqrt(eta);
        let mut out = self.clone();
        for d in 0..2 {
            out.mean[2 * m + d] *= root;
        }
        let dim = 2 * self.n_modes();
        for i in 0..dim {
            for d in 0..2 {
                let j = 2 * m + d;
                if i / 2 == m {
                    continue;
                }
                out.cov[(i, j)] *= root;
                out.cov[(j, i)] *= root;
            }
        }
        for a in 0..2 {
            for b in 0..2 {
                let (i, j) = (2 * m + a, 2 * m + b);
                out.cov[(i, j)] = eta * self.cov[(i, j)] + if a == b { 1.0 - eta } else { 0.0 };
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::super::{make_gate, GateSpec};
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::DMatrix;

    #[test]
    fn vacuum_is_a_fixed_point() {
        let v = GaussianState::vacuum(1);
        let out = v.apply_loss(&LossChannel::new(0.3, 0).unwrap()).unwrap();
        assert_relative_eq!((out.cov() - v.cov()).amax(), 0.0, epsilon = 1e-15);
        assert_relative_eq!(out.mean().amax(), 0.0);
    }

    #[test]
    fn mean_scales_by_sqrt_eta() {
        let s = GaussianState::coherent(4.0, -2.0);
        let out = s.apply_loss(&LossChannel::new(0.81, 0).unwrap()).unwrap();
        assert_relative_eq!(out.mean()[0], 4.0 * 0.9, epsilon = 1e-15);
        assert_relative_eq!(out.mean()[1], -2.0 * 0.9, epsilon = 1e-15);
    }

    #[test]
    fn loss_composes_as_a_semigroup() {
        let s = GaussianState::squeezed_vacuum(0.7);
        let c1 = LossChannel::new(0.94, 0).unwrap();
        let c2 = LossChannel::new(0.81, 0).unwrap();
        let chained = s.apply_loss(&c1).unwrap().apply_loss(&c2).unwrap();
        let direct = s
            .apply_loss(&LossChannel::new(0.94 * 0.81, 0).unwrap())
            .unwrap();
        assert_relative_eq!((chained.cov() - direct.cov()).amax(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn loss_equals_beam_splitter_with_traced_vacuum() {
        // independent construction: mix with vacuum on a splitter whose
        // retained port keeps sqrt(eta) of the signal, then drop the tap.
        let eta = 0.75f64;
        let s = GaussianState::squeezed_vacuum(0.5).apply(
            &make_gate(GateSpec::Displace { dx: 1.0, dp: 0.5 }).unwrap(),
        )
        .unwrap();
        let direct = s.apply_loss(&LossChannel::new(eta, 0).unwrap()).unwrap();
        // retained = sqrt(R) a - sqrt(T) b with R = eta mixes in vacuum b
        let bs = make_gate(GateSpec::BeamSplitter { reflectivity: eta }).unwrap();
        let via_bs = s
            .tensor(&GaussianState::vacuum(1))
            .unwrap()
            .apply(&bs)
            .unwrap()
            .drop_modes(&[1])
            .unwrap();
        assert_relative_eq!((direct.cov() - via_bs.cov()).amax(), 0.0, epsilon = 1e-12);
        assert_relative_eq!((direct.mean() - via_bs.mean()).amax(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn cross_covariance_scales_on_multimode_state() {
        // correlated two-mode state via a splitter, then loss on mode 0
        let bs = make_gate(GateSpec::BeamSplitter { reflectivity: 0.5 }).unwrap();
        let two = GaussianState::squeezed_vacuum(0.8)
            .tensor(&GaussianState::vacuum(1))
            .unwrap()
            .apply(&bs)
            .unwrap();
        let eta = 0.4f64;
        let out = two.apply_loss(&LossChannel::new(eta, 0).unwrap()).unwrap();
        let root = eta.sqrt();
        let mut expected = two.cov().clone();
        let scaled: DMatrix<f64> = expected.clone();
        for i in 0..4 {
            for j in 0..4 {
                expected[(i, j)] = match (i / 2 == 0, j / 2 == 0) {
                    (true, true) => {
                        eta * scaled[(i, j)] + if i == j { 1.0 - eta } else { 0.0 }
                    }
                    (true, false) | (false, true) => root * scaled[(i, j)],
                    (false, false) => scaled[(i, j)],
                };
            }
        }
        assert_relative_eq!((out.cov() - expected).amax(), 0.0, epsilon = 1e-14);
    }

    #[test]
    fn full_loss_resets_to_vacuum() {
        let s = GaussianState::coherent(3.0, 1.0);
        let out = s.apply_loss(&LossChannel::new(0.0, 0).unwrap()).unwrap();
        assert_relative_eq!(out.mean().amax(), 0.0);
        assert_relative_eq!((out.cov() - DMatrix::identity(2, 2)).amax(), 0.0);
    }
}

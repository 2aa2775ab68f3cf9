//! Cross-checks the closed-form Gaussian fidelity against a number-basis
//! computation of the Uhlmann fidelity that shares no code with it: density
//! matrices are built in a truncated oscillator basis from matrix
//! exponentials of ladder operators, and F = (tr sqrt(sqrt(rho) sigma
//! sqrt(rho)))^2 is evaluated with a cyclic Jacobi eigensolver.
//!
//! The square roots come straight from the construction: each state is
//! U rho_thermal U^T with U orthogonal, so sqrt(rho) = U diag(sqrt(w)) U^T
//! with no eigensolver involved. Jacobi is used (rather than a library
//! iterative decomposition) because the inner matrix is heavily
//! rank-deficient and Jacobi converges unconditionally there. The states
//! are x-aligned (diagonal covariance, displacement along x only) so every
//! operator is real.

use approx::assert_relative_eq;
use loopsim_core::gaussian::{fidelity, GaussianState};
use nalgebra::{DMatrix, DVector};

const DIM: usize = 90;

fn annihilation(dim: usize) -> DMatrix<f64> {
    let mut a = DMatrix::zeros(dim, dim);
    for n in 1..dim {
        a[(n - 1, n)] = (n as f64).sqrt();
    }
    a
}

/// Scaling-and-squaring matrix exponential. The generators used here are
/// antisymmetric with small norm, so a modest Taylor order is exact to
/// machine precision after scaling.
fn mat_exp(m: &DMatrix<f64>) -> DMatrix<f64> {
    let dim = m.nrows();
    let norm = m.abs().max();
    let squarings = if norm > 0.5 {
        (norm / 0.5).log2().ceil() as i32
    } else {
        0
    };
    let scaled = m / 2f64.powi(squarings);
    let mut term = DMatrix::identity(dim, dim);
    let mut sum = DMatrix::identity(dim, dim);
    for k in 1..=24 {
        term = (&term * &scaled) / k as f64;
        sum += &term;
    }
    for _ in 0..squarings {
        sum = &sum * &sum;
    }
    sum
}

/// exp((r/2)(adag^2 - a^2)); with x = a + adag this stretches x by e^r.
fn squeeze_op(a: &DMatrix<f64>, r: f64) -> DMatrix<f64> {
    let adag = a.transpose();
    let gen = (&adag * &adag - a * a) * (r / 2.0);
    mat_exp(&gen)
}

/// exp((dx/2)(adag - a)); displaces <x> to dx (vacuum covariance is the
/// identity in these units).
fn displace_op(a: &DMatrix<f64>, dx: f64) -> DMatrix<f64> {
    let gen = (a.transpose() - a) * (dx / 2.0);
    mat_exp(&gen)
}

/// Thermal number-state weights (1 - q) q^n, renormalized after the
/// truncation. Pure states reach here with nu = 1 up to rounding, so the
/// ratio is clamped to keep the weights nonnegative.
fn thermal_weights(dim: usize, nu: f64) -> Vec<f64> {
    let q = ((nu - 1.0) / (nu + 1.0)).max(0.0);
    let mut weights = Vec::with_capacity(dim);
    let mut w = 1.0;
    for _ in 0..dim {
        weights.push(w);
        w *= q;
    }
    let total: f64 = weights.iter().sum();
    weights.iter().map(|v| v / total).collect()
}

/// Square root of the density matrix of the x-aligned Gaussian state with
/// covariance diag(vx, vp) and mean (dx, 0). The state is U rho_th U^T for
/// orthogonal U = D S, so the root is U diag(sqrt(w)) U^T exactly.
fn fock_sqrt_rho(vx: f64, vp: f64, dx: f64) -> DMatrix<f64> {
    let a = annihilation(DIM);
    let nu = (vx * vp).sqrt();
    let r = 0.5 * (vx / nu).ln();
    let u = displace_op(&a, dx) * squeeze_op(&a, r);
    let roots = DVector::from_iterator(
        DIM,
        thermal_weights(DIM, nu).into_iter().map(|w| w.sqrt()),
    );
    &u * DMatrix::from_diagonal(&roots) * u.transpose()
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi sweeps. Converges
/// unconditionally, degenerate spectra included; sweeps stop once the
/// off-diagonal mass is at rounding level.
fn jacobi_eigenvalues(m: &DMatrix<f64>) -> Vec<f64> {
    let n = m.nrows();
    let mut a = (m + m.transpose()) / 2.0;
    let scale = a.abs().max().max(1e-300);
    for _sweep in 0..30 {
        let mut off = 0.0f64;
        for p in 0..n - 1 {
            for q in p + 1..n {
                off += a[(p, q)] * a[(p, q)];
            }
        }
        if off.sqrt() <= 1e-15 * scale * n as f64 {
            break;
        }
        for p in 0..n - 1 {
            for q in p + 1..n {
                let apq = a[(p, q)];
                if apq.abs() <= 1e-300 {
                    continue;
                }
                // classic 2x2 rotation zeroing a[(p, q)]
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
            }
        }
    }
    (0..n).map(|i| a[(i, i)]).collect()
}

/// Uhlmann fidelity from the two density-matrix roots:
/// F = (tr sqrt(sqrt(rho) sigma sqrt(rho)))^2, with the inner trace taken
/// over the eigenvalues of sqrt(rho) sigma sqrt(rho).
fn uhlmann_fidelity(sqrt_rho: &DMatrix<f64>, sqrt_sigma: &DMatrix<f64>) -> f64 {
    let inner = sqrt_rho * sqrt_sigma * sqrt_sigma * sqrt_rho;
    let eigenvalues = jacobi_eigenvalues(&inner);
    // sqrt has infinite slope at zero, so rounding-level eigenvalues would
    // otherwise contribute sqrt(noise) each; cut relative to the largest
    let top = eigenvalues.iter().cloned().fold(0.0f64, f64::max);
    let cut = top * 1e-13;
    let trace_root: f64 = eigenvalues
        .into_iter()
        .filter(|v| *v > cut)
        .map(f64::sqrt)
        .sum();
    trace_root * trace_root
}

fn gaussian(vx: f64, vp: f64, dx: f64) -> GaussianState {
    GaussianState::new(
        DVector::from_vec(vec![dx, 0.0]),
        DMatrix::from_diagonal(&DVector::from_vec(vec![vx, vp])),
    )
    .unwrap()
}

#[test]
fn number_basis_uhlmann_fidelity_matches_the_moment_formula() {
    // (vx, vp, dx) per side; pure vs mixed, pure vs pure, mixed vs mixed
    let e = |r: f64| (2.0 * r).exp();
    let cases = [
        ((e(0.44), e(-0.44), 0.0), (2.10, 0.65, 0.0)),
        ((e(0.3), e(-0.3), 0.8), (e(0.5), e(-0.5), -0.5)),
        ((1.8, 0.7, 0.6), (1.2, 0.9, 0.0)),
    ];
    for ((vx1, vp1, dx1), (vx2, vp2, dx2)) in cases {
        let closed = fidelity(&gaussian(vx1, vp1, dx1), &gaussian(vx2, vp2, dx2)).unwrap();
        let numeric = uhlmann_fidelity(
            &fock_sqrt_rho(vx1, vp1, dx1),
            &fock_sqrt_rho(vx2, vp2, dx2),
        );
        assert_relative_eq!(closed, numeric, epsilon = 1e-6);
    }
}

#[test]
fn number_basis_construction_reproduces_known_overlaps() {
    // vacuum vs thermal: F = <0|rho|0> = 2/(nu + 1)
    let vac = fock_sqrt_rho(1.0, 1.0, 0.0);
    let th = fock_sqrt_rho(2.0, 2.0, 0.0);
    assert_relative_eq!(uhlmann_fidelity(&vac, &th), 2.0 / 3.0, epsilon = 1e-9);
    // two coherent states: F = exp(-dx^2/4)
    let left = fock_sqrt_rho(1.0, 1.0, -0.7);
    let right = fock_sqrt_rho(1.0, 1.0, 0.9);
    let expect = (-(1.6f64 * 1.6) / 4.0).exp();
    assert_relative_eq!(uhlmann_fidelity(&left, &right), expect, epsilon = 1e-9);
    // frozen anchor shared with the closed-form test suite
    let f = uhlmann_fidelity(
        &fock_sqrt_rho(0.88f64.exp(), (-0.88f64).exp(), 0.0),
        &fock_sqrt_rho(2.10, 0.65, 0.0),
    );
    assert_relative_eq!(f, 0.912575, epsilon = 1e-5);
}

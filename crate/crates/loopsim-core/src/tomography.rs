//! Homodyne data analysis: temporal-mode extraction from raw traces,
//! vacuum calibration, multi-angle quadrature sampling, Gaussian
//! maximum-likelihood reconstruction with subset bootstrap errors, and the
//! derived reports (fidelity, ellipse parameters, gate matrix).

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use nalgebra::{DMatrix, DVector, Matrix2, Matrix3, SMatrix, SVector, Vector2, Vector3};
use num_traits::Float;
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::gaussian::{ellipse_from_moments, fidelity_moments, EllipseSummary, GaussianState};
use crate::{Error, Result};

/// Bootstrap always splits each angle's record into this many contiguous
/// blocks by acquisition order.
pub const N_BOOTSTRAP_SUBSETS: usize = 10;

/// The standard twelve homodyne angles, 15 degree increments from 0.
pub fn default_angles() -> Vec<f64> {
    (0..12).map(|k| 15.0 * k as f64).collect()
}

/// Temporal mode filter applied to raw homodyne traces: an antisymmetric
/// weight `f(t - t0) = (t - t0) exp(-gamma^2 (t - t0)^2)` supported on
/// `|t - t0| < t1`, evaluated on a uniform grid starting at t = 0.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct ModeFunctionParams {
    /// Gaussian falloff rate, 1/ns.
    pub gamma_per_ns: f64,
    /// Half-width of the analysis window, ns.
    pub t1_ns: f64,
    /// Center of the time bin within the trace, ns.
    pub t0_ns: f64,
    /// Full bin length the trace must cover around the center, ns.
    pub bin_ns: f64,
    /// Trace sampling density.
    pub samples_per_ns: f64,
}

impl Default for ModeFunctionParams {
    fn default() -> Self {
        Self {
            gamma_per_ns: 0.06,
            t1_ns: 23.0,
            t0_ns: 33.0,
            bin_ns: 66.0,
            samples_per_ns: 1.0,
        }
    }
}

impl ModeFunctionParams {
    fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("gamma", self.gamma_per_ns),
            ("t1", self.t1_ns),
            ("bin", self.bin_ns),
            ("sample rate", self.samples_per_ns),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::BadParameter(format!("mode function {name} = {v}")));
            }
        }
        if self.t1_ns > self.bin_ns / 2.0 {
            return Err(Error::BadParameter(format!(
                "window half-width {} ns exceeds half the bin ({} ns)",
                self.t1_ns,
                self.bin_ns / 2.0
            )));
        }
        if self.t0_ns < self.bin_ns / 2.0 {
            return Err(Error::BadParameter(format!(
                "bin center {} ns leaves the trace start inside the bin",
                self.t0_ns
            )));
        }
        Ok(())
    }

    /// Mode-function value at absolute trace time `t_ns`.
    pub fn value(&self, t_ns: f64) -> f64 {
        let dt = t_ns - self.t0_ns;
        if Float::abs(dt) >= self.t1_ns {
            return 0.0;
        }
        dt * Float::exp(-self.gamma_per_ns * self.gamma_per_ns * dt * dt)
    }

    /// Number of samples in a trace covering exactly one bin from t = 0.
    pub fn n_samples(&self) -> usize {
        (self.bin_ns * self.samples_per_ns) as usize + 1
    }

    /// Sample times of such a trace.
    pub fn sample_times(&self) -> Vec<f64> {
        let dt = 1.0 / self.samples_per_ns;
        (0..self.n_samples()).map(|i| i as f64 * dt).collect()
    }
}

// compensated (Neumaier) summation: the result carries rounding error of
// the order eps * |true sum| instead of eps * max |partial sum|, which is
// what keeps large DC offsets out of the extracted quadratures
fn compensated_sum(values: impl Iterator<Item = f64>) -> f64 {
    let mut sum = 0.0;
    let mut comp = 0.0;
    for x in values {
        let t = sum + x;
        if Float::abs(sum) >= Float::abs(x) {
            comp += (sum - t) + x;
        } else {
            comp += (x - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// Extracts one quadrature value from a raw trace: the inner product with
/// the centered mode-function weights times the sample spacing. The weights
/// are re-centered until they are orthogonal to constants at floating-point
/// resolution and the products are summed with compensation, so a DC offset
/// on the trace cannot leak into the result. The value is uncalibrated;
/// multiply by the vacuum scale factor.
pub fn mode_sample(trace: &[f64], params: &ModeFunctionParams) -> Result<f64> {
    params.validate()?;
    let dt = 1.0 / params.samples_per_ns;
    let t_end = (trace.len().saturating_sub(1)) as f64 * dt;
    let needed = params.t0_ns + params.bin_ns / 2.0;
    if trace.is_empty() || t_end + 1e-9 < needed {
        return Err(Error::InsufficientSamples(format!(
            "trace ends at {t_end} ns, mode window needs {needed} ns"
        )));
    }
    let mut weights: Vec<f64> = (0..trace.len())
        .map(|i| params.value(i as f64 * dt))
        .collect();
    let window: Vec<usize> = (0..trace.len())
        .filter(|&i| Float::abs(i as f64 * dt - params.t0_ns) < params.t1_ns)
        .collect();
    if window.is_empty() {
        return Err(Error::InsufficientSamples(
            "no trace samples inside the mode-function window".into(),
        ));
    }
    let mean =
        compensated_sum(window.iter().map(|&i| weights[i])) / window.len() as f64;
    for &i in &window {
        weights[i] -= mean;
    }
    // push the residual constant response into the smallest live weight so
    // the sum cancels at float resolution, not just analytically
    let carrier = window
        .iter()
        .copied()
        .filter(|&i| weights[i] != 0.0)
        .min_by(|&a, &b| Float::abs(weights[a]).total_cmp(&Float::abs(weights[b])));
    if let Some(k) = carrier {
        for _ in 0..3 {
            let residual = compensated_sum(window.iter().map(|&i| weights[i]));
            if residual == 0.0 {
                break;
            }
            weights[k] -= residual;
        }
    }
    // center the trace as well: with zero-sum weights this changes nothing
    // analytically, but it stops a large DC level from amplifying the
    // product rounding
    let trace_mean =
        compensated_sum(window.iter().map(|&i| trace[i])) / window.len() as f64;
    Ok(
        compensated_sum(window.iter().map(|&i| weights[i] * (trace[i] - trace_mean)))
            * dt,
    )
}

/// Scale factor bringing raw vacuum quadratures to unit variance: `1/std`
/// with the n-1 normalization.
pub fn calibrate_vacuum(raw: &[f64]) -> Result<f64> {
    if raw.len() < 100 {
        return Err(Error::InsufficientSamples(format!(
            "vacuum calibration needs at least 100 samples, got {}",
            raw.len()
        )));
    }
    let n = raw.len() as f64;
    let mean = raw.iter().sum::<f64>() / n;
    let var = raw.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    if !(var > 0.0) || !var.is_finite() {
        return Err(Error::DegenerateSamples(format!(
            "vacuum variance {var} is not positive"
        )));
    }
    Ok(1.0 / Float::sqrt(var))
}

/// Quadrature records grouped by homodyne angle, plus the vacuum
/// calibration scale applied on read-out.
#[derive(Debug, Clone)]
pub struct QuadratureSampleSet {
    angles_deg: Vec<f64>,
    samples: Vec<Vec<f64>>,
    scale: f64,
}

impl QuadratureSampleSet {
    pub fn from_parts(angles_deg: Vec<f64>, samples: Vec<Vec<f64>>, scale: f64) -> Result<Self> {
        if angles_deg.is_empty() {
            return Err(Error::BadParameter("empty homodyne angle list".into()));
        }
        for w in angles_deg.windows(2) {
            if !(w[1] > w[0]) {
                return Err(Error::BadParameter(format!(
                    "angles must increase strictly, got {} then {}",
                    w[0], w[1]
                )));
            }
        }
        if angles_deg.iter().any(|a| !a.is_finite()) {
            return Err(Error::NonFinite("homodyne angle"));
        }
        if samples.len() != angles_deg.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} angles but {} sample lists",
                angles_deg.len(),
                samples.len()
            )));
        }
        if samples.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("quadrature sample"));
        }
        if !(scale > 0.0) || !scale.is_finite() {
            return Err(Error::BadParameter(format!("calibration scale {scale}")));
        }
        Ok(Self {
            angles_deg,
            samples,
            scale,
        })
    }

    pub fn angles_deg(&self) -> &[f64] {
        &self.angles_deg
    }

    pub fn n_angles(&self) -> usize {
        self.angles_deg.len()
    }

    pub fn raw_samples(&self, angle_index: usize) -> &[f64] {
        &self.samples[angle_index]
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn calibrated_samples(&self, angle_index: usize) -> impl Iterator<Item = f64> + '_ {
        self.samples[angle_index].iter().map(move |v| v * self.scale)
    }
}

/// Draws `n_per_angle` quadrature samples of `state` at each angle, from the
/// exact marginal normal distribution. The returned set carries scale 1
/// (already calibrated).
pub fn sample_state<R: Rng + ?Sized>(
    state: &GaussianState,
    angles_deg: &[f64],
    n_per_angle: usize,
    rng: &mut R,
) -> Result<QuadratureSampleSet> {
    if state.n_modes() != 1 {
        return Err(Error::ModeCount(state.n_modes()));
    }
    if n_per_angle == 0 {
        return Err(Error::InsufficientSamples(
            "need at least one sample per angle".into(),
        ));
    }
    let mut samples = Vec::with_capacity(angles_deg.len());
    for &angle in angles_deg {
        let (mean, var) = state.quadrature_marginal(0, angle)?;
        let dist = Normal::new(mean, Float::sqrt(var))
            .map_err(|_| Error::BadParameter(format!("marginal variance {var} at {angle} deg")))?;
        samples.push((0..n_per_angle).map(|_| dist.sample(rng)).collect());
    }
    QuadratureSampleSet::from_parts(angles_deg.to_vec(), samples, 1.0)
}

/// Optimizer knobs for the maximum-likelihood fit.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct MleOptions {
    /// Stop when the gradient 2-norm drops below this.
    pub grad_tol: f64,
    pub max_iterations: usize,
    /// Contiguous bootstrap subsets used for the error bars.
    pub subsets: usize,
}

impl Default for MleOptions {
    fn default() -> Self {
        Self {
            grad_tol: 1e-8,
            max_iterations: 300,
            subsets: N_BOOTSTRAP_SUBSETS,
        }
    }
}

/// Mean and covariance refitted on one bootstrap subset.
#[derive(Debug, Clone, Copy)]
pub struct SubsetFit {
    pub mean: Vector2<f64>,
    pub cov: Matrix2<f64>,
}

/// Maximum-likelihood Gaussian reconstruction with bootstrap errors.
#[derive(Debug, Clone)]
pub struct TomographyResult {
    pub mean: Vector2<f64>,
    pub cov: Matrix2<f64>,
    /// Log-likelihood at the optimum (2 pi constants included).
    pub log_likelihood: f64,
    /// BFGS iterations of the full fit.
    pub iterations: usize,
    /// Subset standard deviation of the mean components.
    pub mean_err: Vector2<f64>,
    /// Subset standard deviation of the covariance elements (symmetric).
    pub cov_err: Matrix2<f64>,
    pub subset_fits: Vec<SubsetFit>,
}

impl TomographyResult {
    /// The fitted moments as a validated state. Fails if sampling noise
    /// pushed the covariance below the physicality bound.
    pub fn state(&self) -> Result<GaussianState> {
        GaussianState::new(
            DVector::from_column_slice(&[self.mean[0], self.mean[1]]),
            DMatrix::from_row_slice(
                2,
                2,
                &[
                    self.cov[(0, 0)],
                    self.cov[(0, 1)],
                    self.cov[(1, 0)],
                    self.cov[(1, 1)],
                ],
            ),
        )
    }
}

// sufficient statistics of one angle: the Gaussian likelihood only needs
// the count and the first two power sums of the calibrated values
#[derive(Debug, Clone, Copy)]
struct AngleStat {
    cos: f64,
    sin: f64,
    n: f64,
    s1: f64,
    s2: f64,
}

impl AngleStat {
    fn from_values(angle_deg: f64, values: impl Iterator<Item = f64>) -> Self {
        let rad = Float::to_radians(angle_deg);
        let (mut n, mut s1, mut s2) = (0.0, 0.0, 0.0);
        for v in values {
            n += 1.0;
            s1 += v;
            s2 += v * v;
        }
        Self {
            cos: Float::cos(rad),
            sin: Float::sin(rad),
            n,
            s1,
            s2,
        }
    }

    fn from_moments(angle_deg: f64, n: f64, mean: f64, variance: f64) -> Self {
        let rad = Float::to_radians(angle_deg);
        Self {
            cos: Float::cos(rad),
            sin: Float::sin(rad),
            n,
            s1: n * mean,
            s2: n * (variance + mean * mean),
        }
    }
}

fn require_three_directions(angles_deg: &[f64]) -> Result<()> {
    let mut dirs: Vec<f64> = angles_deg
        .iter()
        .map(|a| {
            let mut d = a % 180.0;
            if d < 0.0 {
                d += 180.0;
            }
            // fold near-180 onto 0
            if d > 180.0 - 1e-6 {
                d = 0.0;
            }
            d
        })
        .collect();
    dirs.sort_unstable_by(f64::total_cmp);
    let mut distinct = if dirs.is_empty() { 0 } else { 1 };
    for w in dirs.windows(2) {
        if w[1] - w[0] > 1e-6 {
            distinct += 1;
        }
    }
    if distinct < 3 {
        return Err(Error::BadParameter(format!(
            "covariance identification needs 3 distinct quadrature directions, got {distinct}"
        )));
    }
    Ok(())
}

// parameter vector (mx, mp, a, b, c): V = L L^T with L = [[e^a, 0], [b, e^c]]
type Theta = SVector<f64, 5>;

fn cov_of(theta: &Theta) -> Matrix2<f64> {
    let ea = Float::exp(theta[2]);
    let ec = Float::exp(theta[4]);
    let b = theta[3];
    Matrix2::new(ea * ea, b * ea, b * ea, b * b + ec * ec)
}

// negative log-likelihood per sample (2 pi constant dropped) plus its
// gradient; the 1/N normalization keeps the objective O(1) so the gradient
// tolerance is meaningful at any record length
fn nll_grad(theta: &Theta, stats: &[AngleStat]) -> (f64, Theta) {
    let ea = Float::exp(theta[2]);
    let ec = Float::exp(theta[4]);
    let b = theta[3];
    let (vxx, vxp, vpp) = (ea * ea, b * ea, b * b + ec * ec);
    let total: f64 = stats.iter().map(|s| s.n).sum();
    let mut nll = 0.0;
    let mut g = Theta::zeros();
    for s in stats {
        let (c, sn) = (s.cos, s.sin);
        let mu = theta[0] * c + theta[1] * sn;
        let var = c * c * vxx + 2.0 * c * sn * vxp + sn * sn * vpp;
        let dev = s.s2 - 2.0 * mu * s.s1 + s.n * mu * mu;
        nll += 0.5 * (s.n * Float::ln(var) + dev / var) / total;
        let dmu = (s.n * mu - s.s1) / (var * total);
        let dvar = 0.5 * (s.n / var - dev / (var * var)) / total;
        g[0] += dmu * c;
        g[1] += dmu * sn;
        g[2] += dvar * (2.0 * c * c * vxx + 2.0 * c * sn * vxp);
        g[3] += dvar * (2.0 * c * sn * ea + 2.0 * sn * sn * b);
        g[4] += dvar * (2.0 * sn * sn * ec * ec);
    }
    (nll, g)
}

// weighted least-squares moment matching as the starting point
fn moment_init(stats: &[AngleStat]) -> Theta {
    let mut a2 = Matrix2::zeros();
    let mut b2 = Vector2::zeros();
    let mut a3 = Matrix3::zeros();
    let mut b3 = Vector3::zeros();
    for s in stats {
        let (c, sn) = (s.cos, s.sin);
        let u = Vector2::new(c, sn);
        a2 += s.n * u * u.transpose();
        b2 += s.s1 * u;
        let mean = s.s1 / s.n;
        let var = (s.s2 / s.n - mean * mean).max(1e-12);
        let r = Vector3::new(c * c, 2.0 * c * sn, sn * sn);
        a3 += s.n * r * r.transpose();
        b3 += s.n * var * r;
    }
    let m = a2.try_inverse().map(|inv| inv * b2).unwrap_or_default();
    let v = a3
        .try_inverse()
        .map(|inv| inv * b3)
        .unwrap_or_else(|| Vector3::new(1.0, 0.0, 1.0));
    let (mut vxx, vxp, mut vpp) = (v[0], v[1], v[2]);
    // clamp to a safely positive-definite matrix before taking the Cholesky
    let half_tr = (vxx + vpp) / 2.0;
    let disc = Float::sqrt((vxx - vpp) * (vxx - vpp) / 4.0 + vxp * vxp);
    let floor = 1e-6 * Float::abs(half_tr).max(1.0);
    if half_tr - disc < floor {
        let shift = floor - (half_tr - disc);
        vxx += shift;
        vpp += shift;
    }
    let a = 0.5 * Float::ln(vxx);
    let b = vxp / Float::sqrt(vxx);
    let c = 0.5 * Float::ln((vpp - b * b).max(1e-12));
    Theta::from_column_slice(&[m[0], m[1], a, b, c])
}

fn minimize(stats: &[AngleStat], start: Theta, opts: &MleOptions) -> Result<(Theta, f64, usize)> {
    let (mut fx, mut gx) = nll_grad(&start, stats);
    if !fx.is_finite() {
        return Err(Error::NoConvergence(
            "objective not finite at the starting point".into(),
        ));
    }
    let mut x = start;
    let mut h = SMatrix::<f64, 5, 5>::identity();
    for it in 0..opts.max_iterations {
        if gx.norm() < opts.grad_tol {
            return Ok((x, fx, it));
        }
        let mut dir = -(h * gx);
        let mut slope = dir.dot(&gx);
        if slope >= 0.0 {
            h = SMatrix::identity();
            dir = -gx;
            slope = -gx.norm_squared();
        }
        let mut alpha = 1.0;
        let mut step = None;
        while alpha >= 1e-14 {
            let xn = x + alpha * dir;
            let (fxn, gxn) = nll_grad(&xn, stats);
            if fxn.is_finite() && fxn <= fx + 1e-4 * alpha * slope {
                step = Some((xn, fxn, gxn));
                break;
            }
            alpha *= 0.5;
        }
        let Some((xn, fxn, gxn)) = step else {
            // no representable descent left; accept only if already at tol
            if gx.norm() < opts.grad_tol {
                return Ok((x, fx, it));
            }
            return Err(Error::NoConvergence(format!(
                "line search stalled at |grad| = {:.3e}",
                gx.norm()
            )));
        };
        let s = xn - x;
        let y = gxn - gx;
        let sy = s.dot(&y);
        if sy > 1e-12 * s.norm() * y.norm() {
            let rho = 1.0 / sy;
            let a1 = SMatrix::<f64, 5, 5>::identity() - rho * s * y.transpose();
            h = a1 * h * a1.transpose() + rho * s * s.transpose();
        }
        x = xn;
        fx = fxn;
        gx = gxn;
    }
    if gx.norm() < opts.grad_tol {
        Ok((x, fx, opts.max_iterations))
    } else {
        Err(Error::NoConvergence(format!(
            "|grad| = {:.3e} after {} iterations",
            gx.norm(),
            opts.max_iterations
        )))
    }
}

fn fit_stats(stats: &[AngleStat], start: Option<Theta>, opts: &MleOptions) -> Result<(Theta, f64, usize)> {
    let init = start.unwrap_or_else(|| moment_init(stats));
    minimize(stats, init, opts)
}

fn std_dev(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    Float::sqrt(values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0))
}

/// Fits a Gaussian state to a sample set and attaches bootstrap errors from
/// ten contiguous subset refits.
pub fn mle_fit(samples: &QuadratureSampleSet) -> Result<TomographyResult> {
    mle_fit_with(samples, &MleOptions::default())
}

pub fn mle_fit_with(samples: &QuadratureSampleSet, opts: &MleOptions) -> Result<TomographyResult> {
    if samples.n_angles() < 3 {
        return Err(Error::BadParameter(format!(
            "maximum-likelihood fit needs at least 3 angles, got {}",
            samples.n_angles()
        )));
    }
    require_three_directions(samples.angles_deg())?;
    if opts.subsets < 2 {
        return Err(Error::BadParameter(format!(
            "bootstrap needs at least 2 subsets, got {}",
            opts.subsets
        )));
    }
    for i in 0..samples.n_angles() {
        if samples.raw_samples(i).len() < opts.subsets {
            return Err(Error::InsufficientSamples(format!(
                "angle {} has {} samples; bootstrap needs at least {}",
                samples.angles_deg()[i],
                samples.raw_samples(i).len(),
                opts.subsets
            )));
        }
    }
    let full_stats: Vec<AngleStat> = (0..samples.n_angles())
        .map(|i| AngleStat::from_values(samples.angles_deg()[i], samples.calibrated_samples(i)))
        .collect();
    let (theta, nll, iterations) = fit_stats(&full_stats, None, opts)?;
    let mut subset_fits = Vec::with_capacity(opts.subsets);
    for j in 0..opts.subsets {
        let stats: Vec<AngleStat> = (0..samples.n_angles())
            .map(|i| {
                let raw = samples.raw_samples(i);
                let lo = j * raw.len() / opts.subsets;
                let hi = (j + 1) * raw.len() / opts.subsets;
                AngleStat::from_values(
                    samples.angles_deg()[i],
                    raw[lo..hi].iter().map(|v| v * samples.scale()),
                )
            })
            .collect();
        let (t, _, _) = fit_stats(&stats, Some(theta), opts)?;
        subset_fits.push(SubsetFit {
            mean: Vector2::new(t[0], t[1]),
            cov: cov_of(&t),
        });
    }
    let pick = |f: &dyn Fn(&SubsetFit) -> f64| -> f64 {
        let vals: Vec<f64> = subset_fits.iter().map(f).collect();
        std_dev(&vals)
    };
    let mean_err = Vector2::new(pick(&|s| s.mean[0]), pick(&|s| s.mean[1]));
    let exx = pick(&|s| s.cov[(0, 0)]);
    let exp_ = pick(&|s| s.cov[(0, 1)]);
    let epp = pick(&|s| s.cov[(1, 1)]);
    let total_n: f64 = full_stats.iter().map(|s| s.n).sum();
    Ok(TomographyResult {
        mean: Vector2::new(theta[0], theta[1]),
        cov: cov_of(&theta),
        log_likelihood: -nll * total_n - 0.5 * total_n * Float::ln(2.0 * core::f64::consts::PI),
        iterations,
        mean_err,
        cov_err: Matrix2::new(exx, exp_, exp_, epp),
        subset_fits,
    })
}

/// Infinite-data entry point: fits directly to exactly known per-angle
/// means and (population) variances. No bootstrap; errors are zero.
pub fn mle_fit_moments(
    angles_deg: &[f64],
    n_per_angle: f64,
    means: &[f64],
    variances: &[f64],
) -> Result<TomographyResult> {
    if angles_deg.len() < 3 {
        return Err(Error::BadParameter(format!(
            "maximum-likelihood fit needs at least 3 angles, got {}",
            angles_deg.len()
        )));
    }
    require_three_directions(angles_deg)?;
    if means.len() != angles_deg.len() || variances.len() != angles_deg.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} angles, {} means, {} variances",
            angles_deg.len(),
            means.len(),
            variances.len()
        )));
    }
    if !(n_per_angle > 0.0) || !n_per_angle.is_finite() {
        return Err(Error::BadParameter(format!("sample weight {n_per_angle}")));
    }
    if variances.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
        return Err(Error::BadParameter("variances must be positive".into()));
    }
    let stats: Vec<AngleStat> = angles_deg
        .iter()
        .zip(means.iter().zip(variances))
        .map(|(&a, (&m, &v))| AngleStat::from_moments(a, n_per_angle, m, v))
        .collect();
    let opts = MleOptions::default();
    let (theta, nll, iterations) = fit_stats(&stats, None, &opts)?;
    let total_n: f64 = stats.iter().map(|s| s.n).sum();
    Ok(TomographyResult {
        mean: Vector2::new(theta[0], theta[1]),
        cov: cov_of(&theta),
        log_likelihood: -nll * total_n - 0.5 * total_n * Float::ln(2.0 * core::f64::consts::PI),
        iterations,
        mean_err: Vector2::zeros(),
        cov_err: Matrix2::zeros(),
        subset_fits: Vec::new(),
    })
}

/// Bootstrap spreads of the ellipse parameters.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct EllipseErrors {
    pub major_variance: f64,
    pub minor_variance: f64,
    pub tilt_deg: f64,
}

/// Derived report of a tomography result against an ideal target state.
#[derive(Debug, Clone)]
pub struct ReportSummary {
    pub mean: Vector2<f64>,
    pub cov: Matrix2<f64>,
    pub ellipse: EllipseSummary,
    pub ellipse_err: EllipseErrors,
    pub fidelity: f64,
    pub fidelity_err: f64,
    /// Paper-style compact rendering, e.g. "0.86(2)".
    pub fidelity_display: String,
}

/// Formats `value(err)` with the error rounded to one significant digit and
/// the value truncated to the matching decimal place; zero error renders
/// with three decimals and "(0)".
pub fn format_uncertain(value: f64, err: f64) -> String {
    if !(err > 0.0) {
        return format!("{value:.3}(0)");
    }
    let mut e = Float::floor(Float::log10(err)) as i32;
    let mut digit = Float::round(err / Float::powi(10.0, e)) as i64;
    if digit == 10 {
        digit = 1;
        e += 1;
    }
    let decimals = (-e).max(0) as usize;
    format!("{value:.decimals$}({digit})")
}

/// Summarizes a fit against its ideal target: phase-space ellipse with
/// bootstrap spreads and fidelity with its bootstrap error.
pub fn report(result: &TomographyResult, ideal_target: &GaussianState) -> Result<ReportSummary> {
    if ideal_target.n_modes() != 1 {
        return Err(Error::DimensionMismatch(format!(
            "target must be single-mode, got {} modes",
            ideal_target.n_modes()
        )));
    }
    let tm = ideal_target.mean_pair(0)?;
    let tv = ideal_target.cov_block(0)?;
    let fid = fidelity_moments(&result.mean, &result.cov, &tm, &tv)?;
    let ellipse = ellipse_from_moments(&result.mean, &result.cov);
    let mut fids = Vec::new();
    let mut majors = Vec::new();
    let mut minors = Vec::new();
    let mut tilts = Vec::new();
    for s in &result.subset_fits {
        fids.push(fidelity_moments(&s.mean, &s.cov, &tm, &tv)?);
        let e = ellipse_from_moments(&s.mean, &s.cov);
        majors.push(e.major_variance);
        minors.push(e.minor_variance);
        // unwrap the 180-degree tilt ambiguity around the central value
        let mut d = (e.tilt_deg - ellipse.tilt_deg) % 180.0;
        if d > 90.0 {
            d -= 180.0;
        }
        if d <= -90.0 {
            d += 180.0;
        }
        tilts.push(ellipse.tilt_deg + d);
    }
    let fidelity_err = std_dev(&fids);
    Ok(ReportSummary {
        mean: result.mean,
        cov: result.cov,
        ellipse,
        ellipse_err: EllipseErrors {
            major_variance: std_dev(&majors),
            minor_variance: std_dev(&minors),
            tilt_deg: std_dev(&tilts),
        },
        fidelity: fid,
        fidelity_err,
        fidelity_display: format_uncertain(fid, fidelity_err),
    })
}

/// Mean-map matrix estimated from two tomographed probe runs: an
/// x-displaced and a p-displaced coherent input of the same amplitude.
/// Element errors are subset standard deviations.
#[derive(Debug, Clone, Copy)]
pub struct GateMatrixReport {
    pub matrix: Matrix2<f64>,
    pub errors: Matrix2<f64>,
    pub probe_amplitude: f64,
}

pub fn gate_matrix_from_runs(
    x_run: &TomographyResult,
    p_run: &TomographyResult,
    probe_amplitude: f64,
) -> Result<GateMatrixReport> {
    if !(probe_amplitude > 0.0) || !probe_amplitude.is_finite() {
        return Err(Error::BadParameter(format!(
            "probe amplitude {probe_amplitude}"
        )));
    }
    let a = probe_amplitude;
    let matrix = Matrix2::from_columns(&[x_run.mean / a, p_run.mean / a]);
    let col_err = |run: &TomographyResult, row: usize| -> f64 {
        let vals: Vec<f64> = run.subset_fits.iter().map(|s| s.mean[row] / a).collect();
        std_dev(&vals)
    };
    let errors = Matrix2::new(
        col_err(x_run, 0),
        col_err(p_run, 0),
        col_err(x_run, 1),
        col_err(p_run, 1),
    );
    Ok(GateMatrixReport {
        matrix,
        errors,
        probe_amplitude,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::compiler::{compile_program, GateProgram, DEFAULT_MAX_SQUEEZE};
    use crate::gaussian::{make_gate, GateSpec};
    use crate::machine::{LoopConfig, LoopMachine};
    use crate::rng::{stream_rng, STREAM_SAMPLING};
    use alloc::vec;
    use approx::assert_relative_eq;
    use rand_distr::StandardNormal;

    fn default_trace_of_mode(params: &ModeFunctionParams) -> Vec<f64> {
        params.sample_times().iter().map(|&t| params.value(t)).collect()
    }

    #[test]
    fn mode_function_is_antisymmetric_and_windowed() {
        let p = ModeFunctionParams::default();
        assert_eq!(p.value(p.t0_ns), 0.0);
        for d in [1.0, 5.5, 14.0, 22.9] {
            assert_relative_eq!(p.value(p.t0_ns + d), -p.value(p.t0_ns - d), epsilon = 1e-15);
        }
        assert_eq!(p.value(p.t0_ns + 23.0), 0.0);
        assert_eq!(p.value(0.0), 0.0);
    }

    #[test]
    fn self_trace_gives_the_squared_norm() {
        // independent discrete quadrature of f^2 on the same grids
        let p = ModeFunctionParams::default();
        let q = mode_sample(&default_trace_of_mode(&p), &p).unwrap();
        assert_relative_eq!(q, 1359.166411102883, epsilon = 1e-9);

        let p2 = ModeFunctionParams {
            samples_per_ns: 2.0,
            ..ModeFunctionParams::default()
        };
        let q2 = mode_sample(&default_trace_of_mode(&p2), &p2).unwrap();
        assert_relative_eq!(q2, 1365.389745683175, epsilon = 1e-9);
    }

    #[test]
    fn constant_traces_extract_zero() {
        let p = ModeFunctionParams::default();
        for c in [1.0, -5.0, 1e4] {
            let trace = vec![c; p.n_samples()];
            let q = mode_sample(&trace, &p).unwrap();
            assert!(q.abs() <= 1e-12 * c.abs(), "offset {c} leaked {q}");
        }
    }

    #[test]
    fn offsets_do_not_move_the_quadrature()
    {
        let p = ModeFunctionParams::default();
        let mut rng = stream_rng(3, STREAM_SAMPLING);
        let trace: Vec<f64> = (0..p.n_samples())
            .map(|_| 8.0 * rng.sample::<f64, _>(StandardNormal))
            .collect();
        let q0 = mode_sample(&trace, &p).unwrap();
        for c in [0.5, -20.0, 1000.0] {
            let shifted: Vec<f64> = trace.iter().map(|v| v + c).collect();
            let q1 = mode_sample(&shifted, &p).unwrap();
            assert!(
                (q1 - q0).abs() < 1e-12 * q0.abs(),
                "offset {c}: {q0} -> {q1}"
            );
        }
    }

    #[test]
    fn short_traces_are_rejected() {
        let p = ModeFunctionParams::default();
        let trace = vec![0.0; p.n_samples() - 10];
        assert!(matches!(
            mode_sample(&trace, &p),
            Err(Error::InsufficientSamples(_))
        ));
    }

    #[test]
    fn vacuum_noise_calibrates_to_unit_variance() {
        // white per-sample noise plays the vacuum; calibrate on one batch,
        // verify on a fresh one
        let p = ModeFunctionParams::default();
        let mut rng = stream_rng(11, STREAM_SAMPLING);
        let batch = |rng: &mut rand_chacha::ChaCha12Rng| -> Vec<f64> {
            (0..10_000)
                .map(|_| {
                    let trace: Vec<f64> = (0..p.n_samples())
                        .map(|_| rng.sample::<f64, _>(StandardNormal))
                        .collect();
                    mode_sample(&trace, &p).unwrap()
                })
                .collect()
        };
        let calib = batch(&mut rng);
        let scale = calibrate_vacuum(&calib).unwrap();
        // raw variance is the squared weight norm (unit noise, dt = 1)
        assert_relative_eq!(scale, 1.0 / 1359.166411102883f64.sqrt(), epsilon = 0.05);
        let fresh = batch(&mut rng);
        let n = fresh.len() as f64;
        let mean = fresh.iter().sum::<f64>() / n;
        let var = fresh
            .iter()
            .map(|v| (scale * v - scale * mean) * (scale * v - scale * mean))
            .sum::<f64>()
            / (n - 1.0);
        assert!((var - 1.0).abs() < 0.05, "calibrated variance {var}");
    }

    #[test]
    fn calibration_scale_is_exact_for_known_variance() {
        // 50 pairs of +/-2 and one 0: n-1 variance is exactly 4
        let mut samples = vec![0.0];
        for _ in 0..50 {
            samples.push(2.0);
            samples.push(-2.0);
        }
        assert_eq!(calibrate_vacuum(&samples).unwrap(), 0.5);
        let ones = vec![1.0; 200];
        assert!(matches!(
            calibrate_vacuum(&ones),
            Err(Error::DegenerateSamples(_))
        ));
        assert!(matches!(
            calibrate_vacuum(&samples[..99]),
            Err(Error::InsufficientSamples(_))
        ));
    }

    #[test]
    fn sampled_marginals_match_the_state() {
        let mut rng = stream_rng(7, STREAM_SAMPLING);
        let sq = GaussianState::squeezed_vacuum(0.44);
        let set = sample_state(&sq, &[0.0, 90.0], 20_000, &mut rng).unwrap();
        let var_of = |set: &QuadratureSampleSet, i: usize| {
            let v: Vec<f64> = set.calibrated_samples(i).collect();
            let n = v.len() as f64;
            let m = v.iter().sum::<f64>() / n;
            v.iter().map(|u| (u - m) * (u - m)).sum::<f64>() / (n - 1.0)
        };
        assert!((var_of(&set, 0) - (0.88f64).exp()).abs() < 0.06);
        assert!((var_of(&set, 1) - 0.4147829116815814).abs() < 0.02);

        let coh = GaussianState::coherent(4.0, 0.0);
        let set = sample_state(&coh, &[60.0], 20_000, &mut rng).unwrap();
        let m: f64 = set.calibrated_samples(0).sum::<f64>() / 20_000.0;
        assert!((m - 2.0).abs() < 0.05, "mean at 60 deg: {m}");
    }

    #[test]
    fn exact_moments_recover_the_generating_state() {
        let mean = Vector2::new(1.2, -0.7);
        let cov = Matrix2::new(2.3, 0.77, 0.77, 1.85);
        let angles = default_angles();
        let (mut means, mut vars) = (Vec::new(), Vec::new());
        for &a in &angles {
            let rad = a.to_radians();
            let u = Vector2::new(rad.cos(), rad.sin());
            means.push(u.dot(&mean));
            vars.push((u.transpose() * cov * u)[0]);
        }
        let fit = mle_fit_moments(&angles, 1000.0, &means, &vars).unwrap();
        assert!((fit.mean - mean).norm() < 1e-8);
        assert!((fit.cov - cov).norm() < 1e-8);
        assert!(fit.log_likelihood.is_finite());
    }

    #[test]
    fn analytic_gradient_matches_finite_differences() {
        let mut rng = stream_rng(5, STREAM_SAMPLING);
        let state = GaussianState::coherent(0.8, -0.3);
        let set = sample_state(&state, &default_angles(), 500, &mut rng).unwrap();
        let stats: Vec<AngleStat> = (0..set.n_angles())
            .map(|i| AngleStat::from_values(set.angles_deg()[i], set.calibrated_samples(i)))
            .collect();
        // off-optimum point so no component is accidentally zero
        let theta = Theta::from_column_slice(&[0.6, -0.1, 0.15, 0.2, -0.05]);
        let (_, grad) = nll_grad(&theta, &stats);
        for k in 0..5 {
            let h = 1e-5 * theta[k].abs().max(1.0);
            let mut tp = theta;
            tp[k] += h;
            let mut tm = theta;
            tm[k] -= h;
            let fd = (nll_grad(&tp, &stats).0 - nll_grad(&tm, &stats).0) / (2.0 * h);
            assert_relative_eq!(grad[k], fd, epsilon = 1e-3, max_relative = 1e-5);
        }
    }

    #[test]
    fn vacuum_session_reconstructs_the_identity() {
        let mut rng = stream_rng(21, STREAM_SAMPLING);
        let set = sample_state(&GaussianState::vacuum(1), &default_angles(), 1000, &mut rng)
            .unwrap();
        let fit = mle_fit(&set).unwrap();
        assert!(fit.mean.norm() < 0.1);
        assert!((fit.cov - Matrix2::identity()).amax() < 0.1);
        assert_eq!(fit.subset_fits.len(), N_BOOTSTRAP_SUBSETS);
        assert!(fit.mean_err.min() > 0.0);
        assert!(fit.cov_err[(0, 0)] > 0.0 && fit.cov_err[(1, 1)] > 0.0);
        // identical input, bit-identical output
        let again = mle_fit(&set).unwrap();
        assert_eq!(fit.mean, again.mean);
        assert_eq!(fit.cov, again.cov);
        assert_eq!(fit.cov_err, again.cov_err);
    }

    #[test]
    fn realistic_output_session_refits_with_high_fidelity() {
        let machine = LoopMachine::new(LoopConfig::default()).unwrap();
        let sched = compile_program(
            &GateProgram::new(vec![GateSpec::Squeeze { r: 0.69 }]),
            66.0,
            DEFAULT_MAX_SQUEEZE,
        )
        .unwrap();
        let truth = machine
            .run_analytic(&sched, &GaussianState::vacuum(1))
            .unwrap()
            .output;
        let mut rng = stream_rng(2026, STREAM_SAMPLING);
        let set = sample_state(&truth, &default_angles(), 1000, &mut rng).unwrap();
        let fit = mle_fit(&set).unwrap();
        let f = fidelity_moments(
            &fit.mean,
            &fit.cov,
            &truth.mean_pair(0).unwrap(),
            &truth.cov_block(0).unwrap(),
        )
        .unwrap();
        assert!(f >= 0.99, "refit fidelity {f}");
    }

    #[test]
    fn errors_shrink_with_sample_size() {
        let truth = GaussianState::squeezed_vacuum(0.3)
            .apply(&make_gate(GateSpec::Phase { theta_deg: 20.0 }).unwrap())
            .unwrap();
        let tm = truth.mean_pair(0).unwrap();
        let tv = truth.cov_block(0).unwrap();
        let err_at = |n: usize, seed: u64| -> f64 {
            let mut rng = stream_rng(seed, STREAM_SAMPLING);
            let set = sample_state(&truth, &default_angles(), n, &mut rng).unwrap();
            let fit = mle_fit(&set).unwrap();
            ((fit.mean - tm).norm_squared() + (fit.cov - tv).norm_squared()).sqrt()
        };
        let coarse = err_at(1000, 31);
        let fine = err_at(100_000, 32);
        assert!(
            fine < coarse / 2.0,
            "error did not shrink: {coarse} -> {fine}"
        );
    }

    #[test]
    fn fits_are_rotation_equivariant() {
        // the same random stream drives both sessions, so the sample values
        // coincide and the fits must match exactly up to the rotation
        let base = GaussianState::new(
            DVector::from_column_slice(&[1.0, 0.4]),
            DMatrix::from_row_slice(2, 2, &[1.8, 0.45, 0.45, 0.9]),
        )
        .unwrap();
        let delta = 25.0;
        let rot = make_gate(GateSpec::Phase { theta_deg: delta }).unwrap();
        let rotated = base.apply(&rot).unwrap();
        let angles = default_angles();
        let shifted: Vec<f64> = angles.iter().map(|a| a + delta).collect();
        let set1 = sample_state(&base, &angles, 1500, &mut stream_rng(99, STREAM_SAMPLING)).unwrap();
        let set2 =
            sample_state(&rotated, &shifted, 1500, &mut stream_rng(99, STREAM_SAMPLING)).unwrap();
        let fit1 = mle_fit(&set1).unwrap();
        let fit2 = mle_fit(&set2).unwrap();
        let rad = delta.to_radians();
        let r = Matrix2::new(rad.cos(), -rad.sin(), rad.sin(), rad.cos());
        assert!((r * fit1.mean - fit2.mean).norm() < 1e-6);
        assert!((r * fit1.cov * r.transpose() - fit2.cov).amax() < 1e-6);
    }

    #[test]
    fn degenerate_sessions_are_rejected() {
        let mut rng = stream_rng(1, STREAM_SAMPLING);
        let v = GaussianState::vacuum(1);
        // two angles
        let set = sample_state(&v, &[0.0, 90.0], 100, &mut rng).unwrap();
        assert!(matches!(mle_fit(&set), Err(Error::BadParameter(_))));
        // three angles but only one distinct direction mod 180
        let set = sample_state(&v, &[0.0, 180.0, 360.0], 100, &mut rng).unwrap();
        assert!(matches!(mle_fit(&set), Err(Error::BadParameter(_))));
        // too few samples for the bootstrap
        let set = sample_state(&v, &default_angles(), 5, &mut rng).unwrap();
        assert!(matches!(mle_fit(&set), Err(Error::InsufficientSamples(_))));
        // unordered angles never form a set
        assert!(QuadratureSampleSet::from_parts(vec![10.0, 10.0], vec![vec![], vec![]], 1.0).is_err());
    }

    #[test]
    fn uncertain_value_formatting() {
        assert_eq!(format_uncertain(0.86, 0.023), "0.86(2)");
        assert_eq!(format_uncertain(0.75, 0.015), "0.75(2)");
        assert_eq!(format_uncertain(0.48, 0.03), "0.48(3)");
        assert_eq!(format_uncertain(0.54, 0.096), "0.5(1)");
        assert_eq!(format_uncertain(12.3, 2.3), "12(2)");
        assert_eq!(format_uncertain(1.0, 0.0), "1.000(0)");
    }

    #[test]
    fn exact_target_reports_unit_fidelity() {
        let target = GaussianState::squeezed_vacuum(0.44);
        let angles = default_angles();
        let (mut means, mut vars) = (Vec::new(), Vec::new());
        for &a in &angles {
            let (m, v) = target.quadrature_marginal(0, a).unwrap();
            means.push(m);
            vars.push(v);
        }
        let fit = mle_fit_moments(&angles, 1000.0, &means, &vars).unwrap();
        let summary = report(&fit, &target).unwrap();
        assert!(summary.fidelity > 1.0 - 1e-8);
        assert_eq!(summary.fidelity_display, "1.000(0)");
        assert_eq!(summary.ellipse_err.tilt_deg, 0.0);
        assert_relative_eq!(
            summary.ellipse.major_variance,
            (0.88f64).exp(),
            epsilon = 1e-7
        );
        // the recovered moments are physical here
        assert!(fit.state().is_ok());
    }

    #[test]
    fn probe_sessions_estimate_the_gate_matrix() {
        let machine = LoopMachine::new(LoopConfig::default()).unwrap();
        let sched = compile_program(
            &GateProgram::new(vec![GateSpec::Squeeze { r: 0.44 }]),
            66.0,
            DEFAULT_MAX_SQUEEZE,
        )
        .unwrap();
        let amp = 4.0;
        let fit_of = |x: f64, p: f64, seed: u64| {
            let out = machine
                .run_analytic(&sched, &GaussianState::coherent(x, p))
                .unwrap()
                .output;
            let mut rng = stream_rng(seed, STREAM_SAMPLING);
            mle_fit(&sample_state(&out, &default_angles(), 1000, &mut rng).unwrap()).unwrap()
        };
        let gm = gate_matrix_from_runs(&fit_of(amp, 0.0, 51), &fit_of(0.0, amp, 52), amp).unwrap();
        let scale = 0.94 * 0.9;
        let expect = Matrix2::new(scale * (0.44f64).exp(), 0.0, 0.0, scale * (-0.44f64).exp());
        for i in 0..2 {
            for j in 0..2 {
                let d = (gm.matrix[(i, j)] - expect[(i, j)]).abs();
                let bound = (3.0 * gm.errors[(i, j)]).max(0.02);
                assert!(d <= bound, "element ({i},{j}): {d} vs {bound}");
            }
        }
    }
}

//! Gate-sequence compiler for the single-mode loop.
//!
//! Every single-mode Gaussian gate factors as rotation, squeeze, rotation.
//! The loop realizes the squeeze core by coupling a p-squeezed ancilla at
//! reflectivity `R = exp(-2r)`, reading x on the tap, and displacing by
//! `sqrt(T/R)` times the outcome (the gain certified by
//! [`crate::symbolic::derive_squeezer_law`]); the rotations ride on the
//! local-oscillator phase for free. The compiler turns a gate list into a
//! time-binned schedule plus driver-facing views: per-gate parameter rows
//! with the coarse reflectivity quantization of the hardware driver, a
//! binary-driver feasibility check, and a flattened timing chart.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use nalgebra::Matrix2;
use num_traits::Float;
use serde::Serialize;

use crate::gaussian::{make_gate, GateSpec, SymplecticOp};
use crate::{Error, Result};

/// Largest squeezing magnitude the compiler accepts. Larger values push the
/// coupler reflectivity below what the driver resolves.
pub const DEFAULT_MAX_SQUEEZE: f64 = 3.0;

/// Reflectivities closer than this are one driver level.
pub const DRIVER_LEVEL_TOL: f64 = 1e-9;

/// Hardware driver resolves the coupler reflectivity in steps of 1%.
pub const DRIVER_REFLECTIVITY_STEP: f64 = 0.01;

/// A gate list executed in order, with the whole list optionally repeated.
#[derive(Debug, Clone, Serialize)]
pub struct GateProgram {
    pub gates: Vec<GateSpec>,
    pub repeat: usize,
}

impl GateProgram {
    pub fn new(gates: Vec<GateSpec>) -> Self {
        Self { gates, repeat: 1 }
    }

    pub fn repeated(gates: Vec<GateSpec>, repeat: usize) -> Self {
        Self { gates, repeat }
    }
}

/// What the loop does during one time bin.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BinKind {
    /// Input pulse enters through the loop switch.
    Inject,
    /// Measurement-induced squeeze sandwiched between two phase settings.
    Squeezer {
        /// Core squeezing magnitude, nonnegative.
        r: f64,
        /// Coupler reflectivity `exp(-2r)`.
        reflectivity: f64,
        /// Feedforward amplitude gain `sqrt(T/R)`.
        gain: f64,
        /// The same gain in dB.
        gain_db: f64,
        /// Phase applied before the coupler, degrees.
        theta1_deg: f64,
        /// Phase applied after the feedforward, degrees.
        theta2_deg: f64,
    },
    /// Pure phase-space rotation (local-oscillator re-reference).
    Phase { phi_deg: f64 },
    /// Direct displacement through the feedforward modulator.
    Displace { dx: f64, dp: f64 },
    /// Loop content leaves toward the readout.
    Export,
}

/// One time bin of the machine schedule.
#[derive(Debug, Clone, Serialize)]
pub struct ScheduleBin {
    pub index: usize,
    pub t_start_ns: f64,
    #[serde(flatten)]
    pub kind: BinKind,
}

/// Compiled machine schedule: injection, one bin per gate, export.
#[derive(Debug, Clone, Serialize)]
pub struct Schedule {
    pub bin_ns: f64,
    pub bins: Vec<ScheduleBin>,
}

impl Schedule {
    /// Number of gate bins (excludes injection and export).
    pub fn n_gate_bins(&self) -> usize {
        self.bins.len().saturating_sub(2)
    }

    pub fn total_ns(&self) -> f64 {
        self.bin_ns * self.bins.len() as f64
    }
}

/// Rotation-squeeze-rotation parameters of one single-mode gate.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct StepParams {
    pub r: f64,
    pub theta1_deg: f64,
    pub theta2_deg: f64,
}

fn db_of_gain(gain: f64) -> f64 {
    20.0 * Float::log10(gain)
}

fn gain_for_reflectivity(reflectivity: f64) -> f64 {
    Float::sqrt((1.0 - reflectivity) / reflectivity)
}

/// Reflectivity implementing a squeeze of magnitude `r`.
pub fn reflectivity_for_squeeze(r: f64) -> f64 {
    Float::exp(-2.0 * r.abs())
}

fn squeezer_bin(r: f64, theta1_deg: f64, theta2_deg: f64) -> BinKind {
    let reflectivity = reflectivity_for_squeeze(r);
    let gain = gain_for_reflectivity(reflectivity);
    BinKind::Squeezer {
        r: r.abs(),
        reflectivity,
        gain,
        gain_db: db_of_gain(gain),
        theta1_deg,
        theta2_deg,
    }
}

/// Decomposes a squeeze gate. Positive `r` amplifies x and needs no
/// rotations; negative `r` is the same core conjugated by quarter turns.
pub fn compile_squeezer(r: f64, r_max: f64) -> Result<BinKind> {
    if !r.is_finite() {
        return Err(Error::NonFinite("squeeze parameter"));
    }
    if r.abs() > r_max {
        return Err(Error::BadParameter(format!(
            "squeeze magnitude {} exceeds the compiler limit {r_max}",
            r.abs()
        )));
    }
    if r == 0.0 {
        return Ok(BinKind::Phase { phi_deg: 0.0 });
    }
    if r > 0.0 {
        Ok(squeezer_bin(r, 0.0, 0.0))
    } else {
        Ok(squeezer_bin(-r, -90.0, 90.0))
    }
}

/// Decomposes the quadratic phase gate `(x, p) -> (x, p + 2 kappa x)` into
/// rotation, squeeze, rotation. The core magnitude satisfies
/// `sinh r = |kappa|` and the phases differ by a quarter turn.
pub fn compile_qpg(kappa: f64, r_max: f64) -> Result<BinKind> {
    if !kappa.is_finite() {
        return Err(Error::NonFinite("quadratic phase parameter"));
    }
    if kappa == 0.0 {
        return Ok(BinKind::Phase { phi_deg: 0.0 });
    }
    let r = Float::asinh(kappa.abs());
    if r > r_max {
        return Err(Error::BadParameter(format!(
            "quadratic phase {kappa} needs squeeze {r} above the limit {r_max}"
        )));
    }
    let spread = r.exp().atan().to_degrees();
    let (theta1, theta2) = if kappa > 0.0 {
        (spread - 90.0, spread)
    } else {
        (90.0 - spread, -spread)
    };
    Ok(squeezer_bin(r, theta1, theta2))
}

/// Compiles one gate to its loop bin.
pub fn compile_gate(spec: &GateSpec, r_max: f64) -> Result<BinKind> {
    match spec {
        GateSpec::Squeeze { r } => compile_squeezer(*r, r_max),
        GateSpec::QuadraticPhase { kappa } => compile_qpg(*kappa, r_max),
        GateSpec::Phase { theta_deg } => {
            if !theta_deg.is_finite() {
                return Err(Error::NonFinite("phase angle"));
            }
            Ok(BinKind::Phase {
                phi_deg: *theta_deg,
            })
        }
        GateSpec::Displace { dx, dp } => {
            if !dx.is_finite() || !dp.is_finite() {
                return Err(Error::NonFinite("displacement"));
            }
            Ok(BinKind::Displace { dx: *dx, dp: *dp })
        }
        GateSpec::BeamSplitter { .. } => Err(Error::BadParameter(
            "two-mode coupler cannot run as a loop gate".into(),
        )),
    }
}

/// Compiles a program into a time-binned schedule.
pub fn compile_program(program: &GateProgram, bin_ns: f64, r_max: f64) -> Result<Schedule> {
    if program.repeat == 0 {
        return Err(Error::BadParameter("repeat count must be positive".into()));
    }
    if !(bin_ns > 0.0) || !bin_ns.is_finite() {
        return Err(Error::BadParameter(format!("bad bin length {bin_ns} ns")));
    }
    let mut kinds = Vec::new();
    kinds.push(BinKind::Inject);
    for _ in 0..program.repeat {
        for gate in &program.gates {
            kinds.push(compile_gate(gate, r_max)?);
        }
    }
    kinds.push(BinKind::Export);
    let bins = kinds
        .into_iter()
        .enumerate()
        .map(|(index, kind)| ScheduleBin {
            index,
            t_start_ns: index as f64 * bin_ns,
            kind,
        })
        .collect();
    Ok(Schedule { bin_ns, bins })
}

/// The exact single-mode operation the program encodes, for validation.
pub fn target_operation(program: &GateProgram) -> Result<SymplecticOp> {
    let mut op = SymplecticOp::identity(1);
    for _ in 0..program.repeat {
        for gate in &program.gates {
            match gate {
                GateSpec::BeamSplitter { .. } => {
                    return Err(Error::BadParameter(
                        "two-mode coupler cannot run as a loop gate".into(),
                    ))
                }
                _ => op = op.then(&make_gate(*gate)?)?,
            }
        }
    }
    Ok(op)
}

fn rotation_deg(theta_deg: f64) -> Matrix2<f64> {
    let (s, c) = Float::sin_cos(theta_deg.to_radians());
    Matrix2::new(c, -s, s, c)
}

/// Reconstructs the symplectic matrix of one squeezer bin (loss-free).
pub fn bin_matrix(kind: &BinKind) -> Option<Matrix2<f64>> {
    match kind {
        BinKind::Squeezer {
            r,
            theta1_deg,
            theta2_deg,
            ..
        } => {
            let core = Matrix2::new(Float::exp(*r), 0.0, 0.0, Float::exp(-r));
            Some(rotation_deg(*theta2_deg) * core * rotation_deg(*theta1_deg))
        }
        BinKind::Phase { phi_deg } => Some(rotation_deg(*phi_deg)),
        _ => None,
    }
}

/// Splits a 2x2 symplectic matrix as `R(theta2) S(r) R(theta1)` with
/// `r >= 0` and `theta1` in (-90, 90]. The split is exact for exact
/// symplectic input; near-rotation input lands on `r = 0` cleanly.
pub fn decompose_symplectic(m: &Matrix2<f64>) -> Result<StepParams> {
    let det = m.determinant();
    if !det.is_finite() || (det - 1.0).abs() > 1e-9 * (1.0 + m.amax() * m.amax()) {
        return Err(Error::NotSymplectic((det - 1.0).abs()));
    }
    // b = m m^T = R(theta2) S^2 R(theta2)^T
    let b = m * m.transpose();
    let (a, bb, c) = (b[(0, 0)], b[(0, 1)], b[(1, 1)]);
    let half_trace = 0.5 * (a + c);
    // eigenvalues exp(2r), exp(-2r); guard the sqrt against roundoff
    let disc = Float::sqrt((half_trace * half_trace - 1.0).max(0.0));
    let lambda_max = half_trace + disc;
    let r = 0.5 * Float::ln(lambda_max).max(0.0);
    let theta2 = if disc <= 1e-15 * half_trace {
        0.0
    } else {
        0.5 * Float::atan2(2.0 * bb, a - c)
    };
    // recover theta1 from S(r)^-1 R(theta2)^T m, which is a rotation
    let core_inv = Matrix2::new(Float::exp(-r), 0.0, 0.0, Float::exp(r));
    let r2t = rotation_deg(theta2.to_degrees()).transpose();
    let r1 = core_inv * r2t * m;
    let theta1 = Float::atan2(r1[(1, 0)], r1[(0, 0)]);
    let mut theta1_deg = theta1.to_degrees();
    let mut theta2_deg = theta2.to_degrees();
    // paired half-turn shift: R(t2) S R(t1) = R(t2 +- 180) S R(t1 -+ ... )
    // (a half turn commutes with S as -I, so both angles shift together)
    if theta1_deg > 90.0 {
        theta1_deg -= 180.0;
        theta2_deg += 180.0;
    } else if theta1_deg <= -90.0 {
        theta1_deg += 180.0;
        theta2_deg -= 180.0;
    }
    if theta2_deg > 180.0 {
        theta2_deg -= 360.0;
    } else if theta2_deg <= -180.0 {
        theta2_deg += 360.0;
    }
    Ok(StepParams {
        r,
        theta1_deg,
        theta2_deg,
    })
}

/// Driver-facing parameter row for one compiled gate.
#[derive(Debug, Clone, Serialize)]
pub struct DriverRow {
    pub gate: String,
    pub r: f64,
    pub theta1_deg: f64,
    pub theta2_deg: f64,
    /// Exact coupler reflectivity.
    pub reflectivity: f64,
    /// Reflectivity after the 1% driver quantization.
    pub reflectivity_driver: f64,
    /// Exact feedforward gain in dB.
    pub gain_db: f64,
    /// Gain recomputed from the quantized reflectivity, in dB. This is what
    /// the electronics are actually programmed to.
    pub gain_db_driver: f64,
}

fn gate_label(spec: &GateSpec) -> String {
    match spec {
        GateSpec::Squeeze { r } => format!("squeeze {r}"),
        GateSpec::QuadraticPhase { kappa } => format!("qpg {kappa}"),
        GateSpec::Phase { theta_deg } => format!("phase {theta_deg}"),
        GateSpec::Displace { dx, dp } => format!("displace {dx} {dp}"),
        GateSpec::BeamSplitter { reflectivity } => format!("bs {reflectivity}"),
    }
}

/// Quantizes a reflectivity to the driver's step.
pub fn driver_reflectivity(reflectivity: f64) -> f64 {
    Float::round(reflectivity / DRIVER_REFLECTIVITY_STEP) * DRIVER_REFLECTIVITY_STEP
}

/// Tabulates driver parameters for each gate of a program (one row per
/// gate, program repeats do not duplicate rows).
pub fn driver_table(program: &GateProgram, r_max: f64) -> Result<Vec<DriverRow>> {
    let mut rows = Vec::new();
    for gate in &program.gates {
        let row = match compile_gate(gate, r_max)? {
            BinKind::Squeezer {
                r,
                reflectivity,
                gain_db,
                theta1_deg,
                theta2_deg,
                ..
            } => {
                let rq = driver_reflectivity(reflectivity);
                DriverRow {
                    gate: gate_label(gate),
                    r,
                    theta1_deg,
                    theta2_deg,
                    reflectivity,
                    reflectivity_driver: rq,
                    gain_db,
                    gain_db_driver: db_of_gain(gain_for_reflectivity(rq)),
                }
            }
            BinKind::Phase { phi_deg } => DriverRow {
                gate: gate_label(gate),
                r: 0.0,
                theta1_deg: phi_deg,
                theta2_deg: 0.0,
                reflectivity: 1.0,
                reflectivity_driver: 1.0,
                gain_db: 0.0,
                gain_db_driver: 0.0,
            },
            BinKind::Displace { .. } => DriverRow {
                gate: gate_label(gate),
                r: 0.0,
                theta1_deg: 0.0,
                theta2_deg: 0.0,
                reflectivity: 1.0,
                reflectivity_driver: 1.0,
                gain_db: 0.0,
                gain_db_driver: 0.0,
            },
            BinKind::Inject | BinKind::Export => unreachable!("not produced per gate"),
        };
        rows.push(row);
    }
    Ok(rows)
}

/// Checks the binary coupler driver: within one run every squeezer bin must
/// use the same reflectivity level (idle bins do not drive the coupler).
pub fn driver_check(schedule: &Schedule) -> Result<()> {
    let mut levels: Vec<f64> = Vec::new();
    for bin in &schedule.bins {
        if let BinKind::Squeezer { reflectivity, .. } = bin.kind {
            if !levels
                .iter()
                .any(|l| (l - reflectivity).abs() <= DRIVER_LEVEL_TOL)
            {
                levels.push(reflectivity);
            }
        }
    }
    if levels.len() > 1 {
        let listed = levels
            .iter()
            .map(|l| format!("{l:.6}"))
            .collect::<Vec<_>>()
            .join(", ");
        return Err(Error::DriverConstraint(format!(
            "{} levels: {listed}",
            levels.len()
        )));
    }
    Ok(())
}

/// One row of the flattened control timing chart.
#[derive(Debug, Clone, Serialize)]
pub struct TimingEvent {
    pub t_ns: f64,
    pub component: &'static str,
    pub value: f64,
    pub unit: &'static str,
}

/// Flattens a schedule into control events: loop switch, coupler level,
/// local-oscillator phase, feedforward gain and displacement. Phase
/// settings of a squeezer bin appear at the bin start (pre-coupler) and the
/// bin midpoint (post-feedforward).
pub fn emit_timing_chart(schedule: &Schedule) -> Vec<TimingEvent> {
    let mut events = Vec::new();
    for bin in &schedule.bins {
        let t0 = bin.t_start_ns;
        match &bin.kind {
            BinKind::Inject => {
                events.push(TimingEvent {
                    t_ns: t0,
                    component: "switch_in",
                    value: 1.0,
                    unit: "state",
                });
                events.push(TimingEvent {
                    t_ns: t0 + schedule.bin_ns,
                    component: "switch_in",
                    value: 0.0,
                    unit: "state",
                });
            }
            BinKind::Squeezer {
                reflectivity,
                gain_db,
                theta1_deg,
                theta2_deg,
                ..
            } => {
                events.push(TimingEvent {
                    t_ns: t0,
                    component: "coupler_reflectivity",
                    value: *reflectivity,
                    unit: "ratio",
                });
                events.push(TimingEvent {
                    t_ns: t0,
                    component: "lo_phase",
                    value: *theta1_deg,
                    unit: "deg",
                });
                events.push(TimingEvent {
                    t_ns: t0,
                    component: "ff_gain",
                    value: *gain_db,
                    unit: "dB",
                });
                events.push(TimingEvent {
                    t_ns: t0 + 0.5 * schedule.bin_ns,
                    component: "lo_phase",
                    value: *theta2_deg,
                    unit: "deg",
                });
                events.push(TimingEvent {
                    t_ns: t0 + schedule.bin_ns,
                    component: "coupler_reflectivity",
                    value: 1.0,
                    unit: "ratio",
                });
            }
            BinKind::Phase { phi_deg } => {
                events.push(TimingEvent {
                    t_ns: t0,
                    component: "lo_phase",
                    value: *phi_deg,
                    unit: "deg",
                });
            }
            BinKind::Displace { dx, dp } => {
                events.push(TimingEvent {
                    t_ns: t0,
                    component: "ff_dx",
                    value: *dx,
                    unit: "quad",
                });
                events.push(TimingEvent {
                    t_ns: t0,
                    component: "ff_dp",
                    value: *dp,
                    unit: "quad",
                });
            }
            BinKind::Export => {
                events.push(TimingEvent {
                    t_ns: t0,
                    component: "switch_out",
                    value: 1.0,
                    unit: "state",
                });
            }
        }
    }
    events
}

//! Time-binned execution of compiled schedules on the loop processor.
//!
//! Two models share the same schedule format. The ideal model applies each
//! bin's exact symplectic map. The realistic model builds every squeezer bin
//! the way the hardware does: tensor in a finitely squeezed ancilla, couple
//! at the compiled reflectivity, homodyne the tap port, and feed the outcome
//! forward as a displacement, with pure-loss channels for the ancilla
//! source, the loop roundtrip, and the readout path. With the feedforward
//! tap lossy, the electronic gain is raised by `1/sqrt(eta_read)` so the
//! mean map stays calibrated; `gain_scale` exposes deliberate miscalibration.

use alloc::format;
use alloc::vec::Vec;
use nalgebra::{DMatrix, DVector, Matrix2, Vector2};
use num_traits::Float;
use rand::Rng;

use crate::compiler::{bin_matrix, BinKind, Schedule};
use crate::gaussian::{make_gate, GateSpec, GaussianState, LossChannel, SymplecticOp};
use crate::{Error, Result};

/// Variance cap standing in for an infinitely squeezed ideal ancilla.
pub const IDEAL_ANCILLA_CAP: f64 = 1e12;

/// Loss and resource parameters of the loop.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct LoopConfig {
    /// Roundtrip length of one time bin, ns.
    pub bin_ns: f64,
    /// Ancilla squeezing at the source, dB below shot noise.
    pub ancilla_db: f64,
    /// Loss between the ancilla source and the coupler.
    pub ancilla_loss: f64,
    /// Loss per loop roundtrip (applied once per bin, injection included).
    pub roundtrip_loss: f64,
    /// Loss between the loop and any detector (tap and final readout).
    pub readout_loss: f64,
    /// Whether the feedforward homodyne sits behind the readout loss. When
    /// true the gain is compensated by `1/sqrt(1 - readout_loss)`.
    pub ff_path_lossy: bool,
    /// Deliberate multiplier on the feedforward gain (1.0 = calibrated).
    pub gain_scale: f64,
    /// Ideal model: no losses, exact gates.
    pub ideal: bool,
}

impl Default for LoopConfig {
    fn default() -> Self {
        Self {
            bin_ns: 66.0,
            ancilla_db: 8.0,
            ancilla_loss: 0.07,
            roundtrip_loss: 0.06,
            readout_loss: 0.19,
            ff_path_lossy: true,
            gain_scale: 1.0,
            ideal: false,
        }
    }
}

impl LoopConfig {
    /// Lossless configuration with exact gate application.
    pub fn ideal() -> Self {
        Self {
            ancilla_loss: 0.0,
            roundtrip_loss: 0.0,
            readout_loss: 0.0,
            ff_path_lossy: false,
            ideal: true,
            ..Self::default()
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.bin_ns > 0.0) || !self.bin_ns.is_finite() {
            return Err(Error::BadParameter(format!(
                "bin length {} ns",
                self.bin_ns
            )));
        }
        if !(0.0..=30.0).contains(&self.ancilla_db) {
            return Err(Error::BadParameter(format!(
                "ancilla squeezing {} dB",
                self.ancilla_db
            )));
        }
        for (name, l) in [
            ("ancilla", self.ancilla_loss),
            ("roundtrip", self.roundtrip_loss),
            ("readout", self.readout_loss),
        ] {
            if !(0.0..1.0).contains(&l) {
                return Err(Error::BadParameter(format!("{name} loss {l}")));
            }
        }
        if !(self.gain_scale > 0.0) || !self.gain_scale.is_finite() {
            return Err(Error::BadParameter(format!(
                "gain scale {}",
                self.gain_scale
            )));
        }
        Ok(())
    }
}

/// The p-squeezed ancilla entering the coupler. Realistic: finite squeezing
/// degraded by the source loss. Ideal: a capped stand-in for the infinite
/// squeezing limit (for inspection; ideal runs bypass the ancilla entirely).
pub fn make_ancilla(config: &LoopConfig) -> Result<GaussianState> {
    if config.ideal {
        let mut cov = DMatrix::zeros(2, 2);
        cov[(0, 0)] = IDEAL_ANCILLA_CAP;
        cov[(1, 1)] = 1.0 / IDEAL_ANCILLA_CAP;
        return GaussianState::new(DVector::zeros(2), cov);
    }
    // variance 10^(-db/10) on p means r = db ln(10)/20
    let r = config.ancilla_db * core::f64::consts::LN_10 / 20.0;
    GaussianState::squeezed_vacuum(r)
        .apply_loss(&LossChannel::new(1.0 - config.ancilla_loss, 0)?)
}

/// Homodyne outcome and applied feedforward of one squeezer bin.
#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct BinOutcome {
    pub bin_index: usize,
    pub outcome: f64,
    pub displacement: (f64, f64),
}

/// Deterministic run result: ensemble-averaged output moments.
#[derive(Debug, Clone)]
pub struct RunRecord {
    /// Output state after the export readout.
    pub output: GaussianState,
    /// Exact affine map the schedule encodes (loss-free limit).
    pub target: SymplecticOp,
    /// Physicality margin of the output covariance.
    pub min_symplectic_eigenvalue: f64,
    pub n_bins: usize,
}

/// One trajectory: conditional output plus the bin-by-bin record.
#[derive(Debug, Clone)]
pub struct SampledRun {
    pub output: GaussianState,
    pub outcomes: Vec<BinOutcome>,
}

/// Mean-map estimate from coherent probes.
#[derive(Debug, Clone, Copy)]
pub struct GateMatrixEstimate {
    pub matrix: Matrix2<f64>,
    /// Output mean for vacuum input (nonzero only for displacing programs).
    pub offset: Vector2<f64>,
    pub probe_amplitude: f64,
}

/// Executes compiled schedules under one configuration.
#[derive(Debug, Clone)]
pub struct LoopMachine {
    config: LoopConfig,
}

impl LoopMachine {
    pub fn new(config: LoopConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self { config })
    }

    pub fn config(&self) -> &LoopConfig {
        &self.config
    }

    pub fn ancilla(&self) -> Result<GaussianState> {
        make_ancilla(&self.config)
    }

    fn check_schedule(&self, schedule: &Schedule) -> Result<()> {
        let n = schedule.bins.len();
        if n < 2
            || schedule.bins[0].kind != BinKind::Inject
            || schedule.bins[n - 1].kind != BinKind::Export
        {
            return Err(Error::BadParameter(
                "schedule must start with injection and end with export".into(),
            ));
        }
        if schedule.bins[1..n - 1]
            .iter()
            .any(|b| matches!(b.kind, BinKind::Inject | BinKind::Export))
        {
            return Err(Error::BadParameter(
                "injection and export must be the outermost bins".into(),
            ));
        }
        Ok(())
    }

    fn roundtrip(&self, state: GaussianState) -> Result<GaussianState> {
        if self.config.roundtrip_loss == 0.0 {
            return Ok(state);
        }
        state.apply_loss(&LossChannel::new(1.0 - self.config.roundtrip_loss, 0)?)
    }

    fn effective_gain(&self, gain: f64) -> f64 {
        let comp = if self.config.ff_path_lossy {
            1.0 / Float::sqrt(1.0 - self.config.readout_loss)
        } else {
            1.0
        };
        gain * self.config.gain_scale * comp
    }

    /// Joint state just before the tap homodyne of a squeezer bin, and the
    /// effective electronic gain for its outcome.
    fn coupled_joint(
        &self,
        state: &GaussianState,
        reflectivity: f64,
        gain: f64,
    ) -> Result<(GaussianState, f64)> {
        let ancilla = self.ancilla()?;
        let mut joint = state
            .tensor(&ancilla)?
            .apply(&make_gate(GateSpec::BeamSplitter { reflectivity })?)?;
        if self.config.ff_path_lossy && self.config.readout_loss > 0.0 {
            joint = joint.apply_loss(&LossChannel::new(1.0 - self.config.readout_loss, 1)?)?;
        }
        Ok((joint, self.effective_gain(gain)))
    }

    /// Ensemble-averaged execution.
    pub fn run_analytic(&self, schedule: &Schedule, input: &GaussianState) -> Result<RunRecord> {
        self.check_schedule(schedule)?;
        if input.n_modes() != 1 {
            return Err(Error::ModeCount(input.n_modes()));
        }
        let mut state = input.clone();
        for bin in &schedule.bins {
            state = match &bin.kind {
                BinKind::Inject => {
                    if self.config.ideal {
                        state
                    } else {
                        self.roundtrip(state)?
                    }
                }
                BinKind::Squeezer {
                    reflectivity,
                    gain,
                    theta1_deg,
                    theta2_deg,
                    ..
                } => {
                    if self.config.ideal {
                        let m = bin_matrix(&bin.kind).expect("squeezer bin has a matrix");
                        state.apply(&op_from_matrix(&m)?)?
                    } else {
                        let pre = state.apply(&make_gate(GateSpec::Phase {
                            theta_deg: *theta1_deg,
                        })?)?;
                        let (joint, g) = self.coupled_joint(&pre, *reflectivity, *gain)?;
                        let fed = joint.measure_feedforward(1, 0.0, 0, (g, 0.0))?;
                        let post = fed.apply(&make_gate(GateSpec::Phase {
                            theta_deg: *theta2_deg,
                        })?)?;
                        self.roundtrip(post)?
                    }
                }
                BinKind::Phase { phi_deg } => {
                    let rotated = state.apply(&make_gate(GateSpec::Phase {
                        theta_deg: *phi_deg,
                    })?)?;
                    if self.config.ideal {
                        rotated
                    } else {
                        self.roundtrip(rotated)?
                    }
                }
                BinKind::Displace { dx, dp } => {
                    let moved =
                        state.apply(&make_gate(GateSpec::Displace { dx: *dx, dp: *dp })?)?;
                    if self.config.ideal {
                        moved
                    } else {
                        self.roundtrip(moved)?
                    }
                }
                BinKind::Export => {
                    if self.config.ideal || self.config.readout_loss == 0.0 {
                        state
                    } else {
                        state
                            .apply_loss(&LossChannel::new(1.0 - self.config.readout_loss, 0)?)?
                    }
                }
            };
        }
        let min_symplectic_eigenvalue = state.min_symplectic_eigenvalue();
        Ok(RunRecord {
            output: state,
            target: schedule_target(schedule)?,
            min_symplectic_eigenvalue,
            n_bins: schedule.bins.len(),
        })
    }

    /// Single-trajectory execution with sampled homodyne outcomes. Ideal
    /// configurations run deterministically (no measurement happens).
    pub fn run_sampled<R: Rng + ?Sized>(
        &self,
        schedule: &Schedule,
        input: &GaussianState,
        rng: &mut R,
    ) -> Result<SampledRun> {
        self.check_schedule(schedule)?;
        if input.n_modes() != 1 {
            return Err(Error::ModeCount(input.n_modes()));
        }
        if self.config.ideal {
            let rec = self.run_analytic(schedule, input)?;
            return Ok(SampledRun {
                output: rec.output,
                outcomes: Vec::new(),
            });
        }
        let mut state = input.clone();
        let mut outcomes = Vec::new();
        for bin in &schedule.bins {
            state = match &bin.kind {
                BinKind::Inject => self.roundtrip(state)?,
                BinKind::Squeezer {
                    reflectivity,
                    gain,
                    theta1_deg,
                    theta2_deg,
                    ..
                } => {
                    let pre = state.apply(&make_gate(GateSpec::Phase {
                        theta_deg: *theta1_deg,
                    })?)?;
                    let (joint, g) = self.coupled_joint(&pre, *reflectivity, *gain)?;
                    let (m, conditioned) = joint.homodyne_measure(1, 0.0, rng)?;
                    let displacement = (g * m, 0.0);
                    outcomes.push(BinOutcome {
                        bin_index: bin.index,
                        outcome: m,
                        displacement,
                    });
                    let fed = conditioned.apply(&make_gate(GateSpec::Displace {
                        dx: displacement.0,
                        dp: displacement.1,
                    })?)?;
                    let post = fed.apply(&make_gate(GateSpec::Phase {
                        theta_deg: *theta2_deg,
                    })?)?;
                    self.roundtrip(post)?
                }
                BinKind::Phase { phi_deg } => self.roundtrip(state.apply(&make_gate(
                    GateSpec::Phase {
                        theta_deg: *phi_deg,
                    },
                )?)?)?,
                BinKind::Displace { dx, dp } => self.roundtrip(
                    state.apply(&make_gate(GateSpec::Displace { dx: *dx, dp: *dp })?)?,
                )?,
                BinKind::Export => {
                    state.apply_loss(&LossChannel::new(1.0 - self.config.readout_loss, 0)?)?
                }
            };
        }
        Ok(SampledRun {
            output: state,
            outcomes,
        })
    }

    /// Estimates the effective mean map by probing with +/- x and p coherent
    /// states: column j is `(mean(+A e_j) - mean(-A e_j)) / 2A`, which
    /// cancels any displacement offset; the offset itself comes from a
    /// vacuum run.
    pub fn estimate_gate_matrix(
        &self,
        schedule: &Schedule,
        probe_amplitude: f64,
    ) -> Result<GateMatrixEstimate> {
        if !(probe_amplitude > 0.0) || !probe_amplitude.is_finite() {
            return Err(Error::BadParameter(format!(
                "probe amplitude {probe_amplitude}"
            )));
        }
        let a = probe_amplitude;
        let mean_of = |x: f64, p: f64| -> Result<Vector2<f64>> {
            let rec = self.run_analytic(schedule, &GaussianState::coherent(x, p))?;
            rec.output.mean_pair(0)
        };
        let xp = mean_of(a, 0.0)?;
        let xm = mean_of(-a, 0.0)?;
        let pp = mean_of(0.0, a)?;
        let pm = mean_of(0.0, -a)?;
        let offset = mean_of(0.0, 0.0)?;
        let col_x = (xp - xm) / (2.0 * a);
        let col_p = (pp - pm) / (2.0 * a);
        Ok(GateMatrixEstimate {
            matrix: Matrix2::from_columns(&[col_x, col_p]),
            offset,
            probe_amplitude,
        })
    }
}

fn op_from_matrix(m: &Matrix2<f64>) -> Result<SymplecticOp> {
    SymplecticOp::new(
        DMatrix::from_row_slice(2, 2, &[m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)]]),
        DVector::zeros(2),
    )
}

/// Exact affine map of a schedule in the loss-free limit.
pub fn schedule_target(schedule: &Schedule) -> Result<SymplecticOp> {
    let mut op = SymplecticOp::identity(1);
    for bin in &schedule.bins {
        op = match &bin.kind {
            BinKind::Inject | BinKind::Export => op,
            BinKind::Squeezer { .. } => {
                let m = bin_matrix(&bin.kind).expect("squeezer bin has a matrix");
                op.then(&op_from_matrix(&m)?)?
            }
            BinKind::Phase { phi_deg } => op.then(&make_gate(GateSpec::Phase {
                theta_deg: *phi_deg,
            })?)?,
            BinKind::Displace { dx, dp } => {
                op.then(&make_gate(GateSpec::Displace { dx: *dx, dp: *dp })?)?
            }
        };
    }
    Ok(op)
}

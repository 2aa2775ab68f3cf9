//! Run manifest: everything one `run` needs, collected in a flat
//! `key = value` file plus command-line overrides. One seed drives all
//! randomness through named sub-streams, so a manifest pins its artifacts
//! bit for bit.

use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use loopsim_core::compiler::{GateProgram, DEFAULT_MAX_SQUEEZE};
use loopsim_core::gaussian::{GaussianState, GateSpec};
use loopsim_core::machine::LoopConfig;
use serde::Serialize;

use crate::program;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Model {
    /// Loss-free machine applying exact gates.
    Ideal,
    /// Full loss budget and finitely squeezed ancilla.
    Realistic,
}

impl Model {
    pub fn name(self) -> &'static str {
        match self {
            Model::Ideal => "ideal",
            Model::Realistic => "realistic",
        }
    }
}

/// Input state selector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "state", rename_all = "lowercase")]
pub enum InputSpec {
    Vacuum,
    Coherent { x: f64, p: f64 },
}

impl InputSpec {
    pub fn state(&self) -> GaussianState {
        match self {
            InputSpec::Vacuum => GaussianState::vacuum(1),
            InputSpec::Coherent { x, p } => GaussianState::coherent(*x, *p),
        }
    }

    pub fn parse(value: &str) -> Result<Self> {
        let words: Vec<&str> = value.split_whitespace().collect();
        match words.as_slice() {
            ["vacuum"] => Ok(InputSpec::Vacuum),
            ["coherent", x, p] => Ok(InputSpec::Coherent {
                x: x.parse().context("coherent x amplitude")?,
                p: p.parse().context("coherent p amplitude")?,
            }),
            _ => bail!("input must be 'vacuum' or 'coherent X P', got '{value}'"),
        }
    }
}

/// Complete description of one run.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub seed: u64,
    pub model: Model,
    /// Gate list in token form (echoed into artifacts).
    pub program: Vec<String>,
    #[serde(skip)]
    pub gates: Vec<GateSpec>,
    pub repeat: usize,
    pub input: InputSpec,
    /// Homodyne samples per tomography angle; 0 keeps the run analytic.
    pub shots: usize,
    /// Number of equally spaced homodyne angles.
    pub angles: usize,
    /// Bootstrap subsets behind every error bar.
    pub subsets: usize,
    /// Coherent amplitude of the gate-matrix probe runs.
    pub probe_amplitude: f64,
    pub bin_ns: f64,
    pub ancilla_db: f64,
    pub ancilla_loss: f64,
    pub roundtrip_loss: f64,
    pub readout_loss: f64,
    pub ff_path_lossy: bool,
    pub gain_scale: f64,
    pub max_squeeze: f64,
    #[serde(skip)]
    pub out_dir: PathBuf,
}

impl Default for RunManifest {
    fn default() -> Self {
        let config = LoopConfig::default();
        Self {
            seed: 7,
            model: Model::Realistic,
            program: Vec::new(),
            gates: Vec::new(),
            repeat: 1,
            input: InputSpec::Vacuum,
            shots: 0,
            angles: 12,
            subsets: 10,
            probe_amplitude: 4.0,
            bin_ns: config.bin_ns,
            ancilla_db: config.ancilla_db,
            ancilla_loss: config.ancilla_loss,
            roundtrip_loss: config.roundtrip_loss,
            readout_loss: config.readout_loss,
            ff_path_lossy: config.ff_path_lossy,
            gain_scale: config.gain_scale,
            max_squeeze: DEFAULT_MAX_SQUEEZE,
            out_dir: PathBuf::from("loopsim_out"),
        }
    }
}

impl RunManifest {
    pub fn set_gates(&mut self, gates: Vec<GateSpec>) {
        self.program = gates.iter().map(program::render).collect();
        self.gates = gates;
    }

    pub fn gate_program(&self) -> GateProgram {
        GateProgram::repeated(self.gates.clone(), self.repeat)
    }

    /// Machine configuration for the selected model. The ideal model keeps
    /// only the bin length; every loss is zeroed.
    pub fn loop_config(&self) -> LoopConfig {
        match self.model {
            Model::Ideal => {
                let mut config = LoopConfig::ideal();
                config.bin_ns = self.bin_ns;
                config
            }
            Model::Realistic => LoopConfig {
                bin_ns: self.bin_ns,
                ancilla_db: self.ancilla_db,
                ancilla_loss: self.ancilla_loss,
                roundtrip_loss: self.roundtrip_loss,
                readout_loss: self.readout_loss,
                ff_path_lossy: self.ff_path_lossy,
                gain_scale: self.gain_scale,
                ideal: false,
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.gates.is_empty() {
            bail!("no gate program given (inline tokens, --program, or a manifest 'program' key)");
        }
        if self.repeat == 0 {
            bail!("repeat must be at least 1");
        }
        if self.angles < 3 {
            bail!("tomography needs at least 3 angles, got {}", self.angles);
        }
        if self.subsets < 2 {
            bail!("bootstrap needs at least 2 subsets, got {}", self.subsets);
        }
        if self.shots > 0 && self.shots < self.subsets {
            bail!(
                "shots per angle ({}) must cover the {} bootstrap subsets",
                self.shots,
                self.subsets
            );
        }
        if !(self.probe_amplitude > 0.0) || !self.probe_amplitude.is_finite() {
            bail!("probe amplitude must be positive");
        }
        if !(self.max_squeeze > 0.0) || !self.max_squeeze.is_finite() {
            bail!("max squeeze must be positive");
        }
        loopsim_core::machine::LoopMachine::new(self.loop_config())?;
        Ok(())
    }

    /// Equally spaced homodyne angles in [0, 180).
    pub fn angle_list(&self) -> Vec<f64> {
        (0..self.angles)
            .map(|k| 180.0 * k as f64 / self.angles as f64)
            .collect()
    }
}

fn parse_bool(value: &str) -> Result<bool> {
    match value {
        "on" | "true" | "yes" | "1" => Ok(true),
        "off" | "false" | "no" | "0" => Ok(false),
        _ => bail!("expected on/off, got '{value}'"),
    }
}

/// Command-line `--ff-path-lossy on|off` parser.
pub fn parse_on_off(value: &str) -> std::result::Result<bool, String> {
    parse_bool(value).map_err(|e| e.to_string())
}

/// Parses a flat `key = value` manifest. Blank lines and `#` comments are
/// ignored; unknown keys are errors.
pub fn parse_manifest_text(text: &str) -> Result<RunManifest> {
    let mut m = RunManifest::default();
    for (lineno, raw) in text.lines().enumerate() {
        let line = match raw.find('#') {
            Some(pos) => &raw[..pos],
            None => raw,
        };
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let place = format!("manifest line {}", lineno + 1);
        let Some((key, value)) = line.split_once('=') else {
            bail!("{place}: expected 'key = value'");
        };
        let key = key.trim();
        let value = value.trim();
        let num = |what: &str| -> Result<f64> {
            value
                .parse::<f64>()
                .with_context(|| format!("{place}: {what} must be a number, got '{value}'"))
        };
        match key {
            "seed" => {
                m.seed = value
                    .parse()
                    .with_context(|| format!("{place}: seed must be a nonnegative integer"))?
            }
            "model" => {
                m.model = match value {
                    "ideal" => Model::Ideal,
                    "realistic" => Model::Realistic,
                    _ => bail!("{place}: model must be 'ideal' or 'realistic'"),
                }
            }
            "program" => {
                let mut gates = Vec::new();
                for part in value.split(';') {
                    let part = part.trim();
                    if part.is_empty() {
                        continue;
                    }
                    let tokens: Vec<String> =
                        part.split_whitespace().map(|s| s.to_string()).collect();
                    gates.extend(
                        program::parse_tokens(&tokens).with_context(|| place.clone())?,
                    );
                }
                m.set_gates(gates);
            }
            "repeat" => {
                m.repeat = value
                    .parse()
                    .with_context(|| format!("{place}: repeat must be a positive integer"))?
            }
            "input" => m.input = InputSpec::parse(value).with_context(|| place.clone())?,
            "shots" => {
                m.shots = value
                    .parse()
                    .with_context(|| format!("{place}: shots must be a nonnegative integer"))?
            }
            "angles" => {
                m.angles = value
                    .parse()
                    .with_context(|| format!("{place}: angles must be a positive integer"))?
            }
            "subsets" => {
                m.subsets = value
                    .parse()
                    .with_context(|| format!("{place}: subsets must be a positive integer"))?
            }
            "probe_amplitude" => m.probe_amplitude = num("probe_amplitude")?,
            "bin_ns" => m.bin_ns = num("bin_ns")?,
            "ancilla_db" => m.ancilla_db = num("ancilla_db")?,
            "ancilla_loss" => m.ancilla_loss = num("ancilla_loss")?,
            "roundtrip_loss" => m.roundtrip_loss = num("roundtrip_loss")?,
            "readout_loss" => m.readout_loss = num("readout_loss")?,
            "ff_path_lossy" => {
                m.ff_path_lossy = parse_bool(value).with_context(|| place.clone())?
            }
            "gain_scale" => m.gain_scale = num("gain_scale")?,
            "max_squeeze" => m.max_squeeze = num("max_squeeze")?,
            "out" => m.out_dir = PathBuf::from(value),
            _ => bail!("{place}: unknown key '{key}'"),
        }
    }
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn manifest_parses_and_overrides_defaults() {
        let text = "\
# session
seed = 42
model = ideal
program = squeeze 0.44; phase 30
repeat = 2
input = coherent 4 0
shots = 500
ff_path_lossy = off
";
        let m = parse_manifest_text(text).unwrap();
        assert_eq!(m.seed, 42);
        assert_eq!(m.model, Model::Ideal);
        assert_eq!(m.program, vec!["squeeze 0.44", "phase 30"]);
        assert_eq!(m.repeat, 2);
        assert_eq!(m.input, InputSpec::Coherent { x: 4.0, p: 0.0 });
        assert_eq!(m.shots, 500);
        assert!(!m.ff_path_lossy);
        m.validate().unwrap();
    }

    #[test]
    fn unknown_keys_and_bad_values_are_rejected() {
        assert!(parse_manifest_text("warp = 9\n")
            .unwrap_err()
            .to_string()
            .contains("unknown key"));
        assert!(parse_manifest_text("seed = -3\n")
            .unwrap_err()
            .to_string()
            .contains("line 1"));
        assert!(parse_manifest_text("model = fuzzy\n").is_err());
    }

    #[test]
    fn ideal_config_keeps_only_the_bin_length() {
        let mut m = RunManifest::default();
        m.set_gates(vec![GateSpec::Squeeze { r: 0.4 }]);
        m.model = Model::Ideal;
        m.bin_ns = 50.0;
        let config = m.loop_config();
        assert!(config.ideal);
        assert_eq!(config.bin_ns, 50.0);
        assert_eq!(config.roundtrip_loss, 0.0);
    }

    #[test]
    fn validation_rejects_empty_programs_and_thin_sampling() {
        let m = RunManifest::default();
        assert!(m.validate().is_err());
        let mut m = RunManifest::default();
        m.set_gates(vec![GateSpec::Phase { theta_deg: 10.0 }]);
        m.shots = 5;
        assert!(m.validate().unwrap_err().to_string().contains("subsets"));
    }

    #[test]
    fn angle_list_spans_a_half_turn() {
        let m = RunManifest {
            angles: 4,
            ..RunManifest::default()
        };
        assert_eq!(m.angle_list(), vec![0.0, 45.0, 90.0, 135.0]);
    }
}

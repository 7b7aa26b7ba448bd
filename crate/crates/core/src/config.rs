//! Model parameters, unit conventions and configuration ingestion.
//!
//! Every frequency-like quantity is stored as an ordinary frequency in Hz.
//! Config sections may set `angular = true`, in which case the
//! frequency-dimensioned keys of that section are interpreted as angular
//! frequencies (2π×X) and divided by 2π once, at ingestion. Nothing
//! downstream ever multiplies or divides by 2π again.
//!
//! The config file is TOML with sections `[rates]`, `[cavity]`, `[gain]`,
//! `[pumps.<label>]` and `[sweep]`; keys are lowercase snake case. Any
//! omitted key falls back to the measured reference value from
//! [`SystemParams::default_params`].

use std::f64::consts::TAU;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One pump (cooling) laser line feeding the recoil gain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PumpLine {
    pub label: String,
    /// Pump frequency minus atomic resonance, Hz (signed).
    pub detuning: f64,
    /// Dimensionless gain weight of this line.
    pub weight: f64,
}

impl PumpLine {
    pub fn new(label: impl Into<String>, detuning: f64, weight: f64) -> Result<Self> {
        if weight < 0.0 || weight.is_nan() {
            return Err(Error::Validation {
                field: format!("pumps.{}.weight", label.into()),
                msg: format!("must be >= 0, got {weight}"),
            });
        }
        Ok(PumpLine {
            label: label.into(),
            detuning,
            weight,
        })
    }
}

/// All model constants. Immutable after construction and safe to share
/// across worker threads.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemParams {
    /// Atom loading rate R, atoms/s.
    pub loading_rate: f64,
    /// Single-body loss rate, 1/s.
    pub loss_rate: f64,
    /// Lasing-induced loss coefficient, 1/(photon·s).
    pub lasing_loss_rate: f64,
    /// Reference intracavity photon number per atom at gain resonance.
    pub photons_per_atom: f64,
    /// Single-atom cavity coupling g, Hz.
    pub coupling: f64,
    /// Cavity linewidth (FWHM), Hz.
    pub cavity_linewidth: f64,
    /// Atomic transition linewidth (FWHM), Hz.
    pub atom_linewidth: f64,
    /// Recoil-gain FWHM, Hz.
    pub gain_fwhm: f64,
    /// Recoil-gain shift from the pump line, Hz.
    pub gain_shift: f64,
    /// Radial temperature of the cloud, K.
    pub temperature: f64,
    /// Fraction of atoms in the optical excited state during lasing.
    pub excited_fraction: f64,
    /// Photon-recoil multiplier n (momentum transfer n·ħk per cycle).
    pub recoil_order: f64,
    /// Pump lines feeding the gain, ordered as configured.
    pub pump_lines: Vec<PumpLine>,
}

impl SystemParams {
    /// The measured parameter set of the reference system.
    ///
    /// Pump detunings are quoted from the bare (m_J = 0) atomic resonance:
    /// the cooling lines sit at -0.9 MHz (3D molasses) and -1.6 MHz
    /// (slowing) from the Zeeman-shifted m_J = -1 line, which itself is
    /// -1.2 MHz from the bare resonance.
    pub fn default_params() -> SystemParams {
        SystemParams {
            loading_rate: 2e7,
            loss_rate: 19.0,
            lasing_loss_rate: 8.93e-6,
            photons_per_atom: 1045.0,
            coupling: 3.5e3,
            cavity_linewidth: 5e4,
            atom_linewidth: 7.5e3,
            gain_fwhm: 5e4,
            gain_shift: 1e5,
            temperature: 1e-5,
            excited_fraction: 0.3,
            recoil_order: 1.0,
            pump_lines: vec![
                PumpLine {
                    label: "molasses_3d".into(),
                    detuning: -2.1e6,
                    weight: 1.0,
                },
                PumpLine {
                    label: "slowing".into(),
                    detuning: -2.8e6,
                    weight: 1.0,
                },
            ],
        }
    }

    /// Steady-state atom number with no lasing, R/γ_loss.
    pub fn no_lasing_atom_number(&self) -> f64 {
        self.loading_rate / self.loss_rate
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("loading_rate", self.loading_rate),
            ("loss_rate", self.loss_rate),
            ("lasing_loss_rate", self.lasing_loss_rate),
            ("photons_per_atom", self.photons_per_atom),
            ("coupling", self.coupling),
            ("cavity_linewidth", self.cavity_linewidth),
            ("atom_linewidth", self.atom_linewidth),
            ("gain_fwhm", self.gain_fwhm),
            ("temperature", self.temperature),
            ("recoil_order", self.recoil_order),
        ];
        for (field, v) in positive {
            if v <= 0.0 || !v.is_finite() {
                return Err(Error::Validation {
                    field: field.into(),
                    msg: format!("must be strictly positive, got {v}"),
                });
            }
        }
        if !self.gain_shift.is_finite() {
            return Err(Error::Validation {
                field: "gain_shift".into(),
                msg: "must be finite".into(),
            });
        }
        if !(0.0..0.5).contains(&self.excited_fraction) {
            return Err(Error::Validation {
                field: "excited_fraction".into(),
                msg: format!("must lie in [0, 0.5), got {}", self.excited_fraction),
            });
        }
        if self.pump_lines.is_empty() {
            return Err(Error::Validation {
                field: "pumps".into(),
                msg: "at least one pump line is required".into(),
            });
        }
        for line in &self.pump_lines {
            if line.weight < 0.0 || line.weight.is_nan() || !line.detuning.is_finite() {
                return Err(Error::Validation {
                    field: format!("pumps.{}", line.label),
                    msg: format!(
                        "detuning must be finite, weight >= 0 (got {}, {})",
                        line.detuning, line.weight
                    ),
                });
            }
        }
        Ok(())
    }
}

/// Sweep direction of the bare cavity detuning.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepDirection {
    Up,
    Down,
}

/// A quasi-static sweep window of the bare cavity detuning δ_ca = f_c − f_a.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    /// First bare cavity detuning, Hz.
    pub start: f64,
    /// Last bare cavity detuning, Hz.
    pub stop: f64,
    /// Step magnitude, Hz (> 0).
    pub step: f64,
    pub direction: SweepDirection,
}

impl SweepSpec {
    pub fn new(start: f64, stop: f64, step: f64, direction: SweepDirection) -> Result<Self> {
        let spec = SweepSpec {
            start,
            stop,
            step,
            direction,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.step <= 0.0 || !self.step.is_finite() {
            return Err(Error::Validation {
                field: "sweep.step".into(),
                msg: format!("must be strictly positive, got {}", self.step),
            });
        }
        if self.start == self.stop || !self.start.is_finite() || !self.stop.is_finite() {
            return Err(Error::Validation {
                field: "sweep.start".into(),
                msg: "sweep window is degenerate (start == stop)".into(),
            });
        }
        Ok(())
    }

    /// Detuning grid in walk order: ascending for `Up`, descending for `Down`.
    pub fn grid(&self) -> Vec<f64> {
        let lo = self.start.min(self.stop);
        let hi = self.start.max(self.stop);
        let n = ((hi - lo) / self.step).round() as usize;
        let mut pts: Vec<f64> = (0..=n).map(|i| lo + i as f64 * self.step).collect();
        if let Some(last) = pts.last_mut() {
            *last = last.min(hi);
        }
        if self.direction == SweepDirection::Down {
            pts.reverse();
        }
        pts
    }
}

/// Result of parsing a config file: model parameters plus the optional
/// sweep window.
#[derive(Debug, Clone, PartialEq)]
pub struct ParsedConfig {
    pub params: SystemParams,
    pub sweep: Option<SweepSpec>,
}

// Raw (pre-merge) shape of the file. Every key optional; unknown keys are
// rejected so typos do not silently fall back to defaults.

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    rates: Option<RawRates>,
    cavity: Option<RawCavity>,
    gain: Option<RawGain>,
    // toml::Table with preserve_order keeps pump lines in file order
    pumps: Option<toml::Table>,
    sweep: Option<RawSweep>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRates {
    loading_rate: Option<f64>,
    loss_rate: Option<f64>,
    lasing_loss_rate: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCavity {
    angular: Option<bool>,
    coupling: Option<f64>,
    linewidth: Option<f64>,
    atom_linewidth: Option<f64>,
    excited_fraction: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGain {
    angular: Option<bool>,
    fwhm: Option<f64>,
    shift: Option<f64>,
    photons_per_atom: Option<f64>,
    temperature: Option<f64>,
    recoil_order: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPump {
    angular: Option<bool>,
    detuning: Option<f64>,
    weight: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSweep {
    angular: Option<bool>,
    start: Option<f64>,
    stop: Option<f64>,
    step: Option<f64>,
    direction: Option<SweepDirection>,
}

fn descale(v: Option<f64>, angular: bool, default: f64) -> f64 {
    match v {
        Some(x) if angular => x / TAU,
        Some(x) => x,
        None => default,
    }
}

/// Parse config text into validated parameters, applying reference defaults
/// for omitted keys.
pub fn parse_config(text: &str) -> Result<ParsedConfig> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| toml_error_with_line(text, e))?;
    let d = SystemParams::default_params();

    let rates = raw.rates.unwrap_or_default();
    let cavity = raw.cavity.unwrap_or_default();
    let gain = raw.gain.unwrap_or_default();
    let cav_ang = cavity.angular.unwrap_or(false);
    let gain_ang = gain.angular.unwrap_or(false);

    let pump_lines = match raw.pumps {
        None => d.pump_lines.clone(),
        Some(map) => {
            if map.is_empty() {
                return Err(Error::Validation {
                    field: "pumps".into(),
                    msg: "at least one pump line is required".into(),
                });
            }
            let mut lines = Vec::with_capacity(map.len());
            for (label, value) in map {
                let p: RawPump = value
                    .try_into()
                    .map_err(|e: toml::de::Error| Error::Parse {
                        line: 1,
                        msg: format!("pumps.{label}: {}", e.message()),
                    })?;
                let ang = p.angular.unwrap_or(false);
                let detuning = p
                    .detuning
                    .ok_or_else(|| Error::MissingField(format!("pumps.{label}.detuning")))?;
                lines.push(PumpLine {
                    label,
                    detuning: if ang { detuning / TAU } else { detuning },
                    weight: p.weight.unwrap_or(1.0),
                });
            }
            lines
        }
    };

    let params = SystemParams {
        loading_rate: rates.loading_rate.unwrap_or(d.loading_rate),
        loss_rate: rates.loss_rate.unwrap_or(d.loss_rate),
        lasing_loss_rate: rates.lasing_loss_rate.unwrap_or(d.lasing_loss_rate),
        photons_per_atom: gain.photons_per_atom.unwrap_or(d.photons_per_atom),
        coupling: descale(cavity.coupling, cav_ang, d.coupling),
        cavity_linewidth: descale(cavity.linewidth, cav_ang, d.cavity_linewidth),
        atom_linewidth: descale(cavity.atom_linewidth, cav_ang, d.atom_linewidth),
        gain_fwhm: descale(gain.fwhm, gain_ang, d.gain_fwhm),
        gain_shift: descale(gain.shift, gain_ang, d.gain_shift),
        temperature: gain.temperature.unwrap_or(d.temperature),
        excited_fraction: cavity.excited_fraction.unwrap_or(d.excited_fraction),
        recoil_order: gain.recoil_order.unwrap_or(d.recoil_order),
        pump_lines,
    };
    params.validate()?;

    let sweep = match raw.sweep {
        None => None,
        Some(s) => {
            let ang = s.angular.unwrap_or(false);
            let scale = if ang { TAU } else { 1.0 };
            let start = s
                .start
                .ok_or_else(|| Error::MissingField("sweep.start".into()))?
                / scale;
            let stop = s
                .stop
                .ok_or_else(|| Error::MissingField("sweep.stop".into()))?
                / scale;
            let step = s
                .step
                .ok_or_else(|| Error::MissingField("sweep.step".into()))?
                / scale;
            Some(SweepSpec::new(
                start,
                stop,
                step,
                s.direction.unwrap_or(SweepDirection::Down),
            )?)
        }
    };

    Ok(ParsedConfig { params, sweep })
}

fn toml_error_with_line(text: &str, e: toml::de::Error) -> Error {
    let line = e
        .span()
        .map(|span| text[..span.start.min(text.len())].lines().count().max(1))
        .unwrap_or(1);
    Error::Parse {
        line,
        msg: e.message().to_string(),
    }
}

/// Load and validate a config file.
pub fn load_config(path: impl AsRef<Path>) -> Result<SystemParams> {
    Ok(load_config_full(path)?.params)
}

/// Load a config file, keeping the optional `[sweep]` section.
pub fn load_config_full(path: impl AsRef<Path>) -> Result<ParsedConfig> {
    let text = std::fs::read_to_string(path)?;
    parse_config(&text)
}

/// Serialise parameters (and optionally a sweep window) back to config
/// text. Round-trips through [`parse_config`] exactly: all frequencies are
/// written as ordinary Hz, no angular flags.
pub fn write_config(params: &SystemParams, sweep: Option<&SweepSpec>) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "[rates]");
    let _ = writeln!(s, "loading_rate = {:?}", params.loading_rate);
    let _ = writeln!(s, "loss_rate = {:?}", params.loss_rate);
    let _ = writeln!(s, "lasing_loss_rate = {:?}", params.lasing_loss_rate);
    let _ = writeln!(s, "\n[cavity]");
    let _ = writeln!(s, "coupling = {:?}", params.coupling);
    let _ = writeln!(s, "linewidth = {:?}", params.cavity_linewidth);
    let _ = writeln!(s, "atom_linewidth = {:?}", params.atom_linewidth);
    let _ = writeln!(s, "excited_fraction = {:?}", params.excited_fraction);
    let _ = writeln!(s, "\n[gain]");
    let _ = writeln!(s, "fwhm = {:?}", params.gain_fwhm);
    let _ = writeln!(s, "shift = {:?}", params.gain_shift);
    let _ = writeln!(s, "photons_per_atom = {:?}", params.photons_per_atom);
    let _ = writeln!(s, "temperature = {:?}", params.temperature);
    let _ = writeln!(s, "recoil_order = {:?}", params.recoil_order);
    for line in &params.pump_lines {
        let _ = writeln!(s, "\n[pumps.{}]", line.label);
        let _ = writeln!(s, "detuning = {:?}", line.detuning);
        let _ = writeln!(s, "weight = {:?}", line.weight);
    }
    if let Some(sw) = sweep {
        let _ = writeln!(s, "\n[sweep]");
        let _ = writeln!(s, "start = {:?}", sw.start);
        let _ = writeln!(s, "stop = {:?}", sw.stop);
        let _ = writeln!(s, "step = {:?}", sw.step);
        let dir = match sw.direction {
            SweepDirection::Up => "up",
            SweepDirection::Down => "down",
        };
        let _ = writeln!(s, "direction = \"{dir}\"");
    }
    s
}

/// Write a config file to disk.
pub fn save_config(
    path: impl AsRef<Path>,
    params: &SystemParams,
    sweep: Option<&SweepSpec>,
) -> Result<()> {
    std::fs::write(path, write_config(params, sweep))?;
    Ok(())
}

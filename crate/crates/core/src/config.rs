//! Scenario parameters and the flat `key = value` run-configuration format.
//!
//! Every key has a default taken from the reference simulation setup, so an
//! empty file is a valid configuration. Values may carry a unit suffix
//! (`200 MHz`, `1 ms`, `5e-6 mJ`); bare numbers are read in the unit named by
//! the key (`C_s_hz` in Hz, `T_pr_s` in seconds, and so on).

use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::experiments::{SweepSpec, SweepVariable};
use crate::model::WorkloadSpec;
use crate::problem::Mode;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("line {line}: key `{key}`: {msg}")]
    Value {
        line: usize,
        key: String,
        msg: String,
    },
    #[error("invalid scenario: {0}")]
    Invalid(String),
    #[error("cannot read {path}: {msg}")]
    Io { path: PathBuf, msg: String },
}

/// Radio and system parameters shared by every device in a scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub n_users: usize,
    pub cell_radius_m: f64,
    pub ref_distance_m: f64,
    pub pathloss_exp: f64,
    pub total_bandwidth_hz: f64,
    pub period_s: f64,
    pub server_period_s: f64,
    /// Server clock, cycles per second.
    pub server_capacity_hz: f64,
    pub capacity_fraction: f64,
    pub noise_density_mw_per_hz: f64,
    pub carrier_hz: f64,
    pub max_tx_power_w: Option<f64>,
    pub max_spectral_eff: f64,
    pub min_user_distance_m: f64,
    pub rb_quantization: bool,
    pub rng_seed: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            n_users: 50,
            cell_radius_m: 800.0,
            ref_distance_m: 200.0,
            pathloss_exp: 2.0,
            total_bandwidth_hz: 10e6,
            period_s: 20e-3,
            server_period_s: 1e-3,
            server_capacity_hz: 200e6,
            capacity_fraction: 1.0,
            noise_density_mw_per_hz: dbm_to_mw(-174.0),
            carrier_hz: 2e9,
            max_tx_power_w: Some(0.2),
            max_spectral_eff: 6.0,
            min_user_distance_m: 200.0,
            rb_quantization: false,
            rng_seed: 1,
        }
    }
}

pub fn dbm_to_mw(dbm: f64) -> f64 {
    10f64.powf(dbm / 10.0)
}

impl ScenarioConfig {
    /// Server cycles available per scheduling period, `fraction * C_s * T_pr`.
    pub fn capacity_cycles(&self) -> f64 {
        self.capacity_fraction * self.server_capacity_hz * self.server_period_s
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |msg: String| Err(ConfigError::Invalid(msg));
        let positive = [
            ("R_m", self.cell_radius_m),
            ("d0_m", self.ref_distance_m),
            ("BW_hz", self.total_bandwidth_hz),
            ("T_s", self.period_s),
            ("T_pr_s", self.server_period_s),
            ("C_s_hz", self.server_capacity_hz),
            ("N0", self.noise_density_mw_per_hz),
            ("carrier_hz", self.carrier_hz),
            ("max_spectral_eff", self.max_spectral_eff),
            ("beta", self.pathloss_exp),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("{name} must be positive and finite, got {v}"));
            }
        }
        if self.n_users == 0 {
            return bad("N_users must be at least 1".into());
        }
        if !(self.ref_distance_m <= self.min_user_distance_m
            && self.min_user_distance_m <= self.cell_radius_m)
        {
            return bad(format!(
                "need d0 <= min_distance <= R, got {} / {} / {}",
                self.ref_distance_m, self.min_user_distance_m, self.cell_radius_m
            ));
        }
        if self.server_period_s > self.period_s {
            return bad("T_pr_s must not exceed T_s".into());
        }
        if !(self.capacity_fraction > 0.0 && self.capacity_fraction <= 1.0) {
            return bad(format!(
                "capacity_fraction must lie in (0, 1], got {}",
                self.capacity_fraction
            ));
        }
        if let Some(p) = self.max_tx_power_w {
            if !(p > 0.0) {
                return bad("max_tx_power_w must be positive".into());
            }
        }
        if self.rb_quantization && crate::model::user_bandwidth(self) <= 0.0 {
            return bad("RB quantization leaves devices with zero bandwidth".into());
        }
        Ok(())
    }
}

/// Everything a CLI run needs.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub scenario: ScenarioConfig,
    pub workload: WorkloadSpec,
    pub sweep: Option<SweepSpec>,
    pub output_dir: PathBuf,
    pub emit_plots: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            scenario: ScenarioConfig::default(),
            workload: WorkloadSpec::default(),
            sweep: None,
            output_dir: PathBuf::from("out"),
            emit_plots: true,
        }
    }
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io {
            path: path.to_path_buf(),
            msg: e.to_string(),
        })?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = RunConfig::default();
        let mut sweep = SweepDraft::default();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let Some((key, value)) = content.split_once('=') else {
                return Err(ConfigError::Syntax {
                    line,
                    msg: format!("expected `key = value`, found `{content}`"),
                });
            };
            let key = key.trim();
            let value = value.trim();
            let err = |msg: String| ConfigError::Value {
                line,
                key: key.to_string(),
                msg,
            };
            cfg.apply(key, value, &mut sweep).map_err(err)?;
        }
        cfg.sweep = sweep.finish().map_err(ConfigError::Invalid)?;
        cfg.scenario.validate()?;
        cfg.workload
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        Ok(cfg)
    }

    fn apply(&mut self, key: &str, value: &str, sweep: &mut SweepDraft) -> Result<(), String> {
        let s = &mut self.scenario;
        let w = &mut self.workload;
        match key {
            "N_users" => s.n_users = parse_count(value)? as usize,
            "R_m" => s.cell_radius_m = parse_quantity(value, Dim::Length)?,
            "d0_m" => s.ref_distance_m = parse_quantity(value, Dim::Length)?,
            "min_distance_m" => s.min_user_distance_m = parse_quantity(value, Dim::Length)?,
            "beta" => s.pathloss_exp = parse_quantity(value, Dim::None)?,
            "BW_hz" => s.total_bandwidth_hz = parse_quantity(value, Dim::Frequency)?,
            "T_s" => s.period_s = parse_quantity(value, Dim::Time)?,
            "T_pr_s" => s.server_period_s = parse_quantity(value, Dim::Time)?,
            "C_s_hz" => s.server_capacity_hz = parse_quantity(value, Dim::Frequency)?,
            "capacity_fraction" => s.capacity_fraction = parse_fraction(value)?,
            "N0_dBm_hz" => s.noise_density_mw_per_hz = dbm_to_mw(parse_quantity(value, Dim::None)?),
            "carrier_hz" => s.carrier_hz = parse_quantity(value, Dim::Frequency)?,
            "max_tx_power_w" => {
                s.max_tx_power_w = match value {
                    "none" | "off" => None,
                    v => Some(parse_quantity(v, Dim::Power)?),
                }
            }
            "max_spectral_eff" => s.max_spectral_eff = parse_quantity(value, Dim::None)?,
            "rb_quantization" => s.rb_quantization = parse_bool(value)?,
            "seed" => {
                s.rng_seed = value
                    .parse()
                    .map_err(|_| format!("`{value}` is not an unsigned integer"))?
            }
            "L_blocks" => w.blocks = parse_count(value)?,
            "M_elements" => w.elements = parse_count(value)?,
            "S_bits" => w.bits_per_element = parse_count(value)?,
            "eps_mJ" => w.eps_dev_mj = parse_quantity(value, Dim::Energy)?,
            "eta_dev" => w.eta_dev = parse_quantity(value, Dim::None)?,
            "eta_srv" => w.eta_srv = parse_quantity(value, Dim::None)?,
            "complexity_exponent" => w.complexity_exponent = parse_quantity(value, Dim::None)?,
            "sweep_var" => sweep.variable = Some(value.parse()?),
            "sweep_values" => sweep.values = Some(parse_list(value)?),
            "sweep_modes" => {
                sweep.modes = Some(
                    value
                        .split(',')
                        .map(|m| m.trim().parse::<Mode>())
                        .collect::<Result<_, _>>()?,
                )
            }
            "sweep_cap_fractions" => {
                let fractions = parse_list(value)?;
                for f in &fractions {
                    if !(*f > 0.0 && *f <= 1.0) {
                        return Err(format!("capacity fraction {f} outside (0, 1]"));
                    }
                }
                sweep.capacity_fractions = Some(fractions)
            }
            "trials" => sweep.trials = Some(parse_count(value)? as usize),
            "output_dir" => self.output_dir = PathBuf::from(value),
            "emit_plots" => self.emit_plots = parse_bool(value)?,
            _ => return Err("unknown key".to_string()),
        }
        Ok(())
    }
}

#[derive(Default)]
struct SweepDraft {
    variable: Option<SweepVariable>,
    values: Option<Vec<f64>>,
    modes: Option<Vec<Mode>>,
    capacity_fractions: Option<Vec<f64>>,
    trials: Option<usize>,
}

impl SweepDraft {
    fn finish(self) -> Result<Option<SweepSpec>, String> {
        let Some(variable) = self.variable else {
            if self.values.is_some() {
                return Err("sweep_values given without sweep_var".into());
            }
            return Ok(None);
        };
        let mut spec = SweepSpec::defaults_for(variable);
        if let Some(v) = self.values {
            spec.values = v;
        }
        if let Some(m) = self.modes {
            spec.modes = m;
        }
        if let Some(c) = self.capacity_fractions {
            spec.capacity_fractions = c;
        }
        if let Some(t) = self.trials {
            spec.trials = t;
        }
        spec.validate().map_err(|e| e.to_string())?;
        Ok(Some(spec))
    }
}

#[derive(Clone, Copy)]
enum Dim {
    None,
    Length,
    Frequency,
    Time,
    Energy,
    Power,
}

fn parse_quantity(value: &str, dim: Dim) -> Result<f64, String> {
    let (number, unit) = match value.find(|c: char| c.is_ascii_alphabetic() && c != 'e' && c != 'E')
    {
        Some(pos) => (value[..pos].trim(), value[pos..].trim()),
        None => (value, ""),
    };
    let x: f64 = number
        .parse()
        .map_err(|_| format!("`{value}` is not a number"))?;
    let scale = match (dim, unit) {
        (_, "") => 1.0,
        (Dim::Length, "m") => 1.0,
        (Dim::Length, "km") => 1e3,
        (Dim::Frequency, "Hz") => 1.0,
        (Dim::Frequency, "kHz") => 1e3,
        (Dim::Frequency, "MHz") => 1e6,
        (Dim::Frequency, "GHz") => 1e9,
        (Dim::Time, "s") => 1.0,
        (Dim::Time, "ms") => 1e-3,
        (Dim::Time, "us") => 1e-6,
        (Dim::Energy, "mJ") => 1.0,
        (Dim::Energy, "J") => 1e3,
        (Dim::Energy, "uJ") => 1e-3,
        (Dim::Power, "W") => 1.0,
        (Dim::Power, "mW") => 1e-3,
        (_, u) => return Err(format!("unit `{u}` not accepted here")),
    };
    let v = x * scale;
    if !v.is_finite() {
        return Err(format!("`{value}` is not finite"));
    }
    Ok(v)
}

fn parse_count(value: &str) -> Result<u64, String> {
    value
        .parse::<u64>()
        .map_err(|_| format!("`{value}` is not a non-negative integer"))
}

fn parse_fraction(value: &str) -> Result<f64, String> {
    let x = parse_quantity(value.trim_end_matches('%').trim(), Dim::None)?;
    let x = if value.ends_with('%') { x / 100.0 } else { x };
    Ok(x)
}

fn parse_bool(value: &str) -> Result<bool, String> {
    match value {
        "true" | "yes" | "on" | "1" => Ok(true),
        "false" | "no" | "off" | "0" => Ok(false),
        _ => Err(format!("`{value}` is not a boolean")),
    }
}

/// Comma-separated numbers, or an inclusive range `start:step:end`.
fn parse_list(value: &str) -> Result<Vec<f64>, String> {
    if value.contains(':') {
        let parts: Vec<f64> = value
            .split(':')
            .map(|p| {
                p.trim()
                    .parse::<f64>()
                    .map_err(|_| format!("bad range `{value}`"))
            })
            .collect::<Result<_, _>>()?;
        let [start, step, end] = parts[..] else {
            return Err(format!("range `{value}` must be start:step:end"));
        };
        if !(step > 0.0) || end < start {
            return Err(format!(
                "range `{value}` is empty or has a non-positive step"
            ));
        }
        let n = ((end - start) / step + 1e-9).floor() as usize;
        // Round to the step's decimal grid so 2.0:0.2:4.0 yields 2.2, not 2.2000000000000002.
        return Ok((0..=n)
            .map(|k| {
                let v = start + k as f64 * step;
                (v * 1e9).round() / 1e9
            })
            .collect());
    }
    value
        .split(',')
        .map(|p| {
            let p = p.trim();
            p.parse::<f64>()
                .map_err(|_| format!("`{p}` is not a number"))
        })
        .collect()
}

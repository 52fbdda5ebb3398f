//! Problem and solution types shared by the solvers and the oracles.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::model::{breakdown, EnergyBreakdown, UserInstance};

/// Offloading granularity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Mode {
    /// State-less: any fraction in `[0, 1]`.
    StateLess,
    /// State-full: all or nothing.
    StateFull,
}

impl Mode {
    pub fn tag(self) -> &'static str {
        match self {
            Mode::StateLess => "SL",
            Mode::StateFull => "SF",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "SL" | "sl" => Ok(Mode::StateLess),
            "SF" | "sf" => Ok(Mode::StateFull),
            other => Err(format!("unknown mode `{other}` (expected SL or SF)")),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProblemError {
    #[error("problem has no users")]
    NoUsers,
    #[error("server capacity must be positive, got {0}")]
    Capacity(f64),
    #[error("user {0} has no server load")]
    ServerLoad(usize),
}

/// N devices competing for one server-capacity budget.
#[derive(Debug, Clone, PartialEq)]
pub struct Problem {
    pub users: Vec<UserInstance>,
    /// Server cycles per scheduling period.
    pub capacity: f64,
    pub mode: Mode,
}

impl Problem {
    pub fn new(users: Vec<UserInstance>, capacity: f64, mode: Mode) -> Result<Self, ProblemError> {
        if users.is_empty() {
            return Err(ProblemError::NoUsers);
        }
        if !(capacity > 0.0 && capacity.is_finite()) {
            return Err(ProblemError::Capacity(capacity));
        }
        if let Some(u) = users.iter().find(|u| !(u.server_load > 0.0)) {
            return Err(ProblemError::ServerLoad(u.id));
        }
        Ok(Self {
            users,
            capacity,
            mode,
        })
    }

    pub fn with_mode(&self, mode: Mode) -> Self {
        Self {
            mode,
            ..self.clone()
        }
    }

    /// Server cycles consumed by an offloading vector.
    pub fn load(&self, alpha: &[f64]) -> f64 {
        self.users
            .iter()
            .zip(alpha)
            .map(|(u, a)| a * u.server_load)
            .sum()
    }

    /// Server cycles if every device offloaded everything.
    pub fn total_demand(&self) -> f64 {
        self.users.iter().map(|u| u.server_load).sum()
    }
}

/// Which KKT case a device's solution falls in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Regime {
    /// Offloading while the server capacity binds (`nu > 0`).
    FullLoad,
    /// Offloading with spare server capacity (`nu = 0`).
    Underloaded,
    NoOffload,
    /// Held at the spectral-efficiency cap.
    ClampedRate,
    /// Held at the transmit-power cap.
    ClampedPower,
}

impl Regime {
    pub fn tag(self) -> &'static str {
        match self {
            Regime::FullLoad => "FULL_LOAD",
            Regime::Underloaded => "UNDERLOADED",
            Regime::NoOffload => "NO_OFFLOAD",
            Regime::ClampedRate => "CLAMPED_RATE",
            Regime::ClampedPower => "CLAMPED_POWER",
        }
    }
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OffloadSolution {
    pub mode: Mode,
    pub alpha: Vec<f64>,
    /// Price of one server cycle.
    pub nu: f64,
    pub regimes: Vec<Regime>,
    pub energies: Vec<EnergyBreakdown>,
    pub objective: f64,
    /// `capacity - load`.
    pub slack: f64,
    pub iterations: usize,
    /// False when an iterative search ran out of iterations.
    pub converged: bool,
}

impl OffloadSolution {
    /// Evaluates energies, objective and slack for a fixed offloading vector.
    pub fn assemble(p: &Problem, alpha: Vec<f64>, nu: f64, regimes: Vec<Regime>) -> Self {
        let energies: Vec<EnergyBreakdown> = p
            .users
            .iter()
            .zip(&alpha)
            .map(|(u, &a)| breakdown(u, a))
            .collect();
        let objective = energies.iter().map(|e| e.total).sum();
        let slack = p.capacity - p.load(&alpha);
        Self {
            mode: p.mode,
            alpha,
            nu,
            regimes,
            energies,
            objective,
            slack,
            iterations: 0,
            converged: true,
        }
    }
}

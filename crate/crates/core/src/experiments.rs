//! Monte-Carlo scenarios and parameter sweeps.
//!
//! Each trial draws one set of device distances from its own RNG stream and
//! reuses it for every sweep value, mode and capacity fraction, so all curves
//! of a sweep are paired comparisons over the same placements.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::config::ScenarioConfig;
use crate::model::{UserInstance, WorkloadSpec};
use crate::optimizer;
use crate::problem::{Mode, OffloadSolution, Problem, ProblemError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExperimentError {
    #[error("invalid sweep: {0}")]
    InvalidSweep(String),
    #[error("{variable} = {value}: {source}")]
    Problem {
        variable: SweepVariable,
        value: f64,
        source: ProblemError,
    },
    #[error("{variable} = {value}, {mode}, capacity {fraction}, trial {trial}: price search did not converge")]
    NotConverged {
        variable: SweepVariable,
        value: f64,
        mode: Mode,
        fraction: f64,
        trial: usize,
    },
    #[error("{variable} = {value}: {msg}")]
    Scenario {
        variable: SweepVariable,
        value: f64,
        msg: String,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SweepVariable {
    PathlossBeta,
    DataElements,
}

impl SweepVariable {
    pub fn name(self) -> &'static str {
        match self {
            SweepVariable::PathlossBeta => "beta",
            SweepVariable::DataElements => "M",
        }
    }
}

impl fmt::Display for SweepVariable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SweepVariable {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "beta" | "pathloss_beta" => Ok(SweepVariable::PathlossBeta),
            "M" | "data_elements_M" | "M_elements" => Ok(SweepVariable::DataElements),
            other => Err(format!(
                "unknown sweep variable `{other}` (expected beta or M)"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub variable: SweepVariable,
    pub values: Vec<f64>,
    pub trials: usize,
    pub modes: Vec<Mode>,
    pub capacity_fractions: Vec<f64>,
}

impl SweepSpec {
    pub const DEFAULT_TRIALS: usize = 100;

    /// Grid, modes and capacity fractions of the reference figures.
    pub fn defaults_for(variable: SweepVariable) -> Self {
        let values = match variable {
            SweepVariable::PathlossBeta => (0..=10).map(|k| (20 + 2 * k) as f64 / 10.0).collect(),
            SweepVariable::DataElements => (1..=15).map(|k| (20 * k) as f64).collect(),
        };
        Self {
            variable,
            values,
            trials: Self::DEFAULT_TRIALS,
            modes: vec![Mode::StateLess, Mode::StateFull],
            capacity_fractions: vec![1.0, 0.1],
        }
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        let bad = |m: &str| Err(ExperimentError::InvalidSweep(m.to_string()));
        if self.values.is_empty() {
            return bad("no sweep values");
        }
        if self.values.windows(2).any(|w| !(w[0] < w[1])) {
            return bad("sweep values must be strictly increasing");
        }
        if self.trials == 0 {
            return bad("trials must be at least 1");
        }
        if self.modes.is_empty() {
            return bad("no modes selected");
        }
        if self.capacity_fractions.is_empty()
            || self
                .capacity_fractions
                .iter()
                .any(|f| !(*f > 0.0 && *f <= 1.0))
        {
            return bad("capacity fractions must be non-empty and lie in (0, 1]");
        }
        if self.variable == SweepVariable::DataElements
            && self.values.iter().any(|v| !(*v >= 1.0) || v.fract() != 0.0)
        {
            return bad("M values must be positive integers");
        }
        Ok(())
    }
}

/// Metrics of one (value, mode, capacity fraction) point, averaged over trials.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRecord {
    pub variable: SweepVariable,
    pub value: f64,
    pub mode: Mode,
    pub capacity_fraction: f64,
    pub lambda: f64,
    pub e_sum_opt: f64,
    pub e_sum_none: f64,
    pub e_sum_all: f64,
    pub nu_mean: f64,
    pub trials: usize,
}

/// RNG for trial `trial` of a run seeded with `seed`; trials get disjoint streams.
pub fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

/// Area-uniform distances on the annulus `[min_user_distance, R]`.
pub fn sample_distances<R: Rng>(cfg: &ScenarioConfig, rng: &mut R) -> Vec<f64> {
    let inner = cfg.min_user_distance_m.powi(2);
    let outer = cfg.cell_radius_m.powi(2);
    (0..cfg.n_users)
        .map(|_| {
            let u: f64 = rng.gen();
            (inner + u * (outer - inner)).sqrt()
        })
        .collect()
}

pub fn users_at(distances: &[f64], cfg: &ScenarioConfig, w: &WorkloadSpec) -> Vec<UserInstance> {
    distances
        .iter()
        .enumerate()
        .map(|(i, &d)| UserInstance::new(i, d, cfg, w))
        .collect()
}

/// One placement drawn from the config's seed.
pub fn place_users(cfg: &ScenarioConfig, w: &WorkloadSpec) -> Vec<UserInstance> {
    let mut rng = trial_rng(cfg.rng_seed, 0);
    users_at(&sample_distances(cfg, &mut rng), cfg, w)
}

/// Data-weighted share of offloaded processing.
pub fn compute_lambda(users: &[UserInstance], alpha: &[f64]) -> f64 {
    let total: f64 = users.iter().map(|u| u.data_bits).sum();
    if total <= 0.0 {
        return 0.0;
    }
    let offloaded: f64 = users.iter().zip(alpha).map(|(u, a)| a * u.data_bits).sum();
    offloaded / total
}

/// Total energy with nobody offloading.
pub fn e_sum_none(users: &[UserInstance]) -> f64 {
    users.iter().map(|u| u.local_energy_mj).sum()
}

/// Total energy with everybody offloading everything, caps ignored.
pub fn e_sum_all(users: &[UserInstance]) -> f64 {
    users.iter().map(|u| u.tx_energy_mj(1.0)).sum()
}

/// Scenario and workload for one sweep value.
pub fn apply_sweep_value(
    variable: SweepVariable,
    value: f64,
    cfg: &ScenarioConfig,
    w: &WorkloadSpec,
) -> (ScenarioConfig, WorkloadSpec) {
    let mut cfg = cfg.clone();
    let mut w = w.clone();
    match variable {
        SweepVariable::PathlossBeta => cfg.pathloss_exp = value,
        SweepVariable::DataElements => w.elements = value as u64,
    }
    (cfg, w)
}

#[derive(Debug, Clone, PartialEq)]
struct TrialPoint {
    lambda: f64,
    e_opt: f64,
    nu: f64,
}

/// Solves one placement at one sweep value for every mode and fraction.
///
/// Output order is mode-major, then capacity fraction.
fn run_trial_point(
    spec: &SweepSpec,
    value: f64,
    cfg: &ScenarioConfig,
    w: &WorkloadSpec,
    distances: &[f64],
    trial: usize,
) -> Result<(f64, f64, Vec<TrialPoint>), ExperimentError> {
    let users = users_at(distances, cfg, w);
    let none = e_sum_none(&users);
    let all = e_sum_all(&users);
    let mut points = Vec::with_capacity(spec.modes.len() * spec.capacity_fractions.len());
    for &mode in &spec.modes {
        for &fraction in &spec.capacity_fractions {
            let capacity = fraction * cfg.server_capacity_hz * cfg.server_period_s;
            let p = Problem::new(users.clone(), capacity, mode).map_err(|source| {
                ExperimentError::Problem {
                    variable: spec.variable,
                    value,
                    source,
                }
            })?;
            let s: OffloadSolution = optimizer::solve(&p);
            if !s.converged {
                return Err(ExperimentError::NotConverged {
                    variable: spec.variable,
                    value,
                    mode,
                    fraction,
                    trial,
                });
            }
            points.push(TrialPoint {
                lambda: compute_lambda(&users, &s.alpha),
                e_opt: s.objective,
                nu: s.nu,
            });
        }
    }
    Ok((none, all, points))
}

/// Runs every (value, mode, capacity fraction) combination over `spec.trials`
/// placements and averages the metrics.
///
/// Records are ordered by sweep value, then mode, then capacity fraction.
pub fn run_sweep(
    spec: &SweepSpec,
    cfg: &ScenarioConfig,
    w: &WorkloadSpec,
) -> Result<Vec<SweepRecord>, ExperimentError> {
    spec.validate()?;
    let placements: Vec<Vec<f64>> = (0..spec.trials)
        .map(|t| sample_distances(cfg, &mut trial_rng(cfg.rng_seed, t as u64)))
        .collect();

    let per_value: Vec<Vec<SweepRecord>> = spec
        .values
        .par_iter()
        .map(|&value| {
            let (cfg_v, w_v) = apply_sweep_value(spec.variable, value, cfg, w);
            cfg_v.validate().map_err(|e| ExperimentError::Scenario {
                variable: spec.variable,
                value,
                msg: e.to_string(),
            })?;
            w_v.validate().map_err(|e| ExperimentError::Scenario {
                variable: spec.variable,
                value,
                msg: e.to_string(),
            })?;
            let trials: Vec<(f64, f64, Vec<TrialPoint>)> = placements
                .par_iter()
                .enumerate()
                .map(|(t, d)| run_trial_point(spec, value, &cfg_v, &w_v, d, t))
                .collect::<Result<_, _>>()?;
            Ok(aggregate(spec, value, &trials))
        })
        .collect::<Result<_, ExperimentError>>()?;
    Ok(per_value.into_iter().flatten().collect())
}

fn aggregate(
    spec: &SweepSpec,
    value: f64,
    trials: &[(f64, f64, Vec<TrialPoint>)],
) -> Vec<SweepRecord> {
    let n = trials.len() as f64;
    // Sequential sums in trial order keep the result independent of scheduling.
    let none = trials.iter().map(|t| t.0).sum::<f64>() / n;
    let all = trials.iter().map(|t| t.1).sum::<f64>() / n;
    let mut out = Vec::new();
    let mut slot = 0;
    for &mode in &spec.modes {
        for &fraction in &spec.capacity_fractions {
            let mean =
                |f: fn(&TrialPoint) -> f64| trials.iter().map(|t| f(&t.2[slot])).sum::<f64>() / n;
            out.push(SweepRecord {
                variable: spec.variable,
                value,
                mode,
                capacity_fraction: fraction,
                lambda: mean(|p| p.lambda),
                e_sum_opt: mean(|p| p.e_opt),
                e_sum_none: none,
                e_sum_all: all,
                nu_mean: mean(|p| p.nu),
                trials: trials.len(),
            });
            slot += 1;
        }
    }
    out
}

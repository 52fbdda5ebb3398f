//! Randomised oracle-equivalence and KKT checks.
//!
//! The generators here are shared by the `validate` subcommand and the test
//! suites; each takes an explicit RNG so runs are reproducible.

use rand::Rng;

use crate::config::{dbm_to_mw, ScenarioConfig};
use crate::experiments::{sample_distances, trial_rng, users_at};
use crate::model::{UserInstance, WorkloadSpec};
use crate::optimizer::{kkt_check, solution_at_price, solve_sf, solve_sl};
use crate::oracle::{
    grid_oracle_sl, scalar_oracle_sl, subset_oracle_sf, OracleError, MAX_SUBSET_USERS,
};
use crate::problem::{Mode, Problem};

/// Server cycles of one device in the reference workload.
const REF_LOAD: f64 = 600.0;
const REF_LOCAL_ENERGY: f64 = 0.3;

/// A device whose unconstrained optimum is `t` (before clamping to the box).
fn constants_user<R: Rng>(
    rng: &mut R,
    id: usize,
    load: f64,
    rate_range: (f64, f64),
) -> UserInstance {
    let rate = rng.gen_range(rate_range.0..rate_range.1);
    let local = REF_LOCAL_ENERGY * rng.gen_range(0.5..2.0);
    let t: f64 = rng.gen_range(-0.3..1.5);
    let k = local / (t * rate).exp2();
    let alpha_max = if rng.gen_bool(0.2) {
        rng.gen_range(50..100) as f64 / 100.0
    } else {
        1.0
    };
    UserInstance::from_constants(id, local, k, rate, load, alpha_max)
}

/// State-less instance with `n` devices of equal server load and a capacity on
/// the 0.01 grid of that load, so a 0.01 grid can meet the constraint exactly.
pub fn random_sl_instance<R: Rng>(rng: &mut R, n: usize) -> Problem {
    let users = (0..n)
        .map(|i| constants_user(rng, i, REF_LOAD, (0.2, 2.0)))
        .collect();
    let steps = rng.gen_range(1..=100 * n);
    Problem::new(users, REF_LOAD * steps as f64 / 100.0, Mode::StateLess).expect("valid instance")
}

/// A single device for the unconstrained scalar check.
pub fn random_single_user<R: Rng>(rng: &mut R) -> UserInstance {
    constants_user(rng, 0, REF_LOAD, (0.2, 6.0))
}

/// State-full instance; all devices share one server load when `homogeneous`.
pub fn random_sf_instance<R: Rng>(rng: &mut R, n: usize, homogeneous: bool) -> Problem {
    let users = (0..n)
        .map(|i| {
            let load = if homogeneous {
                REF_LOAD
            } else {
                REF_LOAD * rng.gen_range(0.2..3.0)
            };
            constants_user(rng, i, load, (0.2, 6.0))
        })
        .collect::<Vec<_>>();
    let demand: f64 = users.iter().map(|u| u.server_load).sum();
    let capacity = demand * rng.gen_range(0.05..1.1);
    Problem::new(users, capacity, Mode::StateFull).expect("valid instance")
}

/// Placed devices under a randomised radio scenario, spanning every KKT regime.
pub fn random_physical_instance<R: Rng>(rng: &mut R) -> Problem {
    let n_users = rng.gen_range(1..=60);
    let cfg = ScenarioConfig {
        n_users,
        pathloss_exp: rng.gen_range(2.0..5.0),
        noise_density_mw_per_hz: dbm_to_mw(rng.gen_range(-174.0..-125.0)),
        capacity_fraction: rng.gen_range(0.02..1.0),
        max_tx_power_w: match rng.gen_range(0..3) {
            0 => None,
            1 => Some(0.2),
            _ => Some(10f64.powf(rng.gen_range(-6.0..-1.0))),
        },
        rng_seed: rng.gen(),
        ..ScenarioConfig::default()
    };
    let w = WorkloadSpec {
        elements: rng.gen_range(20..=400),
        ..WorkloadSpec::default()
    };
    let distances = sample_distances(&cfg, rng);
    let users = users_at(&distances, &cfg, &w);
    Problem::new(users, cfg.capacity_cycles(), Mode::StateLess).expect("valid instance")
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationOptions {
    pub seed: u64,
    pub sl_instances: usize,
    pub scalar_instances: usize,
    pub sf_instances: usize,
    pub sf_max_users: usize,
    pub kkt_instances: usize,
    /// Relative upward perturbation of the price, for fault injection.
    pub perturb_nu: Option<f64>,
}

impl Default for ValidationOptions {
    fn default() -> Self {
        Self {
            seed: 1,
            sl_instances: 50,
            scalar_instances: 1000,
            sf_instances: 100,
            sf_max_users: 12,
            kkt_instances: 200,
            perturb_nu: None,
        }
    }
}

fn rel_gap(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

pub fn run_suite(opts: &ValidationOptions) -> Result<Vec<CheckResult>, OracleError> {
    if opts.sf_max_users > MAX_SUBSET_USERS {
        return Err(OracleError::TooManyUsers(opts.sf_max_users));
    }
    let mut results = Vec::new();

    let mut rng = trial_rng(opts.seed, 1);
    let mut worst = 0.0f64;
    for _ in 0..opts.sl_instances {
        let n = rng.gen_range(1..=3);
        let p = random_sl_instance(&mut rng, n);
        let solver = solve_sl(&p).expect("SL problem");
        let grid = grid_oracle_sl(&p, 0.01)?;
        worst = worst.max(rel_gap(solver.objective, grid.objective));
    }
    results.push(CheckResult {
        name: "SL objective vs 0.01 grid oracle".into(),
        passed: worst <= 1e-4,
        detail: format!(
            "{} instances, worst relative gap {worst:.3e} (tol 1e-4)",
            opts.sl_instances
        ),
    });

    let mut rng = trial_rng(opts.seed, 2);
    let cfg = ScenarioConfig::default();
    let mut worst = 0.0f64;
    for _ in 0..opts.scalar_instances {
        let u = random_single_user(&mut rng);
        let analytic = crate::optimizer::alpha_given_nu(&u, 0.0);
        worst = worst.max((analytic - scalar_oracle_sl(&u, &cfg)).abs());
    }
    results.push(CheckResult {
        name: "closed-form fraction vs golden-section oracle".into(),
        passed: worst <= 1e-7,
        detail: format!(
            "{} devices, worst abs gap {worst:.3e} (tol 1e-7)",
            opts.scalar_instances
        ),
    });

    let mut rng = trial_rng(opts.seed, 3);
    let mut worst = 0.0f64;
    for _ in 0..opts.sf_instances {
        let n = rng.gen_range(1..=opts.sf_max_users.max(1));
        let p = random_sf_instance(&mut rng, n, true);
        let greedy = solve_sf(&p).expect("SF problem");
        let exact = subset_oracle_sf(&p)?;
        worst = worst.max(rel_gap(greedy.objective, exact.objective));
    }
    results.push(CheckResult {
        name: "SF greedy vs subset oracle (equal loads)".into(),
        passed: worst <= 1e-9,
        detail: format!(
            "{} instances, worst relative gap {worst:.3e} (tol 1e-9)",
            opts.sf_instances
        ),
    });

    let mut rng = trial_rng(opts.seed, 4);
    let mut violations = 0;
    let mut worst_ratio = 0.0f64;
    for _ in 0..opts.sf_instances {
        let n = rng.gen_range(1..=opts.sf_max_users.max(1));
        let p = random_sf_instance(&mut rng, n, false);
        let greedy = solve_sf(&p).expect("SF problem");
        let exact = subset_oracle_sf(&p)?;
        let max_saving = p
            .users
            .iter()
            .map(|u| u.local_energy_mj - u.tx_energy_mj(1.0))
            .fold(0.0, f64::max);
        let gap = greedy.objective - exact.objective;
        if gap > max_saving + 1e-12 || gap < -1e-12 * exact.objective {
            violations += 1;
        }
        if max_saving > 0.0 {
            worst_ratio = worst_ratio.max(gap / max_saving);
        }
    }
    results.push(CheckResult {
        name: "SF greedy gap within one device's saving (mixed loads)".into(),
        passed: violations == 0,
        detail: format!(
            "{} instances, {violations} violations, worst gap / max saving {worst_ratio:.3}",
            opts.sf_instances
        ),
    });

    let mut rng = trial_rng(opts.seed, 5);
    let mut failures = Vec::new();
    for i in 0..opts.kkt_instances {
        let p = random_physical_instance(&mut rng);
        let mut s = solve_sl(&p).expect("SL problem");
        if let Some(delta) = opts.perturb_nu {
            if s.nu > 0.0 {
                s = solution_at_price(&p, s.nu * (1.0 + delta));
            }
        }
        let report = kkt_check(&p, &s);
        if !report.passed || !s.converged {
            failures.push(format!("instance {i}: {}", report.failures().join("; ")));
        }
    }
    results.push(CheckResult {
        name: "KKT conditions of SL solutions".into(),
        passed: failures.is_empty(),
        detail: if failures.is_empty() {
            format!("{} instances", opts.kkt_instances)
        } else {
            format!(
                "{} of {} instances failed; first: {}",
                failures.len(),
                opts.kkt_instances,
                failures[0]
            )
        },
    });

    Ok(results)
}

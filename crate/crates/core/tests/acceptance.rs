//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs without the libtest harness so every line is printed; exits non-zero
//! if any criterion fails.

use std::time::{Duration, Instant};

use edge_offload::config::ScenarioConfig;
use edge_offload::experiments::{run_sweep, trial_rng, SweepRecord, SweepSpec, SweepVariable};
use edge_offload::optimizer::{alpha_given_nu, kkt_check, solve_sf, solve_sl};
use edge_offload::oracle::{grid_oracle_sl, scalar_oracle_sl, subset_oracle_sf};
use edge_offload::validation::{
    random_physical_instance, random_sf_instance, random_single_user, random_sl_instance,
};
use edge_offload::{Mode, WorkloadSpec};
use rand::Rng;

const SEED: u64 = 20_240_601;

struct Outcome {
    passed: bool,
    detail: String,
}

impl Outcome {
    fn new(passed: bool, detail: impl Into<String>) -> Self {
        Self {
            passed,
            detail: detail.into(),
        }
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

fn secs(d: Duration) -> f64 {
    d.as_secs_f64()
}

fn sweep(
    variable: SweepVariable,
    values: Vec<f64>,
    modes: Vec<Mode>,
    fractions: Vec<f64>,
    trials: usize,
) -> Vec<SweepRecord> {
    let spec = SweepSpec {
        variable,
        values,
        trials,
        modes,
        capacity_fractions: fractions,
    };
    run_sweep(&spec, &ScenarioConfig::default(), &WorkloadSpec::default()).expect("sweep runs")
}

fn select(records: &[SweepRecord], mode: Mode, fraction: f64) -> Vec<&SweepRecord> {
    records
        .iter()
        .filter(|r| r.mode == mode && r.capacity_fraction == fraction)
        .collect()
}

fn baseline_local_energy() -> Outcome {
    let start = Instant::now();
    let rec = sweep(
        SweepVariable::PathlossBeta,
        vec![2.0],
        vec![Mode::StateLess],
        vec![1.0],
        100,
    );
    let elapsed = start.elapsed();
    let e = rec[0].e_sum_none;
    let err = rel(e, 15.0);
    Outcome::new(
        err <= 1e-12 && elapsed < Duration::from_secs(1),
        format!(
            "E_sum_none = {e:.15} mJ, rel err {err:.2e} (tol 1e-12), {:.3} s (limit 1 s)",
            secs(elapsed)
        ),
    )
}

fn linear_in_elements() -> Outcome {
    let values: Vec<f64> = (1..=15).map(|k| (20 * k) as f64).collect();
    let rec = sweep(
        SweepVariable::DataElements,
        values,
        vec![Mode::StateLess],
        vec![1.0],
        10,
    );
    let worst = rec
        .iter()
        .map(|r| rel(r.e_sum_none, 0.25 * r.value))
        .fold(0.0, f64::max);
    Outcome::new(
        worst <= 1e-12,
        format!(
            "M = 20..300: {:.1} .. {:.1} mJ, worst rel err {worst:.2e} (tol 1e-12)",
            rec[0].e_sum_none,
            rec[rec.len() - 1].e_sum_none
        ),
    )
}

fn capacity_plateau() -> Outcome {
    let start = Instant::now();
    let spec = SweepSpec::defaults_for(SweepVariable::PathlossBeta);
    let rec =
        run_sweep(&spec, &ScenarioConfig::default(), &WorkloadSpec::default()).expect("sweep runs");
    let elapsed = start.elapsed();
    let cfg = ScenarioConfig::default();
    let w = WorkloadSpec::default();
    let plateau = 0.1 * cfg.capacity_cycles() / (cfg.n_users as f64 * w.server_load());
    let sl = select(&rec, Mode::StateLess, 0.1);
    let at_two = sl
        .iter()
        .find(|r| r.value == 2.0)
        .expect("beta = 2 in grid")
        .lambda;
    let max_lambda = rec
        .iter()
        .filter(|r| r.capacity_fraction == 0.1)
        .map(|r| r.lambda)
        .fold(0.0, f64::max);
    let ok = (at_two - plateau).abs() <= 1e-3
        && max_lambda <= plateau + 1e-9
        && elapsed < Duration::from_secs(10);
    Outcome::new(
        ok,
        format!(
            "Lambda(beta=2, SL, 10%) = {at_two:.9} vs {plateau:.9} (tol 1e-3), max over sweep {max_lambda:.9}, \
             full sweep ({} trials) {:.2} s (limit 10 s)",
            spec.trials,
            secs(elapsed)
        ),
    )
}

fn full_offload_regime() -> Outcome {
    let mut problems = Vec::new();
    let spec = SweepSpec::defaults_for(SweepVariable::PathlossBeta);
    let rec =
        run_sweep(&spec, &ScenarioConfig::default(), &WorkloadSpec::default()).expect("sweep runs");

    for mode in [Mode::StateLess, Mode::StateFull] {
        for r in select(&rec, mode, 1.0) {
            if r.value <= 2.2 + 1e-12 && r.lambda != 1.0 {
                problems.push(format!("{mode} beta={}: Lambda = {}", r.value, r.lambda));
            }
        }
    }

    // Shape properties on the default grid and on an extended one that reaches
    // the regime where offloading no longer pays.
    let mut extended: Vec<f64> = spec.values.clone();
    extended.extend((5..=60).map(f64::from));
    let ext = sweep(
        SweepVariable::PathlossBeta,
        extended,
        vec![Mode::StateLess, Mode::StateFull],
        vec![1.0],
        spec.trials,
    );
    for mode in [Mode::StateLess, Mode::StateFull] {
        let series = select(&ext, mode, 1.0);
        for pair in series.windows(2) {
            if pair[1].lambda > pair[0].lambda + 1e-12 {
                problems.push(format!(
                    "{mode}: Lambda rises from beta={} to {}",
                    pair[0].value, pair[1].value
                ));
            }
        }
        for r in &series {
            if r.e_sum_opt > r.e_sum_none.min(r.e_sum_all) * (1.0 + 1e-12) {
                problems.push(format!(
                    "{mode} beta={}: E_opt above both baselines",
                    r.value
                ));
            }
        }
    }
    let sl = select(&ext, Mode::StateLess, 1.0);
    for pair in sl.windows(2) {
        if pair[1].e_sum_all.partial_cmp(&pair[0].e_sum_all) != Some(std::cmp::Ordering::Greater) {
            problems.push(format!(
                "E_sum_all not increasing at beta={}",
                pair[1].value
            ));
        }
    }
    // Convexity on the uniformly spaced part of each grid.
    for run in [&sl[..11], &sl[11..]] {
        for t in run.windows(3) {
            if t[2].e_sum_all - 2.0 * t[1].e_sum_all + t[0].e_sum_all < -1e-12 * t[1].e_sum_all {
                problems.push(format!("E_sum_all not convex at beta={}", t[1].value));
            }
        }
    }

    let gap_detail = match sl.iter().rev().find(|r| r.lambda < 0.05) {
        Some(r) => {
            let gap = (r.e_sum_none - r.e_sum_opt) / r.e_sum_none;
            if gap >= 0.05 {
                problems.push(format!("gap {gap:.3} at beta={}", r.value));
            }
            format!(
                "largest beta with Lambda < 0.05 is {} (Lambda {:.4}, gap {:.2}%)",
                r.value,
                r.lambda,
                100.0 * gap
            )
        }
        None => {
            problems.push("Lambda never drops below 0.05".into());
            "Lambda never below 0.05".into()
        }
    };
    let detail = if problems.is_empty() {
        format!("Lambda = 1 for beta <= 2.2 (SL, SF); shapes hold at full capacity on beta in [2, 60]; {gap_detail}")
    } else {
        format!("{}; {gap_detail}", problems.join("; "))
    };
    Outcome::new(problems.is_empty(), detail)
}

fn sl_oracle_equivalence() -> Outcome {
    let start = Instant::now();
    let mut rng = trial_rng(SEED, 1);
    let instances = 200;
    let mut worst_grid = 0.0f64;
    for _ in 0..instances {
        let n = rng.gen_range(1..=3);
        let p = random_sl_instance(&mut rng, n);
        let s = solve_sl(&p).expect("SL problem");
        let g = grid_oracle_sl(&p, 0.01).expect("grid fits the budget");
        worst_grid = worst_grid.max(rel(s.objective, g.objective));
    }
    let singles = 1000;
    let cfg = ScenarioConfig::default();
    let mut worst_scalar = 0.0f64;
    for _ in 0..singles {
        let u = random_single_user(&mut rng);
        worst_scalar =
            worst_scalar.max((alpha_given_nu(&u, 0.0) - scalar_oracle_sl(&u, &cfg)).abs());
    }
    let elapsed = start.elapsed();
    Outcome::new(
        worst_grid <= 1e-4 && worst_scalar <= 1e-7 && elapsed < Duration::from_secs(120),
        format!(
            "{instances} grid instances worst rel gap {worst_grid:.2e} (tol 1e-4); {singles} devices worst \
             alpha gap {worst_scalar:.2e} (tol 1e-7); {:.1} s (limit 120 s)",
            secs(elapsed)
        ),
    )
}

fn sf_oracle_equivalence() -> Outcome {
    let mut rng = trial_rng(SEED, 2);
    let instances = 200;
    let mut worst = 0.0f64;
    for _ in 0..instances {
        let n = rng.gen_range(1..=12);
        let p = random_sf_instance(&mut rng, n, true);
        let greedy = solve_sf(&p).expect("SF problem");
        let exact = subset_oracle_sf(&p).expect("small instance");
        worst = worst.max(rel(greedy.objective, exact.objective));
    }
    let mut violations = 0;
    let mut worst_ratio = 0.0f64;
    let mut worst_gap = 0.0f64;
    for _ in 0..instances {
        let n = rng.gen_range(1..=12);
        let p = random_sf_instance(&mut rng, n, false);
        let greedy = solve_sf(&p).expect("SF problem");
        let exact = subset_oracle_sf(&p).expect("small instance");
        let max_saving = p
            .users
            .iter()
            .map(|u| u.local_energy_mj - u.tx_energy_mj(1.0))
            .fold(0.0, f64::max);
        let gap = greedy.objective - exact.objective;
        if gap > max_saving + 1e-12 {
            violations += 1;
        }
        worst_gap = worst_gap.max(gap);
        if max_saving > 0.0 {
            worst_ratio = worst_ratio.max(gap / max_saving);
        }
    }
    Outcome::new(
        worst <= 1e-9 && violations == 0,
        format!(
            "{instances} equal-load instances worst rel gap {worst:.2e} (tol 1e-9); {instances} mixed-load \
             instances worst gap {worst_gap:.3e} mJ = {worst_ratio:.3} x largest saving, {violations} violations"
        ),
    )
}

fn kkt_suite() -> Outcome {
    let mut rng = trial_rng(SEED, 3);
    let instances = 500;
    let mut failures = Vec::new();
    let mut binding = 0;
    let mut worst_residual = 0.0f64;
    let mut worst_cs = 0.0f64;
    for i in 0..instances {
        let p = random_physical_instance(&mut rng);
        let s = solve_sl(&p).expect("SL problem");
        let report = kkt_check(&p, &s);
        if s.nu > 0.0 {
            binding += 1;
            worst_cs = worst_cs.max(report.complementary_slackness.abs() / (s.nu * p.capacity));
        }
        worst_residual =
            worst_residual.max(report.max_interior_residual / report.stationarity_tol * 1e-6);
        if !report.passed || !s.converged {
            failures.push(format!("instance {i}: {}", report.failures().join("; ")));
        }
    }
    Outcome::new(
        failures.is_empty(),
        format!(
            "{instances} solves ({binding} with binding capacity), {} failures, worst interior residual \
             {worst_residual:.2e} of energy scale (tol 1e-6), worst |nu*slack|/(nu*C) {worst_cs:.2e} (tol 1e-6){}",
            failures.len(),
            failures.first().map(|f| format!("; first: {f}")).unwrap_or_default()
        ),
    )
}

fn spectral_cap_flattening() -> Outcome {
    let rec = sweep(
        SweepVariable::DataElements,
        vec![280.0, 300.0],
        vec![Mode::StateLess, Mode::StateFull],
        vec![1.0, 0.1],
        100,
    );
    // Judged at full capacity; the 10% rows are reported for reference, where
    // the capacity alone forces Lambda to scale with 1/M.
    let mut ok = true;
    let mut parts = Vec::new();
    for mode in [Mode::StateLess, Mode::StateFull] {
        for fraction in [1.0, 0.1] {
            let s = select(&rec, mode, fraction);
            let lambda_flat = rel(s[1].lambda, s[0].lambda) <= 1e-9;
            let energy_flat = rel(s[1].e_sum_opt, s[0].e_sum_opt) <= 1e-9;
            if fraction == 1.0 {
                ok &= lambda_flat && energy_flat;
            }
            parts.push(format!(
                "{mode} {:.0}%: Lambda {:.4} -> {:.4} ({}), E_opt {:.4} -> {:.4} mJ ({})",
                100.0 * fraction,
                s[0].lambda,
                s[1].lambda,
                if lambda_flat { "flat" } else { "differs" },
                s[0].e_sum_opt,
                s[1].e_sum_opt,
                if energy_flat { "flat" } else { "differs" },
            ));
        }
    }
    Outcome::new(
        ok,
        format!("M 280 -> 300 (tol 1e-9 rel): {}", parts.join("; ")),
    )
}

fn determinism() -> Outcome {
    let spec = SweepSpec {
        trials: 20,
        ..SweepSpec::defaults_for(SweepVariable::PathlossBeta)
    };
    let run = || {
        let rec = run_sweep(&spec, &ScenarioConfig::default(), &WorkloadSpec::default())
            .expect("sweep runs");
        edge_offload::cli::sweep_csv(&rec).expect("csv renders")
    };
    let a = run();
    let b = run();
    Outcome::new(
        a == b && !a.is_empty(),
        format!(
            "two runs produced {} and {} bytes, identical: {}",
            a.len(),
            b.len(),
            a == b
        ),
    )
}

fn main() {
    type Criterion = (&'static str, fn() -> Outcome);
    let criteria: [Criterion; 9] = [
        ("1 baseline local energy", baseline_local_energy),
        ("2 linear scaling in M", linear_in_elements),
        ("3 capacity plateau", capacity_plateau),
        ("4 full-offload regime and sweep shape", full_offload_regime),
        ("5 SL oracle equivalence", sl_oracle_equivalence),
        ("6 SF oracle equivalence", sf_oracle_equivalence),
        ("7a KKT suite", kkt_suite),
        (
            "7b flattening at the spectral-efficiency cap",
            spectral_cap_flattening,
        ),
        ("8 determinism", determinism),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let outcome = check();
        if !outcome.passed {
            failed += 1;
        }
        println!(
            "{} criterion {name}: {}",
            if outcome.passed { "PASS" } else { "FAIL" },
            outcome.detail
        );
    }
    println!(
        "acceptance: {} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}

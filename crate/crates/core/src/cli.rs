//! Command-line front end: `solve`, `sweep` and `validate`.

use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::config::{ConfigError, RunConfig};
use crate::experiments::{
    compute_lambda, e_sum_all, e_sum_none, place_users, run_sweep, SweepRecord, SweepSpec,
    SweepVariable,
};
use crate::optimizer::{kkt_check, solve_sf, solve_sl};
use crate::problem::{OffloadSolution, Problem};
use crate::validation::{run_suite, ValidationOptions};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_SOLVER: i32 = 2;
pub const EXIT_ORACLE: i32 = 3;

pub const SWEEP_HEADER: [&str; 10] = [
    "sweep_var",
    "value",
    "mode",
    "cap_fraction",
    "lambda",
    "e_sum_opt",
    "e_sum_none",
    "e_sum_all",
    "nu_mean",
    "trials",
];

#[derive(Debug, Parser)]
#[command(
    name = "edge-offload",
    version,
    about = "Energy-optimal edge-cloud offloading decisions"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Key-value configuration file; every key defaults to the reference setup.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory (overrides `output_dir`).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Monte-Carlo placements per sweep point.
    #[arg(long, global = true)]
    pub trials: Option<usize>,
    /// Skip writing the plot script.
    #[arg(long, global = true)]
    pub no_plots: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve one placement in both modes and print the per-device decisions.
    Solve,
    /// Run a parameter sweep and write sweep.csv.
    Sweep,
    /// Compare the solvers against brute-force oracles on random instances.
    Validate(ValidateArgs),
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    /// Random instances for the grid-oracle comparison.
    #[arg(long, default_value_t = 50)]
    pub sl_instances: usize,
    /// Random instances for each state-full comparison.
    #[arg(long, default_value_t = 100)]
    pub sf_instances: usize,
    /// Largest instance size for subset enumeration (at most 15).
    #[arg(long, default_value_t = 12)]
    pub sf_users: usize,
    /// Random instances for the KKT check.
    #[arg(long, default_value_t = 200)]
    pub kkt_instances: usize,
    /// Fault injection: raise every binding price by this relative amount.
    #[arg(long, hide = true)]
    pub perturb_nu: Option<f64>,
}

fn load_config(cli: &Cli) -> Result<RunConfig, ConfigError> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::from_file(path)?,
        None => RunConfig::default(),
    };
    if let Some(out) = &cli.out {
        cfg.output_dir = out.clone();
    }
    if let Some(seed) = cli.seed {
        cfg.scenario.rng_seed = seed;
    }
    if cli.no_plots {
        cfg.emit_plots = false;
    }
    if let Some(trials) = cli.trials {
        if trials == 0 {
            return Err(ConfigError::Invalid("--trials must be at least 1".into()));
        }
        if let Some(sweep) = cfg.sweep.as_mut() {
            sweep.trials = trials;
        }
    }
    Ok(cfg)
}

/// Runs the CLI and returns the process exit code.
pub fn run(cli: &Cli, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let cfg = match load_config(cli) {
        Ok(c) => c,
        Err(e) => {
            let _ = writeln!(err, "config error: {e}");
            return EXIT_CONFIG;
        }
    };
    let result = match &cli.command {
        Command::Solve => cmd_solve(&cfg, out),
        Command::Sweep => cmd_sweep(&cfg, cli.trials, out),
        Command::Validate(args) => cmd_validate(&cfg, args, out),
    };
    match result {
        Ok(code) => code,
        Err(CliFailure { code, msg }) => {
            let _ = writeln!(err, "{msg}");
            code
        }
    }
}

struct CliFailure {
    code: i32,
    msg: String,
}

impl CliFailure {
    fn config(msg: impl Into<String>) -> Self {
        Self {
            code: EXIT_CONFIG,
            msg: msg.into(),
        }
    }

    fn solver(msg: impl Into<String>) -> Self {
        Self {
            code: EXIT_SOLVER,
            msg: msg.into(),
        }
    }

    fn io(path: &Path, e: impl std::fmt::Display) -> Self {
        Self::config(format!("cannot write {}: {e}", path.display()))
    }
}

fn write_file(path: &Path, contents: &[u8]) -> Result<(), CliFailure> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| CliFailure::io(dir, e))?;
    }
    std::fs::write(path, contents).map_err(|e| CliFailure::io(path, e))
}

/// Energies and prices with 17 significant digits.
fn sci(x: f64) -> String {
    format!("{x:.16e}")
}

fn cmd_solve(cfg: &RunConfig, out: &mut dyn Write) -> Result<i32, CliFailure> {
    let scenario = &cfg.scenario;
    let users = place_users(scenario, &cfg.workload);
    let capacity = scenario.capacity_cycles();
    let sl_problem = Problem::new(users.clone(), capacity, crate::problem::Mode::StateLess)
        .map_err(|e| CliFailure::config(e.to_string()))?;
    let sf_problem = sl_problem.with_mode(crate::problem::Mode::StateFull);
    let sl = solve_sl(&sl_problem).map_err(|e| CliFailure::solver(e.to_string()))?;
    let sf = solve_sf(&sf_problem).map_err(|e| CliFailure::solver(e.to_string()))?;

    let mut text = String::new();
    let _ = writeln!(
        text,
        "{} devices, capacity {capacity} cycles, demand {} cycles",
        users.len(),
        sl_problem.total_demand()
    );
    let _ = writeln!(
        text,
        "E_sum(0) = {:.6} mJ, E_sum(1) = {:.6} mJ",
        e_sum_none(&users),
        e_sum_all(&users)
    );
    let mut csv = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    csv.write_record([
        "mode",
        "user",
        "distance_m",
        "alpha",
        "e_local_mj",
        "e_tx_mj",
        "e_total_mj",
        "regime",
        "nu",
    ])
    .map_err(|e| CliFailure::solver(e.to_string()))?;

    let mut failed = Vec::new();
    for (p, s) in [(&sl_problem, &sl), (&sf_problem, &sf)] {
        let report = kkt_check(p, s);
        let _ = writeln!(
            text,
            "\n[{}] nu = {:.6e}, lambda = {:.6}, objective = {:.6} mJ, kkt {}",
            s.mode,
            s.nu,
            compute_lambda(&users, &s.alpha),
            s.objective,
            if report.passed { "ok" } else { "FAILED" }
        );
        if !report.passed || !s.converged {
            failed.push(format!(
                "{} solution failed diagnostics: {}",
                s.mode,
                report.failures().join("; ")
            ));
        }
        write_solution_table(&mut text, p, s);
        for (i, (u, e)) in p.users.iter().zip(&s.energies).enumerate() {
            csv.write_record([
                s.mode.tag().to_string(),
                u.id.to_string(),
                format!("{}", u.distance_m),
                sci(s.alpha[i]),
                sci(e.local),
                sci(e.transmit),
                sci(e.total),
                s.regimes[i].tag().to_string(),
                sci(s.nu),
            ])
            .map_err(|e| CliFailure::solver(e.to_string()))?;
        }
    }
    let bytes = csv
        .into_inner()
        .map_err(|e| CliFailure::solver(e.to_string()))?;
    let path = cfg.output_dir.join("solution.csv");
    write_file(&path, &bytes)?;
    let _ = writeln!(text, "\nwrote {}", path.display());
    let _ = out.write_all(text.as_bytes());

    if failed.is_empty() {
        Ok(EXIT_OK)
    } else {
        Err(CliFailure::solver(failed.join("\n")))
    }
}

fn write_solution_table(text: &mut String, p: &Problem, s: &OffloadSolution) {
    let _ = writeln!(
        text,
        "{:>4} {:>10} {:>10} {:>12} {:>12}  regime",
        "id", "d_i [m]", "alpha", "E_u [mJ]", "E_tr [mJ]"
    );
    for (i, u) in p.users.iter().enumerate() {
        let _ = writeln!(
            text,
            "{:>4} {:>10.2} {:>10.6} {:>12.6e} {:>12.6e}  {}",
            u.id,
            u.distance_m,
            s.alpha[i],
            s.energies[i].local,
            s.energies[i].transmit,
            s.regimes[i]
        );
    }
}

/// Renders sweep records as CSV bytes with the fixed header.
pub fn sweep_csv(records: &[SweepRecord]) -> Result<Vec<u8>, csv::Error> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    w.write_record(SWEEP_HEADER)?;
    for r in records {
        w.write_record([
            r.variable.name().to_string(),
            format!("{}", r.value),
            r.mode.tag().to_string(),
            format!("{}", r.capacity_fraction),
            sci(r.lambda),
            sci(r.e_sum_opt),
            sci(r.e_sum_none),
            sci(r.e_sum_all),
            sci(r.nu_mean),
            r.trials.to_string(),
        ])?;
    }
    w.into_inner().map_err(|e| e.into_error().into())
}

fn cmd_sweep(
    cfg: &RunConfig,
    trials: Option<usize>,
    out: &mut dyn Write,
) -> Result<i32, CliFailure> {
    let mut spec = cfg
        .sweep
        .clone()
        .unwrap_or_else(|| SweepSpec::defaults_for(SweepVariable::PathlossBeta));
    if let Some(t) = trials {
        spec.trials = t;
    }
    let records = run_sweep(&spec, &cfg.scenario, &cfg.workload).map_err(|e| match e {
        crate::experiments::ExperimentError::InvalidSweep(_)
        | crate::experiments::ExperimentError::Scenario { .. }
        | crate::experiments::ExperimentError::Problem { .. } => CliFailure::config(e.to_string()),
        _ => CliFailure::solver(e.to_string()),
    })?;
    let bytes = sweep_csv(&records).map_err(|e| CliFailure::solver(e.to_string()))?;
    let csv_path = cfg.output_dir.join("sweep.csv");
    write_file(&csv_path, &bytes)?;
    let _ = writeln!(
        out,
        "{} rows ({} values x {} modes x {} capacity fractions, {} trials) -> {}",
        records.len(),
        spec.values.len(),
        spec.modes.len(),
        spec.capacity_fractions.len(),
        spec.trials,
        csv_path.display()
    );
    if cfg.emit_plots {
        let script_path = cfg.output_dir.join("plot_sweep.py");
        write_file(&script_path, PLOT_SCRIPT.as_bytes())?;
        let _ = writeln!(out, "plot script -> {}", script_path.display());
    }
    Ok(EXIT_OK)
}

fn cmd_validate(
    cfg: &RunConfig,
    args: &ValidateArgs,
    out: &mut dyn Write,
) -> Result<i32, CliFailure> {
    let opts = ValidationOptions {
        seed: cfg.scenario.rng_seed,
        sl_instances: args.sl_instances,
        sf_instances: args.sf_instances,
        sf_max_users: args.sf_users,
        kkt_instances: args.kkt_instances,
        perturb_nu: args.perturb_nu,
        ..ValidationOptions::default()
    };
    let results = run_suite(&opts).map_err(|e| CliFailure::config(e.to_string()))?;
    let mut all_ok = true;
    for r in &results {
        all_ok &= r.passed;
        let _ = writeln!(
            out,
            "[{}] {}: {}",
            if r.passed { "PASS" } else { "FAIL" },
            r.name,
            r.detail
        );
    }
    if all_ok {
        Ok(EXIT_OK)
    } else {
        Err(CliFailure {
            code: EXIT_ORACLE,
            msg: "oracle validation failed".into(),
        })
    }
}

/// Reads sweep.csv from its own directory and draws the offloading share and
/// sum energies against the swept variable.
pub const PLOT_SCRIPT: &str = r#"#!/usr/bin/env python3
"""Plot offloading share and sum energy from sweep.csv (no recomputation)."""
import csv
import os
import sys

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

here = os.path.dirname(os.path.abspath(__file__))
path = sys.argv[1] if len(sys.argv) > 1 else os.path.join(here, "sweep.csv")
with open(path, newline="") as f:
    rows = list(csv.DictReader(f))
if not rows:
    sys.exit("empty sweep.csv")

var = rows[0]["sweep_var"]
xlabel = "Pathloss exponent beta" if var == "beta" else "M [data elements]"
curves = {}
for r in rows:
    key = (r["mode"], float(r["cap_fraction"]))
    curves.setdefault(key, []).append(r)

fig, ax = plt.subplots()
for (mode, frac), rs in sorted(curves.items()):
    ax.plot([float(r["value"]) for r in rs], [100 * float(r["lambda"]) for r in rs],
            marker="o", label=f"{mode} {frac:.0%} C_s")
ax.set_xlabel(xlabel)
ax.set_ylabel("Lambda [%]")
ax.grid(True, linestyle=":")
ax.legend()
fig.savefig(os.path.join(os.path.dirname(os.path.abspath(path)), f"lambda_vs_{var}.png"), dpi=150)

fig, ax = plt.subplots()
for (mode, frac), rs in sorted(curves.items()):
    ax.plot([float(r["value"]) for r in rs], [float(r["e_sum_opt"]) for r in rs],
            marker="o", label=f"E_sum(A') {mode} {frac:.0%} C_s")
first = next(iter(sorted(curves.items())))[1]
xs = [float(r["value"]) for r in first]
ax.plot(xs, [float(r["e_sum_none"]) for r in first], "k--s", label="E_sum(0)")
ax.plot(xs, [float(r["e_sum_all"]) for r in first], "g--^", label="E_sum(1)")
ax.set_xlabel(xlabel)
ax.set_ylabel("E_sum [mJ]")
ax.grid(True, linestyle=":")
ax.legend()
fig.savefig(os.path.join(os.path.dirname(os.path.abspath(path)), f"energy_vs_{var}.png"), dpi=150)
"#;

//! Sum-energy minimisation under the shared server-capacity budget.
//!
//! State-less problems are solved through the dual: for a server-cycle price
//! `nu` every device's best fraction has the closed form
//!
//! ```text
//! alpha_i(nu) = clamp( log2((E_u,i - nu * L * C_serv,i) / K_i) / r_i, 0, alpha_max,i )
//! ```
//!
//! and the total server load is continuous and nonincreasing in `nu`, so the
//! price that exactly fills the server is found by bisection. State-full
//! problems pick whole devices greedily by energy saved per server cycle.

use std::cmp::Ordering;

use thiserror::Error;

use crate::model::{AlphaLimit, UserInstance};
use crate::problem::{Mode, OffloadSolution, Problem, Regime};

pub const MAX_BISECTION_ITERS: usize = 200;
/// Relative load tolerance of the price search.
pub const LOAD_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OptimizeError {
    #[error("no device offloads even at zero server price")]
    EmptyOffloadSet,
    #[error("solver for {expected} called on a {found} problem")]
    WrongMode { expected: Mode, found: Mode },
}

/// Best offloading fraction of one device for a given server-cycle price.
pub fn alpha_given_nu(u: &UserInstance, nu: f64) -> f64 {
    if !(u.data_bits > 0.0) || !(u.alpha_max > 0.0) {
        return 0.0;
    }
    let ratio = (u.local_energy_mj - nu * u.server_load) / u.tx_const_mj;
    if !(ratio > 1.0) {
        return 0.0;
    }
    (ratio.log2() / u.rate).min(u.alpha_max)
}

fn classify(u: &UserInstance, alpha: f64, nu: f64) -> Regime {
    if alpha <= 0.0 {
        return Regime::NoOffload;
    }
    if alpha >= u.alpha_max {
        match u.alpha_limit {
            AlphaLimit::Rate => return Regime::ClampedRate,
            AlphaLimit::Power => return Regime::ClampedPower,
            AlphaLimit::Unit => {}
        }
    }
    if nu > 0.0 {
        Regime::FullLoad
    } else {
        Regime::Underloaded
    }
}

/// Interval the optimal price must lie in, given the set of offloading devices.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NuBounds {
    pub lo: f64,
    pub hi: f64,
}

impl NuBounds {
    pub fn contains(&self, nu: f64, tol: f64) -> bool {
        nu >= self.lo - tol && nu <= self.hi + tol
    }
}

fn lower_bound_term(u: &UserInstance) -> f64 {
    (u.local_energy_mj - u.tx_const_mj * (u.alpha_max * u.rate).exp2()) / u.server_load
}

fn upper_bound_term(u: &UserInstance) -> f64 {
    (u.local_energy_mj - u.tx_const_mj) / u.server_load
}

/// Price bounds over the devices that would offload at zero price.
pub fn nu_bounds(p: &Problem) -> Result<NuBounds, OptimizeError> {
    let offloading: Vec<&UserInstance> = p
        .users
        .iter()
        .filter(|u| alpha_given_nu(u, 0.0) > 0.0)
        .collect();
    if offloading.is_empty() {
        return Err(OptimizeError::EmptyOffloadSet);
    }
    let lo = offloading
        .iter()
        .map(|u| lower_bound_term(u))
        .fold(0.0, f64::max);
    let hi = offloading
        .iter()
        .map(|u| upper_bound_term(u))
        .fold(f64::INFINITY, f64::min);
    Ok(NuBounds { lo, hi })
}

/// Price bounds implied by a finished solution.
///
/// The upper bound comes from every offloading device; the lower bound only
/// from devices strictly inside `(0, alpha_max)`, since a device held at its
/// upper limit satisfies the reverse inequality. Returns `None` when nobody
/// offloads.
pub fn nu_bounds_for(p: &Problem, alpha: &[f64]) -> Option<NuBounds> {
    let mut any = false;
    let mut lo: f64 = 0.0;
    let mut hi = f64::INFINITY;
    for (u, &a) in p.users.iter().zip(alpha) {
        if a <= 0.0 {
            continue;
        }
        any = true;
        hi = hi.min(upper_bound_term(u));
        if a < u.alpha_max {
            lo = lo.max(lower_bound_term(u));
        }
    }
    any.then_some(NuBounds { lo, hi })
}

fn alphas_at(p: &Problem, nu: f64) -> Vec<f64> {
    p.users.iter().map(|u| alpha_given_nu(u, nu)).collect()
}

pub fn solve(p: &Problem) -> OffloadSolution {
    match p.mode {
        Mode::StateLess => solve_sl_unchecked(p),
        Mode::StateFull => solve_sf_unchecked(p),
    }
}

pub fn solve_sl(p: &Problem) -> Result<OffloadSolution, OptimizeError> {
    if p.mode != Mode::StateLess {
        return Err(OptimizeError::WrongMode {
            expected: Mode::StateLess,
            found: p.mode,
        });
    }
    Ok(solve_sl_unchecked(p))
}

/// The state-less response of every device to a fixed price.
pub fn solution_at_price(p: &Problem, nu: f64) -> OffloadSolution {
    let alpha = alphas_at(p, nu);
    let regimes = p
        .users
        .iter()
        .zip(&alpha)
        .map(|(u, &a)| classify(u, a, nu))
        .collect();
    OffloadSolution::assemble(p, alpha, nu, regimes)
}

fn solve_sl_unchecked(p: &Problem) -> OffloadSolution {
    let finish = |alpha: Vec<f64>, nu: f64, iterations: usize, converged: bool| {
        let regimes = p
            .users
            .iter()
            .zip(&alpha)
            .map(|(u, &a)| classify(u, a, nu))
            .collect();
        let mut s = OffloadSolution::assemble(p, alpha, nu, regimes);
        s.iterations = iterations;
        s.converged = converged;
        s
    };

    let free = alphas_at(p, 0.0);
    if p.load(&free) <= p.capacity {
        return finish(free, 0.0, 0, true);
    }

    // Load is zero once every device's log argument drops to zero.
    let mut lo = 0.0;
    let mut hi = p
        .users
        .iter()
        .map(|u| u.local_energy_mj / u.server_load)
        .fold(0.0, f64::max);
    let tol = LOAD_TOL * p.capacity;
    for it in 1..=MAX_BISECTION_ITERS {
        let mid = 0.5 * (lo + hi);
        let alpha = alphas_at(p, mid);
        let load = p.load(&alpha);
        if (load - p.capacity).abs() <= tol {
            return finish(alpha, mid, it, true);
        }
        if load > p.capacity {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    // Out of iterations: the upper end of the bracket is always feasible.
    finish(alphas_at(p, hi), hi, MAX_BISECTION_ITERS, false)
}

pub fn solve_sf(p: &Problem) -> Result<OffloadSolution, OptimizeError> {
    if p.mode != Mode::StateFull {
        return Err(OptimizeError::WrongMode {
            expected: Mode::StateFull,
            found: p.mode,
        });
    }
    Ok(solve_sf_unchecked(p))
}

/// Energy saved by moving the whole job to the server, if the device is
/// allowed to and it actually saves energy.
fn full_offload_saving(u: &UserInstance) -> Option<f64> {
    if u.alpha_max < 1.0 || !(u.data_bits > 0.0) {
        return None;
    }
    let saving = u.local_energy_mj - u.tx_energy_mj(1.0);
    (saving > 0.0).then_some(saving)
}

fn solve_sf_unchecked(p: &Problem) -> OffloadSolution {
    let mut candidates: Vec<(usize, f64)> = p
        .users
        .iter()
        .enumerate()
        .filter_map(|(i, u)| full_offload_saving(u).map(|s| (i, s / u.server_load)))
        .collect();
    candidates.sort_by(|a, b| {
        b.1.total_cmp(&a.1)
            .then_with(|| p.users[a.0].id.cmp(&p.users[b.0].id))
    });

    let mut alpha = vec![0.0; p.users.len()];
    let mut used = 0.0;
    let mut shadow_price = None;
    for &(i, density) in &candidates {
        let load = p.users[i].server_load;
        if used + load <= p.capacity {
            used += load;
            alpha[i] = 1.0;
        } else if shadow_price.is_none() {
            shadow_price = Some(density);
        }
    }
    let nu = shadow_price.unwrap_or(0.0);

    let regimes = p
        .users
        .iter()
        .zip(&alpha)
        .map(|(u, &a)| {
            if a > 0.0 {
                if nu > 0.0 {
                    Regime::FullLoad
                } else {
                    Regime::Underloaded
                }
            } else if u.alpha_max < 1.0 {
                match u.alpha_limit {
                    AlphaLimit::Power => Regime::ClampedPower,
                    _ => Regime::ClampedRate,
                }
            } else {
                Regime::NoOffload
            }
        })
        .collect();
    OffloadSolution::assemble(p, alpha, nu, regimes)
}

/// Where a device's fraction sits relative to its box.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundPosition {
    Lower,
    Interior,
    Upper,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UserKkt {
    pub position: BoundPosition,
    /// `-E_u + K 2^(alpha r) + nu L C_serv`.
    pub residual: f64,
    /// Recovered multiplier of `alpha >= 0`.
    pub psi: f64,
    /// Recovered multiplier of `alpha <= alpha_max`.
    pub upper_multiplier: f64,
    pub ok: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KktReport {
    pub users: Vec<UserKkt>,
    pub load: f64,
    pub slack: f64,
    pub primal_feasible: bool,
    pub dual_feasible: bool,
    /// `nu * slack`.
    pub complementary_slackness: f64,
    pub complementary_ok: bool,
    pub stationarity_tol: f64,
    pub max_interior_residual: f64,
    /// Price bounds over the final offloading set.
    pub bounds: Option<NuBounds>,
    pub nu_within_bounds: bool,
    pub binary: bool,
    pub passed: bool,
}

impl KktReport {
    pub fn failures(&self) -> Vec<String> {
        let mut out = Vec::new();
        if !self.primal_feasible {
            out.push(format!("primal infeasible (slack {:e})", self.slack));
        }
        if !self.dual_feasible {
            out.push("negative price".to_string());
        }
        if !self.complementary_ok {
            out.push(format!(
                "complementary slackness violated (nu*slack = {:e})",
                self.complementary_slackness
            ));
        }
        for (i, u) in self.users.iter().enumerate() {
            if !u.ok {
                out.push(format!(
                    "user {i}: stationarity residual {:e} at {:?} bound",
                    u.residual, u.position
                ));
            }
        }
        if !self.nu_within_bounds {
            out.push("price outside bounds of the offloading set".to_string());
        }
        out
    }
}

const BOUND_EPS: f64 = 1e-12;

/// Checks a solution against the KKT conditions of the relaxed problem.
///
/// Stationarity is only meaningful for state-less solutions; for state-full
/// ones the report checks feasibility and integrality.
pub fn kkt_check(p: &Problem, s: &OffloadSolution) -> KktReport {
    let scale = p
        .users
        .iter()
        .map(|u| u.local_energy_mj)
        .fold(0.0, f64::max);
    let tol = 1e-6 * scale;
    let nu = s.nu;

    let users: Vec<UserKkt> = p
        .users
        .iter()
        .zip(&s.alpha)
        .map(|(u, &a)| {
            let residual =
                -u.local_energy_mj + u.tx_const_mj * (a * u.rate).exp2() + nu * u.server_load;
            let position = if a <= BOUND_EPS {
                BoundPosition::Lower
            } else if a >= u.alpha_max - BOUND_EPS {
                BoundPosition::Upper
            } else {
                BoundPosition::Interior
            };
            let (psi, upper_multiplier, ok) = match position {
                BoundPosition::Lower => (residual, 0.0, residual >= -tol),
                BoundPosition::Upper => (0.0, -residual, residual <= tol),
                BoundPosition::Interior => (0.0, 0.0, residual.abs() <= tol),
            };
            UserKkt {
                position,
                residual,
                psi,
                upper_multiplier,
                ok,
            }
        })
        .collect();

    let load = p.load(&s.alpha);
    let slack = p.capacity - load;
    let in_box = p
        .users
        .iter()
        .zip(&s.alpha)
        .all(|(u, &a)| a >= 0.0 && a <= u.alpha_max + BOUND_EPS);
    let primal_feasible = in_box && slack >= -1e-9 * p.capacity;
    let dual_feasible = nu >= 0.0;
    let complementary_slackness = nu * slack;
    let complementary_ok = complementary_slackness.abs() <= 1e-6 * nu * p.capacity + 1e-12;
    let max_interior_residual = users
        .iter()
        .filter(|u| u.position == BoundPosition::Interior)
        .map(|u| u.residual.abs())
        .fold(0.0, f64::max);
    let bounds = nu_bounds_for(p, &s.alpha);
    let nu_within_bounds = match (bounds, p.mode) {
        (Some(b), Mode::StateLess) => {
            let min_load = p
                .users
                .iter()
                .map(|u| u.server_load)
                .fold(f64::INFINITY, f64::min);
            b.contains(nu, tol / min_load)
        }
        _ => true,
    };
    let binary = s.alpha.iter().all(|&a| a == 0.0 || a == 1.0);

    let passed = match p.mode {
        Mode::StateLess => {
            primal_feasible
                && dual_feasible
                && complementary_ok
                && users.iter().all(|u| u.ok)
                && nu_within_bounds
        }
        Mode::StateFull => primal_feasible && binary,
    };

    KktReport {
        users,
        load,
        slack,
        primal_feasible,
        dual_feasible,
        complementary_slackness,
        complementary_ok,
        stationarity_tol: tol,
        max_interior_residual,
        bounds,
        nu_within_bounds,
        binary,
        passed,
    }
}

/// Orders solutions by objective, then lexicographically by fraction vector.
pub fn compare_solutions(a: &OffloadSolution, b: &OffloadSolution) -> Ordering {
    a.objective.total_cmp(&b.objective).then_with(|| {
        a.alpha
            .iter()
            .zip(&b.alpha)
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(Ordering::Equal)
    })
}

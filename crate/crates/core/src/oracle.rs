//! Brute-force reference solvers.
//!
//! Nothing here calls into [`crate::optimizer`]; energies come from
//! [`crate::model`] and the solution record from [`OffloadSolution::assemble`].

use rayon::prelude::*;
use thiserror::Error;

use crate::config::ScenarioConfig;
use crate::model::{breakdown, sum_energy, UserInstance};
use crate::problem::{OffloadSolution, Problem, Regime};

/// Largest number of grid points `grid_oracle_sl` will visit.
pub const GRID_POINT_BUDGET: u64 = 200_000_000;
pub const MAX_SUBSET_USERS: usize = 15;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("grid step {0} must lie in (0, 0.5] and divide 1")]
    BadStep(f64),
    #[error("instance too large: {points} grid points exceed the budget of {budget}")]
    GridTooLarge { points: u64, budget: u64 },
    #[error(
        "instance too large: {0} users exceed the subset-enumeration limit of {MAX_SUBSET_USERS}"
    )]
    TooManyUsers(usize),
}

fn regimes_for(alpha: &[f64]) -> Vec<Regime> {
    alpha
        .iter()
        .map(|&a| {
            if a > 0.0 {
                Regime::Underloaded
            } else {
                Regime::NoOffload
            }
        })
        .collect()
}

/// Exhaustive minimisation over `{0, step, 2 step, ..., 1}^N`.
///
/// Grid points beyond a device's rate or power cap, and vectors exceeding the
/// server capacity, are discarded. Ties go to the lexicographically smallest
/// index vector.
pub fn grid_oracle_sl(p: &Problem, step: f64) -> Result<OffloadSolution, OracleError> {
    grid_oracle_sl_with_budget(p, step, GRID_POINT_BUDGET)
}

pub fn grid_oracle_sl_with_budget(
    p: &Problem,
    step: f64,
    budget: u64,
) -> Result<OffloadSolution, OracleError> {
    if !(step > 0.0 && step <= 0.5) {
        return Err(OracleError::BadStep(step));
    }
    let divisions = (1.0 / step).round();
    if ((divisions * step) - 1.0).abs() > 1e-9 {
        return Err(OracleError::BadStep(step));
    }
    let divisions = divisions as usize;
    let per_user = divisions as u64 + 1;
    let points = (0..p.users.len()).try_fold(1u64, |acc, _| acc.checked_mul(per_user));
    match points {
        Some(points) if points <= budget => {}
        _ => {
            return Err(OracleError::GridTooLarge {
                points: points.unwrap_or(u64::MAX),
                budget,
            })
        }
    }

    // Per-user tables of (energy, load) for each admissible grid level.
    let tables: Vec<Vec<(f64, f64)>> = p
        .users
        .iter()
        .map(|u| {
            (0..=divisions)
                .map(|k| k as f64 / divisions as f64)
                .take_while(|&a| a <= u.alpha_max + 1e-12)
                .map(|a| (breakdown(u, a).total, a * u.server_load))
                .collect()
        })
        .collect();

    let limit = p.capacity * (1.0 + 1e-12);
    let best = (0..tables[0].len())
        .into_par_iter()
        .filter_map(|first| {
            let mut idx = vec![0usize; tables.len()];
            idx[0] = first;
            let (e0, l0) = tables[0][first];
            let mut best: Option<(f64, Vec<usize>)> = None;
            search(&tables, 1, e0, l0, limit, &mut idx, &mut best);
            best
        })
        .reduce_with(|a, b| if better(&b, &a) { b } else { a });

    // The all-zero vector is always feasible, so `best` exists.
    let (_, idx) = best.expect("zero vector is feasible");
    let alpha: Vec<f64> = idx.iter().map(|&k| k as f64 / divisions as f64).collect();
    let regimes = regimes_for(&alpha);
    Ok(OffloadSolution::assemble(p, alpha, f64::NAN, regimes))
}

fn better(a: &(f64, Vec<usize>), b: &(f64, Vec<usize>)) -> bool {
    match a.0.total_cmp(&b.0) {
        std::cmp::Ordering::Less => true,
        std::cmp::Ordering::Greater => false,
        std::cmp::Ordering::Equal => a.1 < b.1,
    }
}

fn search(
    tables: &[Vec<(f64, f64)>],
    depth: usize,
    energy: f64,
    load: f64,
    limit: f64,
    idx: &mut Vec<usize>,
    best: &mut Option<(f64, Vec<usize>)>,
) {
    if load > limit {
        return;
    }
    if depth == tables.len() {
        let candidate = (energy, idx.clone());
        if best.as_ref().is_none_or(|b| better(&candidate, b)) {
            *best = Some(candidate);
        }
        return;
    }
    for (k, &(e, l)) in tables[depth].iter().enumerate() {
        idx[depth] = k;
        search(tables, depth + 1, energy + e, load + l, limit, idx, best);
    }
    idx[depth] = 0;
}

/// Golden-section minimisation of one device's energy over
/// `[0, alpha_max]`, with no server price.
pub fn scalar_oracle_sl(u: &UserInstance, cfg: &ScenarioConfig) -> f64 {
    const TOL: f64 = 1e-10;
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let f = |a: f64| {
        sum_energy(u, a.clamp(0.0, 1.0), cfg)
            .map(|e| e.total)
            .unwrap_or(f64::INFINITY)
    };
    let (mut a, mut b) = (0.0, u.alpha_max.clamp(0.0, 1.0));
    if b <= 0.0 {
        return 0.0;
    }
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while b - a > TOL {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    let mid = 0.5 * (a + b);
    // The minimum may sit on an endpoint of the interval.
    let hi = u.alpha_max.clamp(0.0, 1.0);
    [(0.0, f(0.0)), (hi, f(hi)), (mid, f(mid))]
        .into_iter()
        .min_by(|x, y| x.1.total_cmp(&y.1))
        .map(|(a, _)| a)
        .unwrap_or(0.0)
}

/// Exhaustive search over all `2^N` all-or-nothing decisions.
///
/// A device may only be set to 1 if its caps allow full offload. Ties go to
/// the lexicographically smallest fraction vector.
pub fn subset_oracle_sf(p: &Problem) -> Result<OffloadSolution, OracleError> {
    let n = p.users.len();
    if n > MAX_SUBSET_USERS {
        return Err(OracleError::TooManyUsers(n));
    }
    let energies: Vec<(f64, f64)> = p
        .users
        .iter()
        .map(|u| (breakdown(u, 0.0).total, breakdown(u, 1.0).total))
        .collect();
    let allowed: u32 = p
        .users
        .iter()
        .enumerate()
        .filter(|(_, u)| u.alpha_max >= 1.0)
        .fold(0, |m, (i, _)| m | (1 << i));
    let limit = p.capacity;

    let mut best: Option<(f64, u32)> = None;
    for mask in 0u32..(1u32 << n) {
        if mask & !allowed != 0 {
            continue;
        }
        let mut energy = 0.0;
        let mut load = 0.0;
        for (i, u) in p.users.iter().enumerate() {
            if mask & (1 << i) != 0 {
                energy += energies[i].1;
                load += u.server_load;
            } else {
                energy += energies[i].0;
            }
        }
        if load > limit {
            continue;
        }
        // Lexicographic order on the fraction vector is the bit-reversed mask.
        let key = mask.reverse_bits();
        let replace = match best {
            None => true,
            Some((e, k)) => energy < e || (energy == e && key < k),
        };
        if replace {
            best = Some((energy, key));
        }
    }
    let (_, key) = best.expect("empty selection is feasible");
    let mask = key.reverse_bits();
    let alpha: Vec<f64> = (0..n)
        .map(|i| if mask & (1 << i) != 0 { 1.0 } else { 0.0 })
        .collect();
    let regimes = regimes_for(&alpha);
    Ok(OffloadSolution::assemble(p, alpha, f64::NAN, regimes))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::WorkloadSpec;
    use crate::problem::Mode;

    fn user(id: usize, eu: f64, k: f64, r: f64, load: f64) -> UserInstance {
        UserInstance::from_constants(id, eu, k, r, load, 1.0)
    }

    #[test]
    fn single_user_endpoint_grid() {
        let good = user(0, 1.0, 0.01, 1.2, 10.0);
        let p = Problem::new(vec![good.clone()], 100.0, Mode::StateLess).unwrap();
        let s = grid_oracle_sl(&p, 0.5).unwrap();
        let ends = breakdown(&good, 0.0).total.min(breakdown(&good, 1.0).total);
        let mid = breakdown(&good, 0.5).total;
        assert_eq!(s.objective, ends.min(mid));

        let bad = user(0, 0.01, 1.0, 1.2, 10.0);
        let p = Problem::new(vec![bad], 100.0, Mode::StateLess).unwrap();
        assert_eq!(grid_oracle_sl(&p, 0.5).unwrap().alpha, vec![0.0]);
    }

    #[test]
    fn grid_respects_capacity() {
        let users: Vec<_> = (0..3).map(|i| user(i, 1.0, 0.01, 1.2, 10.0)).collect();
        let p = Problem::new(users, 15.0, Mode::StateLess).unwrap();
        let s = grid_oracle_sl(&p, 0.05).unwrap();
        assert!(p.load(&s.alpha) <= 15.0 * (1.0 + 1e-12));
        assert!((s.alpha.iter().sum::<f64>() - 1.5).abs() < 1e-9);
    }

    #[test]
    fn grid_rejects_bad_input() {
        let p = Problem::new(vec![user(0, 1.0, 0.01, 1.2, 10.0)], 1.0, Mode::StateLess).unwrap();
        assert!(matches!(
            grid_oracle_sl(&p, 0.3),
            Err(OracleError::BadStep(_))
        ));
        assert!(matches!(
            grid_oracle_sl(&p, 0.0),
            Err(OracleError::BadStep(_))
        ));
        let users: Vec<_> = (0..5).map(|i| user(i, 1.0, 0.01, 1.2, 10.0)).collect();
        let p = Problem::new(users, 1.0, Mode::StateLess).unwrap();
        assert!(matches!(
            grid_oracle_sl_with_budget(&p, 0.01, 1_000_000),
            Err(OracleError::GridTooLarge { .. })
        ));
    }

    #[test]
    fn scalar_oracle_examples() {
        let cfg = ScenarioConfig::default();
        let (k, r): (f64, f64) = (0.01, 1.2);
        assert_eq!(scalar_oracle_sl(&user(0, 0.5 * k, k, r, 1.0), &cfg), 0.0);
        let half = user(0, k * (r / 2.0).exp2(), k, r, 1.0);
        assert!((scalar_oracle_sl(&half, &cfg) - 0.5).abs() < 1e-7);
        let huge = user(0, 1e3 * k * r.exp2(), k, r, 1.0);
        assert_eq!(scalar_oracle_sl(&huge, &cfg), 1.0);
        // A physically placed device gives the same answer through the config route.
        let placed = UserInstance::new(0, 500.0, &cfg, &WorkloadSpec::default());
        assert_eq!(scalar_oracle_sl(&placed, &cfg), 1.0);
    }

    #[test]
    fn subset_oracle_examples() {
        let u = user(0, 1.0, 0.01, 1.2, 10.0);
        let p = Problem::new(vec![u.clone()], 100.0, Mode::StateFull).unwrap();
        assert_eq!(subset_oracle_sf(&p).unwrap().alpha, vec![1.0]);

        // Four identical users, room for two: the first two by lexicographic order.
        let users: Vec<_> = (0..4).map(|i| user(i, 1.0, 0.01, 1.2, 10.0)).collect();
        let p = Problem::new(users, 25.0, Mode::StateFull).unwrap();
        let s = subset_oracle_sf(&p).unwrap();
        assert_eq!(s.alpha.iter().sum::<f64>(), 2.0);

        let users: Vec<_> = (0..16).map(|i| user(i, 1.0, 0.01, 1.2, 10.0)).collect();
        let p = Problem::new(users, 25.0, Mode::StateFull).unwrap();
        assert_eq!(subset_oracle_sf(&p), Err(OracleError::TooManyUsers(16)));
    }

    #[test]
    fn subset_oracle_respects_caps() {
        let capped = UserInstance::from_constants(0, 10.0, 1e-4, 2.0, 1.0, 0.5);
        let p = Problem::new(vec![capped], 10.0, Mode::StateFull).unwrap();
        assert_eq!(subset_oracle_sf(&p).unwrap().alpha, vec![0.0]);
    }
}

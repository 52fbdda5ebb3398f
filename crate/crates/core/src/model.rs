//! Physical and energetic model of a single device.
//!
//! Everything here is a pure function of explicit parameters. Energies are in
//! millijoule throughout; powers are carried in milliwatt internally so that
//! `power * period` lands in millijoule without conversion. The only public
//! quantity expressed in watt is [`TxPower::watts`] and the configured cap.

use std::f64::consts::{LN_2, PI};

use thiserror::Error;

use crate::config::ScenarioConfig;

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Width of one LTE resource block, Hz.
pub const RESOURCE_BLOCK_HZ: f64 = 180e3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("offloading fraction {0} is outside [0, 1]")]
    AlphaOutOfRange(f64),
    #[error("invalid workload: {0}")]
    InvalidWorkload(String),
}

fn check_alpha(alpha: f64) -> Result<(), ModelError> {
    if (0.0..=1.0).contains(&alpha) {
        Ok(())
    } else {
        Err(ModelError::AlphaOutOfRange(alpha))
    }
}

/// Data volume and algorithm complexity of one device's periodic job.
#[derive(Debug, Clone, PartialEq)]
pub struct WorkloadSpec {
    /// Number of data blocks `L`.
    pub blocks: u64,
    /// Data elements per block `M`.
    pub elements: u64,
    /// Bits per element `S`.
    pub bits_per_element: u64,
    /// Device cycles per unit of complexity.
    pub eta_dev: f64,
    /// Server cycles per unit of complexity.
    pub eta_srv: f64,
    /// Energy per device cycle, millijoule.
    pub eps_dev_mj: f64,
    /// Complexity class `f(M) = M^exponent`.
    pub complexity_exponent: f64,
}

impl Default for WorkloadSpec {
    fn default() -> Self {
        Self {
            blocks: 10,
            elements: 60,
            bits_per_element: 8,
            eta_dev: 100.0,
            eta_srv: 1.0,
            eps_dev_mj: 5e-6,
            complexity_exponent: 1.0,
        }
    }
}

impl WorkloadSpec {
    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |msg: &str| Err(ModelError::InvalidWorkload(msg.to_string()));
        if self.blocks == 0 || self.elements == 0 || self.bits_per_element == 0 {
            return bad("L, M and S must all be at least 1");
        }
        if !(self.eta_dev > 0.0 && self.eta_dev.is_finite()) {
            return bad("eta_dev must be positive");
        }
        if !(self.eta_srv > 0.0 && self.eta_srv.is_finite()) {
            return bad("eta_srv must be positive");
        }
        if !(self.eps_dev_mj > 0.0 && self.eps_dev_mj.is_finite()) {
            return bad("eps_dev must be positive");
        }
        if !(self.complexity_exponent >= 1.0 && self.complexity_exponent.is_finite()) {
            return bad("complexity exponent must be >= 1");
        }
        if !self.data_bits().is_finite() {
            return bad("total data volume overflows");
        }
        Ok(())
    }

    /// `f(M)`.
    pub fn complexity(&self) -> f64 {
        (self.elements as f64).powf(self.complexity_exponent)
    }

    /// `D = L * M * S` in bits.
    pub fn data_bits(&self) -> f64 {
        self.blocks as f64 * self.elements as f64 * self.bits_per_element as f64
    }

    /// Server cycles for one block, `eta_srv * f(M)`.
    pub fn server_cycles_per_block(&self) -> f64 {
        self.eta_srv * self.complexity()
    }

    /// Server cycles for the whole job, `L * eta_srv * f(M)`.
    pub fn server_load(&self) -> f64 {
        self.blocks as f64 * self.server_cycles_per_block()
    }
}

/// Device cycles needed to process the whole job locally.
pub fn device_complexity(w: &WorkloadSpec) -> f64 {
    w.blocks as f64 * w.eta_dev * w.complexity()
}

/// Energy spent on the device when a fraction `alpha` is offloaded.
pub fn local_energy(w: &WorkloadSpec, alpha: f64) -> Result<f64, ModelError> {
    check_alpha(alpha)?;
    Ok((1.0 - alpha) * w.eps_dev_mj * device_complexity(w))
}

/// Free-space attenuation constant `(lambda / (4 pi d0))^2`.
pub fn free_space_gain(carrier_hz: f64, ref_distance_m: f64) -> f64 {
    let wavelength = SPEED_OF_LIGHT / carrier_hz;
    (wavelength / (4.0 * PI * ref_distance_m)).powi(2)
}

/// Bandwidth granted to each device under equal FDMA sharing.
///
/// With RB quantization enabled the share is floored to whole 180 kHz blocks.
pub fn user_bandwidth(cfg: &ScenarioConfig) -> f64 {
    let share = cfg.total_bandwidth_hz / cfg.n_users as f64;
    if cfg.rb_quantization {
        (share / RESOURCE_BLOCK_HZ).floor() * RESOURCE_BLOCK_HZ
    } else {
        share
    }
}

/// Which bound limits a device's offloading fraction from above.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AlphaLimit {
    /// The box constraint `alpha <= 1`.
    Unit,
    /// `alpha * r <= max_spectral_eff`.
    Rate,
    /// Required transmit power would exceed the configured cap.
    Power,
}

/// One placed device and all per-device constants derived from it.
#[derive(Debug, Clone, PartialEq)]
pub struct UserInstance {
    pub id: usize,
    pub distance_m: f64,
    pub bandwidth_hz: f64,
    pub data_bits: f64,
    /// Energy to process everything locally, millijoule.
    pub local_energy_mj: f64,
    /// Marginal transmit-energy constant `K`, millijoule.
    pub tx_const_mj: f64,
    /// Spectral efficiency needed for full offload, bits/s/Hz.
    pub rate: f64,
    /// Server cycles for the full job, `L * C_serv`.
    pub server_load: f64,
    /// Received-noise-referred pathloss `(d/d0)^beta * N0 / G`, mW/Hz.
    pub channel_coeff: f64,
    pub period_s: f64,
    /// Largest admissible offloading fraction after rate and power caps.
    pub alpha_max: f64,
    pub alpha_limit: AlphaLimit,
}

impl UserInstance {
    /// Derives every per-device constant for a device at `distance_m`.
    pub fn new(id: usize, distance_m: f64, cfg: &ScenarioConfig, w: &WorkloadSpec) -> Self {
        let gain = free_space_gain(cfg.carrier_hz, cfg.ref_distance_m);
        let bandwidth_hz = user_bandwidth(cfg);
        let data_bits = w.data_bits();
        let channel_coeff = (distance_m / cfg.ref_distance_m).powf(cfg.pathloss_exp)
            * cfg.noise_density_mw_per_hz
            / gain;
        let rate = if bandwidth_hz > 0.0 {
            data_bits / (bandwidth_hz * cfg.period_s)
        } else {
            f64::INFINITY
        };
        let mut user = Self {
            id,
            distance_m,
            bandwidth_hz,
            data_bits,
            local_energy_mj: w.eps_dev_mj * device_complexity(w),
            tx_const_mj: LN_2 * channel_coeff * data_bits,
            rate,
            server_load: w.server_load(),
            channel_coeff,
            period_s: cfg.period_s,
            alpha_max: 1.0,
            alpha_limit: AlphaLimit::Unit,
        };
        let (alpha_max, limit) = alpha_cap(&user, cfg);
        user.alpha_max = alpha_max;
        user.alpha_limit = limit;
        user
    }

    /// Builds a device directly from its energy constants.
    ///
    /// Bandwidth and period are normalised to 1, so `data_bits == rate`.
    /// The offloading fraction is capped at `alpha_max` and attributed to the
    /// rate limit when below 1.
    pub fn from_constants(
        id: usize,
        local_energy_mj: f64,
        tx_const_mj: f64,
        rate: f64,
        server_load: f64,
        alpha_max: f64,
    ) -> Self {
        Self {
            id,
            distance_m: f64::NAN,
            bandwidth_hz: 1.0,
            data_bits: rate,
            local_energy_mj,
            tx_const_mj,
            rate,
            server_load,
            channel_coeff: tx_const_mj / (LN_2 * rate),
            period_s: 1.0,
            alpha_max,
            alpha_limit: if alpha_max < 1.0 {
                AlphaLimit::Rate
            } else {
                AlphaLimit::Unit
            },
        }
    }

    /// Transmit energy for fraction `alpha` from the cached constants:
    /// `K (2^(alpha r) - 1) / (r ln 2)`.
    pub fn tx_energy_mj(&self, alpha: f64) -> f64 {
        (alpha * self.rate).exp2_m1() * self.channel_coeff * self.bandwidth_hz * self.period_s
    }
}

trait Exp2M1 {
    fn exp2_m1(self) -> f64;
}

impl Exp2M1 for f64 {
    // 2^x - 1 without cancellation for small x.
    fn exp2_m1(self) -> f64 {
        (self * LN_2).exp_m1()
    }
}

/// Upper bound on a device's offloading fraction from the unit box, the
/// spectral-efficiency cap and the transmit-power cap, whichever is tightest.
pub fn alpha_cap(u: &UserInstance, cfg: &ScenarioConfig) -> (f64, AlphaLimit) {
    if u.data_bits <= 0.0 {
        return (0.0, AlphaLimit::Unit);
    }
    let mut cap = (1.0, AlphaLimit::Unit);
    let rate_cap = cfg.max_spectral_eff / u.rate;
    if rate_cap < cap.0 {
        cap = (rate_cap, AlphaLimit::Rate);
    }
    if let Some(max_w) = cfg.max_tx_power_w {
        // Invert P(alpha) = (2^(alpha r) - 1) * coeff * B_i for P = cap.
        let headroom = max_w * 1e3 / (u.channel_coeff * u.bandwidth_hz);
        let power_cap = (headroom.ln_1p() / LN_2) / u.rate;
        if power_cap < cap.0 {
            cap = (power_cap.max(0.0), AlphaLimit::Power);
        }
    }
    cap
}

/// Required transmit power, with the cap check reported alongside.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TxPower {
    pub watts: f64,
    pub over_cap: bool,
}

pub fn required_tx_power(
    u: &UserInstance,
    alpha: f64,
    cfg: &ScenarioConfig,
) -> Result<TxPower, ModelError> {
    check_alpha(alpha)?;
    let milliwatts = (alpha * u.rate).exp2_m1() * u.channel_coeff * u.bandwidth_hz;
    let watts = milliwatts * 1e-3;
    let over_cap = cfg.max_tx_power_w.is_some_and(|cap| watts > cap);
    Ok(TxPower { watts, over_cap })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TxEnergy {
    pub millijoule: f64,
    pub over_cap: bool,
}

pub fn tx_energy(
    u: &UserInstance,
    alpha: f64,
    cfg: &ScenarioConfig,
) -> Result<TxEnergy, ModelError> {
    let power = required_tx_power(u, alpha, cfg)?;
    Ok(TxEnergy {
        // W * s = J; report mJ.
        millijoule: power.watts * 1e3 * u.period_s,
        over_cap: power.over_cap,
    })
}

/// Per-device energy split for a given offloading fraction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyBreakdown {
    pub alpha: f64,
    pub local: f64,
    pub transmit: f64,
    pub total: f64,
    pub over_power_cap: bool,
}

pub fn sum_energy(
    u: &UserInstance,
    alpha: f64,
    cfg: &ScenarioConfig,
) -> Result<EnergyBreakdown, ModelError> {
    check_alpha(alpha)?;
    let local = (1.0 - alpha) * u.local_energy_mj;
    let tx = tx_energy(u, alpha, cfg)?;
    Ok(EnergyBreakdown {
        alpha,
        local,
        transmit: tx.millijoule,
        total: local + tx.millijoule,
        over_power_cap: tx.over_cap,
    })
}

/// Energy split computed from the cached per-device constants only.
///
/// Used by the solvers, which never see the scenario config.
pub fn breakdown(u: &UserInstance, alpha: f64) -> EnergyBreakdown {
    let local = (1.0 - alpha) * u.local_energy_mj;
    let transmit = if alpha > 0.0 {
        u.tx_energy_mj(alpha)
    } else {
        0.0
    };
    EnergyBreakdown {
        alpha,
        local,
        transmit,
        total: local + transmit,
        over_power_cap: alpha > u.alpha_max && u.alpha_limit == AlphaLimit::Power,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table1_user(distance: f64) -> (UserInstance, ScenarioConfig, WorkloadSpec) {
        let cfg = ScenarioConfig::default();
        let w = WorkloadSpec::default();
        (UserInstance::new(0, distance, &cfg, &w), cfg, w)
    }

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
    }

    #[test]
    fn device_complexity_examples() {
        let w = WorkloadSpec::default();
        assert_eq!(device_complexity(&w), 60_000.0);
        let ones = WorkloadSpec {
            blocks: 1,
            elements: 1,
            eta_dev: 1.0,
            ..WorkloadSpec::default()
        };
        assert_eq!(device_complexity(&ones), 1.0);
        let big = WorkloadSpec {
            elements: 300,
            ..WorkloadSpec::default()
        };
        assert_eq!(device_complexity(&big), 300_000.0);
    }

    #[test]
    fn local_energy_examples() {
        let w = WorkloadSpec::default();
        assert!(rel(local_energy(&w, 0.0).unwrap(), 0.3) < 1e-14);
        assert!(rel(50.0 * local_energy(&w, 0.0).unwrap(), 15.0) < 1e-14);
        assert_eq!(local_energy(&w, 1.0).unwrap(), 0.0);
        assert!(rel(local_energy(&w, 0.5).unwrap(), 0.15) < 1e-14);
        assert_eq!(local_energy(&w, 1.5), Err(ModelError::AlphaOutOfRange(1.5)));
        assert!(local_energy(&w, -0.1).is_err());
    }

    #[test]
    fn free_space_gain_examples() {
        // lambda = 4 pi d0 gives unit gain.
        let carrier = SPEED_OF_LIGHT / (4.0 * PI * 2.0);
        assert!((free_space_gain(carrier, 2.0) - 1.0).abs() < 1e-12);
        // Hand-computed with c = 299792458 m/s.
        let g = free_space_gain(2e9, 200.0);
        assert!(rel(g, 3.557_146_035_714_656_4e-9) < 1e-12);
        assert!(rel(free_space_gain(2e9, 400.0), g / 4.0) < 1e-12);
    }

    #[test]
    fn required_tx_power_examples() {
        let (u, cfg, _) = table1_user(200.0);
        assert_eq!(required_tx_power(&u, 0.0, &cfg).unwrap().watts, 0.0);
        let p1 = required_tx_power(&u, 1.0, &cfg).unwrap();
        // (2^1.2 - 1) * N0 * B_i / G, hand-computed.
        assert!(rel(p1.watts, 2.904_029_961_746_498e-7) < 1e-10);
        assert!(!p1.over_cap);
        let p_half = required_tx_power(&u, 0.5, &cfg).unwrap().watts;
        let p_quarter = required_tx_power(&u, 0.25, &cfg).unwrap().watts;
        assert!(p_half > 2.0 * p_quarter);
        assert!(p1.watts > 2.0 * p_half);
    }

    #[test]
    fn power_cap_is_reported_not_enforced() {
        let (_, mut cfg, w) = table1_user(200.0);
        cfg.max_tx_power_w = Some(1e-8);
        let u = UserInstance::new(0, 200.0, &cfg, &w);
        let p = required_tx_power(&u, 1.0, &cfg).unwrap();
        assert!(p.over_cap);
        assert!(p.watts > 1e-8);
        assert_eq!(u.alpha_limit, AlphaLimit::Power);
        // At the inverted cap the power sits exactly on the limit.
        let at_cap = required_tx_power(&u, u.alpha_max, &cfg).unwrap();
        assert!(rel(at_cap.watts, 1e-8) < 1e-9);
    }

    #[test]
    fn rate_cap_limits_alpha() {
        let cfg = ScenarioConfig::default();
        let w = WorkloadSpec {
            elements: 600,
            ..WorkloadSpec::default()
        };
        let u = UserInstance::new(0, 400.0, &cfg, &w);
        assert!(rel(u.rate, 12.0) < 1e-12);
        assert_eq!(u.alpha_limit, AlphaLimit::Rate);
        assert!(rel(u.alpha_max, 0.5) < 1e-12);
    }

    #[test]
    fn tx_energy_examples() {
        let (near, cfg, w) = table1_user(300.0);
        let far = UserInstance::new(1, 600.0, &cfg, &w);
        assert_eq!(tx_energy(&near, 0.0, &cfg).unwrap().millijoule, 0.0);
        for alpha in [0.01, 0.3, 1.0] {
            let a = tx_energy(&near, alpha, &cfg).unwrap().millijoule;
            let b = tx_energy(&far, alpha, &cfg).unwrap().millijoule;
            assert!(b > a);
        }
        let e1 = tx_energy(&near, 1.0, &cfg).unwrap().millijoule;
        assert!(rel(e1, near.tx_energy_mj(1.0)) < 1e-12);
    }

    #[test]
    fn marginal_matches_finite_differences() {
        let (u, cfg, _) = table1_user(517.0);
        let h = 1e-5;
        for i in 1..20 {
            let alpha = 0.05 * i as f64;
            let fwd = tx_energy(&u, alpha + h, &cfg).unwrap().millijoule;
            let bwd = tx_energy(&u, alpha - h, &cfg).unwrap().millijoule;
            let fd = (fwd - bwd) / (2.0 * h);
            let analytic = u.tx_const_mj * (alpha * u.rate).exp2();
            assert!(
                rel(fd, analytic) < 1e-6,
                "alpha={alpha}: {fd} vs {analytic}"
            );
        }
    }

    #[test]
    fn sum_energy_endpoints() {
        let (u, cfg, _) = table1_user(450.0);
        let none = sum_energy(&u, 0.0, &cfg).unwrap();
        assert_eq!(none.total, u.local_energy_mj);
        assert_eq!(none.transmit, 0.0);
        let all = sum_energy(&u, 1.0, &cfg).unwrap();
        assert_eq!(all.local, 0.0);
        assert_eq!(all.total, tx_energy(&u, 1.0, &cfg).unwrap().millijoule);
    }

    #[test]
    fn endpoint_minimum_bounds_grid_optimum() {
        let (u, cfg, _) = table1_user(800.0);
        let endpoints = sum_energy(&u, 0.0, &cfg)
            .unwrap()
            .total
            .min(sum_energy(&u, 1.0, &cfg).unwrap().total);
        let grid_min = (0..=1000)
            .map(|k| sum_energy(&u, k as f64 * 1e-3, &cfg).unwrap().total)
            .fold(f64::INFINITY, f64::min);
        assert!(grid_min <= endpoints);
    }

    #[test]
    fn breakdown_agrees_with_config_route() {
        let (u, cfg, _) = table1_user(731.0);
        for alpha in [0.0, 0.2, 0.77, 1.0] {
            let a = breakdown(&u, alpha);
            let b = sum_energy(&u, alpha, &cfg).unwrap();
            assert!((a.total - b.total).abs() <= 1e-15 * b.total.max(1.0));
        }
    }

    #[test]
    fn rb_quantization_floors_bandwidth() {
        let mut cfg = ScenarioConfig::default();
        assert_eq!(user_bandwidth(&cfg), 200e3);
        cfg.rb_quantization = true;
        assert_eq!(user_bandwidth(&cfg), 180e3);
    }

    #[test]
    fn workload_validation() {
        assert!(WorkloadSpec::default().validate().is_ok());
        let w = WorkloadSpec {
            blocks: 0,
            ..WorkloadSpec::default()
        };
        assert!(w.validate().is_err());
        let w = WorkloadSpec {
            eps_dev_mj: 0.0,
            ..WorkloadSpec::default()
        };
        assert!(w.validate().is_err());
    }
}

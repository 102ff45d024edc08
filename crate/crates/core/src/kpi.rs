//! Delay, battery lifetime, energy and spectral efficiency, and transmit power.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::{db_to_linear, EnergyParams, SystemParams};

/// Key performance indicators of one operating point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KpiReport {
    pub outage: f64,
    /// Seconds from arrival to successful reception.
    pub expected_delay: f64,
    /// Seconds.
    pub battery_lifetime: f64,
    /// Useful bits per joule.
    pub energy_efficiency: f64,
    /// Bits/s/Hz.
    pub spectral_efficiency: f64,
    /// Delivered packets/s.
    pub throughput: f64,
    /// Watts.
    pub avg_tx_power: f64,
}

/// `ED = (M Tp + Tack) / (1 - Po) - Tack`; infinite when `Po >= 1`.
pub fn expected_delay(po: f64, p: &SystemParams) -> f64 {
    if po >= 1.0 {
        return f64::INFINITY;
    }
    (p.frame_duration() + p.ack_wait) / (1.0 - po.max(0.0)) - p.ack_wait
}

/// Transmit power needed at distance `r` under channel inversion:
/// `gamma N0 W Gamma r^sigma / G`.
pub fn tx_power_at(r: f64, e: &EnergyParams, p: &SystemParams) -> f64 {
    p.required_snr * p.noise_density * p.bandwidth * p.snr_gap * r.powf(e.pathloss_exponent)
        / e.antenna_gain
}

/// Cell-average of [`tx_power_at`] for devices uniform on a disc of radius
/// `Rc`: `2 Rc^sigma gamma N0 W Gamma / (G (sigma + 2))`.
pub fn avg_transmit_power(e: &EnergyParams, p: &SystemParams) -> f64 {
    let s = e.pathloss_exponent;
    2.0 * e.cell_radius.powf(s) * p.required_snr * p.noise_density * p.bandwidth * p.snr_gap
        / (e.antenna_gain * (s + 2.0))
}

/// Transmit power from the dB link budget.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkBudgetPower {
    /// Power actually used, after clamping to `[min, max]`.
    pub watts: f64,
    /// Power the link would need without clamping.
    pub required: f64,
    /// The required power exceeds the device maximum.
    pub coverage_limited: bool,
}

/// Pathloss in dB at distance `d` metres:
/// `intercept + 10 sigma log10(d / 1000)`.
pub fn pathloss_db(d: f64, e: &EnergyParams) -> f64 {
    e.pathloss_intercept_db + 10.0 * e.pathloss_exponent * (d / 1000.0).log10()
}

/// `gamma N0 W 10^((PL(d) + margin) / 10)`, clamped to the device power range.
pub fn tx_power_db_model(d: f64, e: &EnergyParams, p: &SystemParams) -> LinkBudgetPower {
    let loss = db_to_linear(pathloss_db(d, e) + e.link_margin_db);
    let required = p.required_snr * p.noise_density * p.bandwidth * loss;
    let coverage_limited = required > e.max_tx_power;
    if coverage_limited {
        log::warn!("device at {d:.0} m needs {required:.3e} W, above the {:.3e} W limit", e.max_tx_power);
    }
    LinkBudgetPower { watts: required.clamp(e.min_tx_power, e.max_tx_power), required, coverage_limited }
}

/// Energy of one transmission attempt of a virtual frame:
/// `(Pc + alpha Pt) N Tp + Pc (M - N) Tp + Pc Tack`.
pub fn attempt_energy(e: &EnergyParams, p: &SystemParams, avg_pt: f64) -> f64 {
    let tp = p.packet_duration;
    let (n, m) = (p.replicas as f64, p.slots as f64);
    (e.circuit_power + e.pa_inefficiency * avg_pt) * n * tp
        + e.circuit_power * (m - n) * tp
        + e.circuit_power * p.ack_wait
}

/// How retransmissions enter the lifetime expression.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum LifetimeMode {
    /// Expected number of attempts `1 / (1 - Po)`.
    #[default]
    Corrected,
    /// The printed factor `1 / Po`.
    PaperLiteral,
}

/// `L = E0 Tr / (Est + k * attempt_energy)` with `k = 1/(1-Po)` (corrected)
/// or `k = 1/Po` (paper-literal).
pub fn battery_lifetime(
    po: f64,
    e: &EnergyParams,
    p: &SystemParams,
    avg_pt: f64,
    mode: LifetimeMode,
) -> Result<f64> {
    let factor = match mode {
        LifetimeMode::Corrected => {
            if po >= 1.0 {
                return Ok(0.0);
            }
            1.0 / (1.0 - po.max(0.0))
        }
        LifetimeMode::PaperLiteral => {
            if po <= 0.0 {
                return Err(Error::Degenerate("1/Po lifetime factor undefined at Po = 0".into()));
            }
            1.0 / po
        }
    };
    Ok(e.battery * e.report_period / (e.static_energy + factor * attempt_energy(e, p, avg_pt)))
}

/// Useful bits per joule: `(1 - Po)(D - Doh) / attempt_energy`.
pub fn energy_efficiency(po: f64, e: &EnergyParams, p: &SystemParams, avg_pt: f64) -> f64 {
    (1.0 - po).clamp(0.0, 1.0) * p.payload_bits() as f64 / attempt_energy(e, p, avg_pt)
}

/// `lambda (D - Doh) / (2 (Fm + W/2))`.
pub fn spectral_efficiency(lambda: f64, p: &SystemParams) -> f64 {
    lambda.max(0.0) * p.payload_bits() as f64 / (2.0 * (p.max_cfo + 0.5 * p.bandwidth))
}

/// [`spectral_efficiency`] counting only successfully received packets.
pub fn spectral_efficiency_delivered(lambda: f64, po: f64, p: &SystemParams) -> f64 {
    spectral_efficiency(lambda, p) * (1.0 - po).clamp(0.0, 1.0)
}

/// Full grant-free KPI set at outage `po`, new-packet rate `lambda` and replica rate `g`.
pub fn grant_free_report(
    po: f64,
    lambda: f64,
    replica_rate: f64,
    e: &EnergyParams,
    p: &SystemParams,
    avg_pt: f64,
    mode: LifetimeMode,
) -> Result<KpiReport> {
    Ok(KpiReport {
        outage: po,
        expected_delay: expected_delay(po, p),
        battery_lifetime: battery_lifetime(po, e, p, avg_pt, mode)?,
        energy_efficiency: energy_efficiency(po, e, p, avg_pt),
        spectral_efficiency: spectral_efficiency(lambda, p),
        throughput: replica_rate * (1.0 - po).clamp(0.0, 1.0) / p.replicas as f64,
        avg_tx_power: avg_pt,
    })
}

/// Random-access channel of the granted baseline.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RaConfig {
    /// Preamble opportunities per RA period.
    pub opportunities: usize,
    /// Seconds between RA periods.
    pub period: f64,
    /// Preamble transmission time per attempt, s.
    pub preamble_duration: f64,
    /// Listening window for the RA response per attempt, s.
    pub response_window: f64,
    /// Attempts before a report is dropped.
    pub max_attempts: usize,
}

impl Default for RaConfig {
    fn default() -> Self {
        Self {
            opportunities: 10,
            period: 2.0,
            preamble_duration: 1e-3,
            response_window: 10e-3,
            max_attempts: 50,
        }
    }
}

/// Energy of a granted report with `attempts` RA attempts, excluding `Est`:
/// synchronisation, RA attempts, one data packet and the ACK wait.
pub fn granted_access_energy(
    attempts: f64,
    e: &EnergyParams,
    p: &SystemParams,
    ra: &RaConfig,
    avg_pt: f64,
) -> f64 {
    let tx = e.circuit_power + e.pa_inefficiency * avg_pt;
    let per_attempt = tx * ra.preamble_duration + e.circuit_power * ra.response_window;
    e.sync_energy
        + e.circuit_power * e.sync_delay
        + attempts * per_attempt
        + tx * p.packet_duration
        + e.circuit_power * p.ack_wait
}

/// Steady-state contention on the RA channel at new-report rate `lambda`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RaContention {
    /// Devices contending per RA period.
    pub contenders: f64,
    /// Probability that one attempt succeeds.
    pub success: f64,
    /// Channel cannot carry the offered reports.
    pub overloaded: bool,
}

/// Solves `lambda T = c (1 - 1/K)^(c - 1)` on the stable branch for the
/// number of contenders `c`.
pub fn ra_contention(lambda: f64, ra: &RaConfig) -> RaContention {
    let k = ra.opportunities as f64;
    let arrivals = lambda.max(0.0) * ra.period;
    if arrivals == 0.0 {
        return RaContention { contenders: 0.0, success: 1.0, overloaded: false };
    }
    let q = 1.0 - 1.0 / k;
    let throughput = |c: f64| c * q.powf(c - 1.0);
    let peak = if q > 0.0 { -1.0 / q.ln() } else { 1.0 };
    if k <= 1.0 {
        // a single opportunity succeeds only without competitors
        let overloaded = arrivals >= 1.0;
        return RaContention { contenders: arrivals, success: if overloaded { 0.0 } else { 1.0 - arrivals }, overloaded };
    }
    if arrivals >= throughput(peak) {
        return RaContention { contenders: peak, success: q.powf(peak - 1.0), overloaded: true };
    }
    let (mut lo, mut hi) = (0.0, peak);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if throughput(mid) < arrivals {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let c = 0.5 * (lo + hi);
    RaContention { contenders: c, success: q.powf((c - 1.0).max(0.0)), overloaded: false }
}

/// Analytic KPI set of the granted baseline.
pub fn granted_report(
    lambda: f64,
    e: &EnergyParams,
    p: &SystemParams,
    ra: &RaConfig,
    avg_pt: f64,
) -> KpiReport {
    let c = ra_contention(lambda, ra);
    let attempts = if c.success > 0.0 { 1.0 / c.success } else { f64::INFINITY };
    let energy = granted_access_energy(attempts, e, p, ra, avg_pt);
    let delay = e.sync_delay + 0.5 * ra.period + (attempts - 1.0) * ra.period + p.packet_duration;
    KpiReport {
        outage: 1.0 - c.success,
        expected_delay: if c.overloaded { f64::INFINITY } else { delay },
        battery_lifetime: e.battery * e.report_period / (e.static_energy + energy),
        energy_efficiency: if c.overloaded { 0.0 } else { p.payload_bits() as f64 / energy },
        spectral_efficiency: spectral_efficiency(lambda, p),
        throughput: if c.overloaded { c.contenders * c.success / ra.period } else { lambda },
        avg_tx_power: avg_pt,
    }
}

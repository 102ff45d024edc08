//! Repeated trials over a grid of operating points, run in parallel.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::granted::run_granted_baseline;
use super::sic::SicConfig;
use super::trial::{run_trial, TrialConfig, TrialResult};
use crate::error::Result;
use crate::kpi::{KpiReport, RaConfig};
use crate::params::{EnergyParams, SystemParams};
use crate::traffic::substream;

/// Which access scheme a cell simulates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "scheme")]
pub enum Scheme {
    GrantFree { sic: SicConfig },
    Granted { ra: RaConfig },
}

/// One operating point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    /// Nominal x-axis value of the row.
    pub load: f64,
    /// New-packet rate, packets/s.
    pub lambda: f64,
    /// Replicas per packet; `M` follows the `2N` rule.
    pub replicas: usize,
    pub scheme: Scheme,
}

/// Sample mean with the half-width of a normal 95% interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct Estimate {
    pub mean: f64,
    pub ci95: f64,
    pub samples: usize,
}

impl Estimate {
    pub fn from_samples(xs: &[f64]) -> Self {
        let xs: Vec<f64> = xs.iter().copied().filter(|x| x.is_finite()).collect();
        let n = xs.len();
        if n == 0 {
            return Self { mean: f64::NAN, ci95: f64::NAN, samples: 0 };
        }
        let mean = xs.iter().sum::<f64>() / n as f64;
        let ci95 = if n > 1 {
            let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            1.96 * (var / n as f64).sqrt()
        } else {
            0.0
        };
        Self { mean, ci95, samples: n }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub cell: SweepCell,
    pub reps: usize,
    pub packets: usize,
    pub offered_load: Estimate,
    pub outage: Estimate,
    pub delay: Estimate,
    pub lifetime: Estimate,
    pub energy_efficiency: Estimate,
    pub spectral_efficiency: Estimate,
    pub throughput: Estimate,
}

/// Trial settings shared by every cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSettings {
    /// New packets per trial; the horizon is `packets / lambda`.
    pub packets_per_trial: f64,
    pub max_retries: usize,
    pub avg_tx_power: f64,
    /// See [`TrialConfig::retry_jitter`].
    pub retry_jitter: f64,
}

impl Default for SweepSettings {
    fn default() -> Self {
        Self { packets_per_trial: 20_000.0, max_retries: 5, avg_tx_power: 1e-3, retry_jitter: 0.0 }
    }
}

fn run_cell(
    cell: &SweepCell,
    base: &SystemParams,
    e: &EnergyParams,
    s: &SweepSettings,
    seed: u64,
    stream: u64,
) -> Result<TrialResult> {
    let p = base.clone().with_replicas(cell.replicas);
    let mut rng = substream(seed, stream);
    let frame = p.frame_duration();
    let horizon = TrialConfig::horizon_for_packets(cell.lambda, s.packets_per_trial).max(100.0 * frame);
    match cell.scheme {
        Scheme::GrantFree { sic } => {
            let cfg = TrialConfig {
                lambda: cell.lambda,
                horizon,
                sic,
                max_retries: s.max_retries,
                avg_tx_power: s.avg_tx_power,
                collect_interference: false,
                retry_jitter: s.retry_jitter,
            };
            run_trial(&mut rng, &p, e, &cfg)
        }
        Scheme::Granted { ra } => run_granted_baseline(&mut rng, cell.lambda, horizon, &p, e, &ra, s.avg_tx_power),
    }
}

/// Runs `reps` independent trials per cell. Trial `r` of cell `c` uses RNG
/// stream `(c << 20) | r`, so the output depends only on the inputs and
/// `seed`, not on scheduling.
pub fn sweep(
    cells: &[SweepCell],
    reps: usize,
    base: &SystemParams,
    e: &EnergyParams,
    settings: &SweepSettings,
    seed: u64,
) -> Result<Vec<SweepRow>> {
    let reps = reps.max(1);
    let jobs: Vec<(usize, usize)> = (0..cells.len()).flat_map(|c| (0..reps).map(move |r| (c, r))).collect();
    let results: Vec<TrialResult> = jobs
        .par_iter()
        .map(|&(c, r)| run_cell(&cells[c], base, e, settings, seed, ((c as u64) << 20) | r as u64))
        .collect::<Result<_>>()?;
    Ok(cells
        .iter()
        .enumerate()
        .map(|(c, cell)| {
            let trials = &results[c * reps..(c + 1) * reps];
            let kpis: Vec<KpiReport> = trials.iter().filter_map(|t| t.kpi).collect();
            let col = |f: fn(&KpiReport) -> f64| Estimate::from_samples(&kpis.iter().map(f).collect::<Vec<_>>());
            SweepRow {
                cell: *cell,
                reps,
                packets: trials.iter().map(|t| t.packets).sum(),
                offered_load: Estimate::from_samples(&trials.iter().map(|t| t.offered_load).collect::<Vec<_>>()),
                outage: col(|k| k.outage),
                delay: col(|k| k.expected_delay),
                lifetime: col(|k| k.battery_lifetime),
                energy_efficiency: col(|k| k.energy_efficiency),
                spectral_efficiency: col(|k| k.spectral_efficiency),
                throughput: col(|k| k.throughput),
            }
        })
        .collect())
}

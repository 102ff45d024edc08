//! Figure tables and the run summary. Column meanings are in `docs/csv.md`.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use gfra_core::kpi::KpiReport;
use gfra_core::sim::Estimate;
use gfra_core::{Result, SystemParams};
use serde::{Deserialize, Serialize};

use crate::config::{ExperimentConfig, Modes};
use crate::experiment::{Empirical, Row};
use crate::power::PowerStats;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Figure {
    Ee,
    Lifetime,
    Delay,
    Se,
    Reliability,
}

impl Figure {
    pub const ALL: [Figure; 5] = [Figure::Ee, Figure::Lifetime, Figure::Delay, Figure::Se, Figure::Reliability];

    pub fn name(self) -> &'static str {
        match self {
            Figure::Ee => "ee",
            Figure::Lifetime => "lifetime",
            Figure::Delay => "delay",
            Figure::Se => "se",
            Figure::Reliability => "reliability",
        }
    }

    pub fn file_name(self) -> String {
        format!("fig-{}.csv", self.name())
    }
}

impl FromStr for Figure {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let s = s.trim().trim_start_matches("fig-");
        Figure::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| format!("unknown figure '{s}' (ee, lifetime, delay, se, reliability)"))
    }
}

/// A KPI compared between the two access schemes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Kpi {
    EnergyEfficiency,
    BatteryLifetime,
    ExpectedDelay,
    SpectralEfficiency,
}

impl Kpi {
    fn figure(self) -> Figure {
        match self {
            Kpi::EnergyEfficiency => Figure::Ee,
            Kpi::BatteryLifetime => Figure::Lifetime,
            Kpi::ExpectedDelay => Figure::Delay,
            Kpi::SpectralEfficiency => Figure::Se,
        }
    }

    fn higher_is_better(self) -> bool {
        !matches!(self, Kpi::ExpectedDelay)
    }

    fn analytic(self, k: &KpiReport, p: &SystemParams) -> f64 {
        match self {
            Kpi::EnergyEfficiency => k.energy_efficiency,
            Kpi::BatteryLifetime => k.battery_lifetime,
            Kpi::ExpectedDelay => k.expected_delay,
            Kpi::SpectralEfficiency => delivered_se(k.throughput, p),
        }
    }

    fn empirical(self, e: &Empirical, p: &SystemParams) -> Estimate {
        match self {
            Kpi::EnergyEfficiency => e.energy_efficiency,
            Kpi::BatteryLifetime => e.lifetime,
            Kpi::ExpectedDelay => e.delay,
            Kpi::SpectralEfficiency => {
                let s = delivered_se(1.0, p);
                Estimate { mean: e.throughput.mean * s, ci95: e.throughput.ci95 * s, samples: e.throughput.samples }
            }
        }
    }
}

/// Delivered payload bits/s/Hz over the band replicas can occupy.
fn delivered_se(throughput: f64, p: &SystemParams) -> f64 {
    throughput * p.payload_bits() as f64 / p.occupied_band()
}

fn params_of(cfg: &ExperimentConfig, r: &Row) -> SystemParams {
    crate::config::replica_params(&cfg.system, r.replicas)
}

const KPI_HEADER: [&str; 15] = [
    "load",
    "replicas",
    "slots",
    "policy",
    "coding_rate",
    "lambda",
    "fixed_point",
    "divergent",
    "grant_free_analytic",
    "grant_free_empirical",
    "grant_free_ci95",
    "granted_analytic",
    "granted_empirical",
    "granted_ci95",
    "packets",
];

const RELIABILITY_HEADER: [&str; 15] = [
    "load",
    "replicas",
    "slots",
    "policy",
    "coding_rate",
    "lambda",
    "replica_rate",
    "analytic_model",
    "analytic_success",
    "empirical_success",
    "empirical_ci95",
    "empirical_offered_load",
    "packets",
    "fixed_point",
    "divergent",
];

fn num(x: f64) -> String {
    format!("{x}")
}

fn model_name(r: &Row) -> String {
    serde_json::to_value(r.analytic_model).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default()
}

fn write_table(path: &Path, header: &[&str], rows: impl Iterator<Item = Vec<String>>) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(std::io::Error::from)?;
    w.write_record(header).map_err(std::io::Error::from)?;
    for r in rows {
        w.write_record(&r).map_err(std::io::Error::from)?;
    }
    w.flush()?;
    Ok(())
}

fn kpi_record(cfg: &ExperimentConfig, r: &Row, kpi: Kpi) -> Vec<String> {
    let p = params_of(cfg, r);
    let gf = kpi.empirical(&r.empirical, &p);
    let gr = kpi.empirical(&r.granted_empirical, &p);
    vec![
        num(r.load),
        r.replicas.to_string(),
        r.slots.to_string(),
        r.policy.policy.as_str().to_string(),
        num(r.policy.coding_rate),
        num(r.lambda),
        r.fixed_point.as_str().to_string(),
        r.divergent.to_string(),
        num(kpi.analytic(&r.analytic, &p)),
        num(gf.mean),
        num(gf.ci95),
        num(kpi.analytic(&r.granted_analytic, &p)),
        num(gr.mean),
        num(gr.ci95),
        r.empirical.packets.to_string(),
    ]
}

fn reliability_record(r: &Row) -> Vec<String> {
    let o = r.reliability.outage;
    vec![
        num(r.load),
        r.replicas.to_string(),
        r.slots.to_string(),
        r.policy.policy.as_str().to_string(),
        num(r.policy.coding_rate),
        num(r.lambda),
        num(r.replica_rate),
        model_name(r),
        num(1.0 - r.analytic.outage),
        num(1.0 - o.mean),
        num(o.ci95),
        num(r.reliability.offered_load.mean),
        r.reliability.packets.to_string(),
        r.fixed_point.as_str().to_string(),
        r.divergent.to_string(),
    ]
}

/// A change of the better scheme between two neighbouring loads.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Crossing {
    /// Linear interpolation of the zero of the difference.
    pub load: f64,
    /// Scheme that is better above `load`.
    pub towards: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Crossover {
    pub kpi: Kpi,
    pub replicas: usize,
    pub policy: String,
    /// `analytic` or `empirical`.
    pub source: String,
    /// Loads at which the granted baseline is strictly better.
    pub granted_better_loads: Vec<f64>,
    pub crossings: Vec<Crossing>,
}

/// Finds where the better scheme flips along ascending `loads`. `diff` is
/// positive where grant-free is better; `None` marks a tie or a missing value.
pub fn crossings(loads: &[f64], diff: &[Option<f64>]) -> Vec<Crossing> {
    let mut out = Vec::new();
    let mut last: Option<(f64, f64)> = None;
    for (&l, d) in loads.iter().zip(diff) {
        let Some(d) = *d else { continue };
        if let Some((l0, d0)) = last {
            if d0.signum() != d.signum() {
                let load = l0 + (l - l0) * d0 / (d0 - d);
                let towards = if d > 0.0 { "grant-free" } else { "granted" };
                out.push(Crossing { load, towards: towards.into() });
            }
        }
        last = Some((l, d));
    }
    out
}

fn crossovers_for(cfg: &ExperimentConfig, rows: &[&Row], kpi: Kpi) -> [Crossover; 2] {
    let sign = if kpi.higher_is_better() { 1.0 } else { -1.0 };
    let loads: Vec<f64> = rows.iter().map(|r| r.load).collect();
    let decisive = |d: f64| (d.is_finite() && d != 0.0).then_some(d);
    let analytic: Vec<Option<f64>> = rows
        .iter()
        .map(|r| {
            let p = params_of(cfg, r);
            let (a, b) = (kpi.analytic(&r.analytic, &p), kpi.analytic(&r.granted_analytic, &p));
            // infinite delays compare by which side is infinite
            match (a.is_finite(), b.is_finite()) {
                (true, true) => decisive(sign * (a - b)),
                (false, true) if a.is_infinite() => Some(if kpi.higher_is_better() { 1.0 } else { -1.0 }),
                (true, false) if b.is_infinite() => Some(if kpi.higher_is_better() { -1.0 } else { 1.0 }),
                _ => None,
            }
        })
        .collect();
    let empirical: Vec<Option<f64>> = rows
        .iter()
        .map(|r| {
            let p = params_of(cfg, r);
            let (a, b) = (kpi.empirical(&r.empirical, &p), kpi.empirical(&r.granted_empirical, &p));
            let d = sign * (a.mean - b.mean);
            // overlapping intervals are a tie
            if d.abs() <= a.ci95 + b.ci95 {
                None
            } else {
                decisive(d)
            }
        })
        .collect();
    let head = rows[0];
    let make = |source: &str, diff: &[Option<f64>]| Crossover {
        kpi,
        replicas: head.replicas,
        policy: head.policy.label(),
        source: source.into(),
        granted_better_loads: loads.iter().zip(diff).filter(|(_, d)| d.is_some_and(|d| d < 0.0)).map(|(l, _)| *l).collect(),
        crossings: crossings(&loads, diff),
    };
    [make("analytic", &analytic), make("empirical", &empirical)]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlaggedRow {
    pub load: f64,
    pub replicas: usize,
    pub policy: String,
    pub analytic_outage: f64,
    pub empirical_outage: f64,
    pub fixed_point: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub rows: usize,
    pub seeds: Vec<u64>,
    pub reps: usize,
    pub modes: Modes,
    pub avg_tx_power: PowerStats,
    pub crossovers: Vec<Crossover>,
    pub divergent_rows: Vec<FlaggedRow>,
    /// Divergent rows at or below the low-load bound.
    pub low_load_divergent: usize,
    pub non_converged_rows: Vec<FlaggedRow>,
}

fn flagged(r: &Row) -> FlaggedRow {
    FlaggedRow {
        load: r.load,
        replicas: r.replicas,
        policy: r.policy.label(),
        analytic_outage: r.analytic.outage,
        empirical_outage: r.reliability.outage.mean,
        fixed_point: r.fixed_point.as_str().into(),
    }
}

pub fn summarize(cfg: &ExperimentConfig, rows: &[Row], power: &PowerStats) -> Summary {
    // rows come grouped by (N, policy) with loads ascending
    let mut groups: Vec<Vec<&Row>> = Vec::new();
    for r in rows {
        match groups.last_mut() {
            Some(g) if g[0].replicas == r.replicas && g[0].policy == r.policy => g.push(r),
            _ => groups.push(vec![r]),
        }
    }
    let mut crossovers = Vec::new();
    for kpi in [Kpi::EnergyEfficiency, Kpi::BatteryLifetime, Kpi::ExpectedDelay, Kpi::SpectralEfficiency] {
        for g in &groups {
            crossovers.extend(crossovers_for(cfg, g, kpi));
        }
    }
    let divergent: Vec<&Row> = rows.iter().filter(|r| r.divergent).collect();
    Summary {
        rows: rows.len(),
        seeds: cfg.seeds.clone(),
        reps: cfg.reps,
        modes: cfg.modes,
        avg_tx_power: *power,
        crossovers,
        low_load_divergent: divergent.iter().filter(|r| r.load <= cfg.low_load).count(),
        divergent_rows: divergent.into_iter().map(flagged).collect(),
        non_converged_rows: rows.iter().filter(|r| r.fixed_point != crate::experiment::FixedPoint::Converged).map(flagged).collect(),
    }
}

/// Writes the selected figure tables and `summary.json`; returns the paths.
pub fn write_outputs(cfg: &ExperimentConfig, rows: &[Row], power: &PowerStats, figures: &[Figure]) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    for &fig in Figure::ALL.iter().filter(|f| figures.contains(f)) {
        let path = cfg.out_dir.join(fig.file_name());
        match fig {
            Figure::Reliability => write_table(&path, &RELIABILITY_HEADER, rows.iter().map(reliability_record))?,
            _ => {
                let kpi = [Kpi::EnergyEfficiency, Kpi::BatteryLifetime, Kpi::ExpectedDelay, Kpi::SpectralEfficiency]
                    .into_iter()
                    .find(|k| k.figure() == fig)
                    .expect("every KPI figure has a KPI");
                write_table(&path, &KPI_HEADER, rows.iter().map(|r| kpi_record(cfg, r, kpi)))?
            }
        }
        files.push(path);
    }
    let path = cfg.out_dir.join("summary.json");
    let mut text = serde_json::to_string_pretty(&summarize(cfg, rows, power))?;
    text.push('\n');
    std::fs::write(&path, text)?;
    files.push(path);
    Ok(files)
}

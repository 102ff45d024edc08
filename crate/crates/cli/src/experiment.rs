//! Load sweeps over replica counts and combining policies, with the granted
//! baseline at the same report rate.

use std::collections::BTreeMap;
use std::path::PathBuf;

use gfra_core::analytic::{AnalyticModel, BaseLaw, FixedPointOptions, LoadStatus, OracleGeometry, OutageModel};
use gfra_core::kpi::{grant_free_report, granted_report, KpiReport};
use gfra_core::sim::{sweep, CombiningPolicy, Estimate, Scheme, SicConfig, SweepCell, SweepRow, SweepSettings};
use gfra_core::{Error, Result, SystemParams};
use serde::{Deserialize, Serialize};

use crate::config::{replica_params, BaseLawKind, ExperimentConfig, PolicySpec};
use crate::power::{population_power, PowerStats};
use crate::report::{write_outputs, Figure};

/// How the damped fixed-point iteration behaves at a row's operating point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FixedPoint {
    Converged,
    /// The iteration settles on a different replica rate for the same
    /// packet rate (the row sits on the unstable branch).
    OtherBranch,
    Overload,
}

impl FixedPoint {
    pub fn as_str(self) -> &'static str {
        match self {
            FixedPoint::Converged => "converged",
            FixedPoint::OtherBranch => "other-branch",
            FixedPoint::Overload => "overload",
        }
    }
}

/// Empirical KPIs pooled over seeds and repetitions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct Empirical {
    pub packets: usize,
    pub offered_load: Estimate,
    pub outage: Estimate,
    pub delay: Estimate,
    pub lifetime: Estimate,
    pub energy_efficiency: Estimate,
    pub spectral_efficiency: Estimate,
    pub throughput: Estimate,
}

impl Empirical {
    fn from_rows(rows: &[&SweepRow]) -> Self {
        let pool = |f: fn(&SweepRow) -> Estimate| pool(&rows.iter().map(|r| f(r)).collect::<Vec<_>>());
        Self {
            packets: rows.iter().map(|r| r.packets).sum(),
            offered_load: pool(|r| r.offered_load),
            outage: pool(|r| r.outage),
            delay: pool(|r| r.delay),
            lifetime: pool(|r| r.lifetime),
            energy_efficiency: pool(|r| r.energy_efficiency),
            spectral_efficiency: pool(|r| r.spectral_efficiency),
            throughput: pool(|r| r.throughput),
        }
    }
}

/// Combines per-seed estimates as if all samples had been drawn at once.
pub fn pool(parts: &[Estimate]) -> Estimate {
    let parts: Vec<&Estimate> = parts.iter().filter(|e| e.samples > 0).collect();
    let n: usize = parts.iter().map(|e| e.samples).sum();
    if n == 0 {
        return Estimate { mean: f64::NAN, ci95: f64::NAN, samples: 0 };
    }
    let mean = parts.iter().map(|e| e.mean * e.samples as f64).sum::<f64>() / n as f64;
    if n == 1 {
        return Estimate { mean, ci95: 0.0, samples: 1 };
    }
    // within-group sums of squares recovered from each half-width
    let ss: f64 = parts
        .iter()
        .map(|e| {
            let k = e.samples as f64;
            let var = if e.samples > 1 { (e.ci95 / 1.96).powi(2) * k } else { 0.0 };
            var * (k - 1.0) + k * (e.mean - mean).powi(2)
        })
        .sum();
    let var = ss / (n - 1) as f64;
    Estimate { mean, ci95: 1.96 * (var / n as f64).sqrt(), samples: n }
}

/// One (load, N, policy) operating point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub load: f64,
    pub replicas: usize,
    pub slots: usize,
    pub policy: PolicySpec,
    /// New-packet rate at which the analytic model sits at `load`.
    pub lambda: f64,
    /// Replica rate including retransmissions.
    pub replica_rate: f64,
    pub analytic_model: OutageModel,
    pub fixed_point: FixedPoint,
    pub analytic: KpiReport,
    pub granted_analytic: KpiReport,
    /// Protocol with retransmissions at packet rate `lambda`.
    pub empirical: Empirical,
    /// Single attempts at replica rate `replica_rate`: the per-attempt
    /// outage at exactly this offered load.
    pub reliability: Empirical,
    pub granted_empirical: Empirical,
    /// `|Po analytic - Po|` of the single-attempt run above the configured tolerance.
    pub divergent: bool,
}

/// The analytic outage expression used for a policy.
pub fn analytic_model_for(n: usize, policy: CombiningPolicy) -> OutageModel {
    match (n, policy) {
        (1, _) => OutageModel::Single,
        (_, CombiningPolicy::Mrc) => OutageModel::MrcSinrSum,
        // no closed form for fragment combining; approximated by decoding
        // each replica on its own
        (_, CombiningPolicy::Sc | CombiningPolicy::None) => OutageModel::Independent,
    }
}

fn base_law(cfg: &ExperimentConfig) -> BaseLaw {
    match cfg.modes.base_law {
        BaseLawKind::Oracle => BaseLaw::Oracle {
            samples: cfg.oracle_samples,
            seed: cfg.seeds[0],
            geometry: OracleGeometry::default(),
        },
        BaseLawKind::ClosedForm => BaseLaw::ClosedForm,
    }
}

fn fixed_point_status(model: &AnalyticModel, lambda: f64, g: f64, po: f64) -> Result<FixedPoint> {
    if po >= 1.0 - 1e-9 {
        return Ok(FixedPoint::Overload);
    }
    let sol = model.solve_offered_load(lambda, &FixedPointOptions::default())?;
    Ok(match sol.status {
        LoadStatus::Overload => FixedPoint::Overload,
        LoadStatus::Converged if (sol.point.replica_rate - g).abs() <= 1e-3 * g.max(1e-12) => FixedPoint::Converged,
        LoadStatus::Converged => FixedPoint::OtherBranch,
    })
}

/// Analytic part of a row, before simulation.
struct Plan {
    load: f64,
    params: SystemParams,
    policy: PolicySpec,
    model: OutageModel,
    lambda: f64,
    g: f64,
    po: f64,
    fixed_point: FixedPoint,
}

fn plan(cfg: &ExperimentConfig) -> Result<Vec<Plan>> {
    let mut plans = Vec::new();
    let law = base_law(cfg);
    for &n in &cfg.replicas {
        let params = replica_params(&cfg.system, n);
        let base = AnalyticModel::new(&params, law, cfg.modes.mixture, OutageModel::default(), cfg.grid_points)?;
        // N = 1 has nothing to combine: one row regardless of policy
        let policies: Vec<PolicySpec> = if n == 1 {
            vec![PolicySpec { policy: CombiningPolicy::None, coding_rate: 1.0 }]
        } else {
            cfg.policies.clone()
        };
        for policy in policies {
            let mut model = base.clone();
            model.outage_model = analytic_model_for(n, policy.policy);
            for &load in &cfg.loads {
                let g = params.replica_rate_for_load(load);
                let po = model.outage(g)?;
                let lambda = g * (1.0 - po).max(0.0) / n as f64;
                let fixed_point = fixed_point_status(&model, lambda, g, po)?;
                plans.push(Plan { load, params: params.clone(), policy, model: model.outage_model, lambda, g, po, fixed_point });
            }
        }
    }
    Ok(plans)
}

/// Per plan: protocol run, single-attempt run, granted baseline.
fn simulate(cfg: &ExperimentConfig, plans: &[Plan], avg_pt: f64) -> Result<Vec<[Empirical; 3]>> {
    let mut out = vec![[Empirical::default(); 3]; plans.len()];
    // cells share retry settings, and the jitter is counted in frames, so
    // run one sweep per replica count
    let mut by_n: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, pl) in plans.iter().enumerate() {
        by_n.entry(pl.params.replicas).or_default().push(i);
    }
    for (n, idx) in by_n {
        let params = replica_params(&cfg.system, n);
        let settings = SweepSettings {
            packets_per_trial: cfg.packets_per_trial,
            max_retries: cfg.max_retries,
            avg_tx_power: avg_pt,
            retry_jitter: cfg.retry_jitter_frames * params.frame_duration(),
        };
        let single = SweepSettings { max_retries: 0, ..settings };
        // (plan, kind, settings, cell)
        let mut jobs: Vec<(usize, usize, SweepSettings, SweepCell)> = Vec::new();
        for &i in &idx {
            let pl = &plans[i];
            let sic = SicConfig { policy: pl.policy.policy, coding_rate: pl.policy.coding_rate, ..Default::default() };
            let gf = Scheme::GrantFree { sic };
            let cell = |lambda, scheme| SweepCell { load: pl.load, lambda, replicas: n, scheme };
            jobs.push((i, 0, settings, cell(pl.lambda, gf)));
            jobs.push((i, 1, single, cell(pl.g / n as f64, gf)));
            jobs.push((i, 2, settings, cell(pl.lambda, Scheme::Granted { ra: cfg.ra })));
        }
        // zero-rate cells have nothing to simulate
        jobs.retain(|j| j.3.lambda > 0.0);
        for (kind, s) in [(0, settings), (1, single), (2, settings)] {
            let part: Vec<&(usize, usize, SweepSettings, SweepCell)> = jobs.iter().filter(|j| j.1 == kind).collect();
            let cells: Vec<SweepCell> = part.iter().map(|j| j.3).collect();
            let per_seed: Vec<Vec<SweepRow>> = cfg
                .seeds
                .iter()
                // distinct seed per kind keeps the runs independent
                .map(|&seed| sweep(&cells, cfg.reps, &cfg.system, &cfg.energy, &s, seed.wrapping_add(kind as u64 * 0x9e37_79b9)))
                .collect::<Result<_>>()?;
            for (k, j) in part.iter().enumerate() {
                let rows: Vec<&SweepRow> = per_seed.iter().map(|r| &r[k]).collect();
                out[j.0][kind] = Empirical::from_rows(&rows);
            }
        }
    }
    Ok(out)
}

fn nan_report(po: f64) -> KpiReport {
    KpiReport {
        outage: po,
        expected_delay: f64::NAN,
        battery_lifetime: f64::NAN,
        energy_efficiency: f64::NAN,
        spectral_efficiency: f64::NAN,
        throughput: f64::NAN,
        avg_tx_power: f64::NAN,
    }
}

/// Evaluates every row; does not touch the file system.
pub fn evaluate(cfg: &ExperimentConfig) -> Result<(Vec<Row>, PowerStats)> {
    cfg.validate()?;
    let power = population_power(&cfg.energy, &cfg.system, cfg.devices, cfg.seeds[0]);
    let plans = plan(cfg)?;
    let sims = simulate(cfg, &plans, power.mean)?;
    let mut rows = Vec::with_capacity(plans.len());
    for (pl, [gf, single, granted]) in plans.iter().zip(sims) {
        let analytic = match grant_free_report(pl.po, pl.lambda, pl.g, &cfg.energy, &pl.params, power.mean, cfg.modes.lifetime) {
            Ok(r) => r,
            // the printed 1/Po lifetime factor has no value at Po = 0
            Err(Error::Degenerate(_)) => KpiReport {
                battery_lifetime: f64::NAN,
                ..grant_free_report(pl.po, pl.lambda, pl.g, &cfg.energy, &pl.params, power.mean, Default::default())?
            },
            Err(e) => return Err(e),
        };
        let granted_analytic = if pl.lambda > 0.0 {
            granted_report(pl.lambda, &cfg.energy, &pl.params, &cfg.ra, power.mean)
        } else {
            nan_report(0.0)
        };
        let divergent = single.outage.samples > 0 && (single.outage.mean - pl.po).abs() > cfg.divergence_tolerance;
        rows.push(Row {
            load: pl.load,
            replicas: pl.params.replicas,
            slots: pl.params.slots,
            policy: pl.policy,
            lambda: pl.lambda,
            replica_rate: pl.g,
            analytic_model: pl.model,
            fixed_point: pl.fixed_point,
            analytic,
            granted_analytic,
            empirical: gf,
            reliability: single,
            granted_empirical: granted,
            divergent,
        });
    }
    Ok((rows, power))
}

/// Files written by [`run_experiment`].
#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub rows: Vec<Row>,
    pub power: PowerStats,
    pub files: Vec<PathBuf>,
}

/// Runs the sweep and writes the selected figure tables and `summary.json`
/// into `cfg.out_dir`.
pub fn run_experiment(cfg: &ExperimentConfig, figures: &[Figure]) -> Result<ExperimentOutput> {
    std::fs::create_dir_all(&cfg.out_dir)?;
    let (rows, power) = evaluate(cfg)?;
    let files = write_outputs(cfg, &rows, &power, figures)?;
    Ok(ExperimentOutput { rows, power, files })
}

//! Experiment configuration. Every key is optional in the TOML file; see
//! `docs/config.md` for the full list.

use std::path::{Path, PathBuf};

use gfra_core::analytic::MixtureMode;
use gfra_core::kpi::{LifetimeMode, RaConfig};
use gfra_core::sim::CombiningPolicy;
use gfra_core::{EnergyParams, Error, Result, SystemParams};
use gfra_sigchain::receiver::ReceiverConfig;
use gfra_sigchain::suite::SuiteConfig;
use serde::{Deserialize, Serialize};

/// Source of the single-interferer overlap law in the analytic columns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum BaseLawKind {
    #[default]
    Oracle,
    ClosedForm,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Modes {
    pub lifetime: LifetimeMode,
    pub mixture: MixtureMode,
    pub base_law: BaseLawKind,
}

impl Default for Modes {
    fn default() -> Self {
        Self { lifetime: LifetimeMode::Corrected, mixture: MixtureMode::PoissonMixture, base_law: BaseLawKind::Oracle }
    }
}

impl Modes {
    /// The expressions exactly as printed: `1/Po` lifetime factor, clamped
    /// closed-form overlap law and a fixed interferer count.
    pub fn paper_literal() -> Self {
        Self { lifetime: LifetimeMode::PaperLiteral, mixture: MixtureMode::MeanCount, base_law: BaseLawKind::ClosedForm }
    }
}

/// A combining policy with its coding rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicySpec {
    pub policy: CombiningPolicy,
    #[serde(default = "one")]
    pub coding_rate: f64,
}

fn one() -> f64 {
    1.0
}

impl PolicySpec {
    pub fn label(&self) -> String {
        format!("{}-cr{}", self.policy.as_str(), self.coding_rate)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub system: SystemParams,
    pub energy: EnergyParams,
    /// Random-access channel of the granted baseline.
    pub ra: RaConfig,
    /// Offered load per channel, ascending.
    pub loads: Vec<f64>,
    /// Replica counts `N`; `M = 2N` for `N > 1`, else 1.
    pub replicas: Vec<usize>,
    pub policies: Vec<PolicySpec>,
    /// Distinct seeds; each runs `reps` trials per cell.
    pub seeds: Vec<u64>,
    pub reps: usize,
    pub packets_per_trial: f64,
    pub max_retries: usize,
    /// Retransmission jitter in virtual frames.
    pub retry_jitter_frames: f64,
    /// Devices placed for the mean transmit power.
    pub devices: usize,
    /// Samples of the overlap oracle for the analytic base law.
    pub oracle_samples: usize,
    pub grid_points: usize,
    /// Rows whose analytic and empirical outage differ by more than this are flagged.
    pub divergence_tolerance: f64,
    /// Loads at or below this count as the low-load regime in the summary.
    pub low_load: f64,
    pub out_dir: PathBuf,
    pub modes: Modes,
    pub receiver: ReceiverConfig,
    pub suite: SuiteConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            system: SystemParams::default(),
            energy: EnergyParams::default(),
            ra: RaConfig::default(),
            loads: vec![0.005, 0.01, 0.02, 0.05, 0.1, 0.2, 0.3, 0.5, 0.75, 1.0],
            replicas: vec![1, 2, 4],
            policies: vec![
                PolicySpec { policy: CombiningPolicy::Mrc, coding_rate: 1.0 },
                PolicySpec { policy: CombiningPolicy::Sc, coding_rate: 1.0 },
                PolicySpec { policy: CombiningPolicy::Sc, coding_rate: 0.5 },
            ],
            seeds: vec![1],
            reps: 4,
            packets_per_trial: 10_000.0,
            max_retries: 5,
            retry_jitter_frames: 20.0,
            devices: 10_000,
            oracle_samples: 1_000_000,
            grid_points: gfra_core::analytic::GRID_POINTS,
            divergence_tolerance: 0.03,
            low_load: 0.2,
            out_dir: PathBuf::from("out"),
            modes: Modes::default(),
            receiver: ReceiverConfig::default(),
            suite: SuiteConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let raw: toml::Table = toml::from_str(text)?;
        let mut cfg: Self = raw.clone().try_into()?;
        // Tp follows from D, W, gamma and Gamma unless given explicitly
        if raw.get("system").and_then(|s| s.get("packet_duration")).is_none() {
            cfg.system.refresh_packet_duration()?;
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if self.loads.windows(2).any(|w| !(w[0] < w[1])) || self.loads.iter().any(|l| !(*l >= 0.0)) {
            return bad(format!("load grid must be non-negative and strictly ascending: {:?}", self.loads));
        }
        if self.reps < 1 {
            return bad("reps must be at least 1".into());
        }
        if self.seeds.is_empty() {
            return bad("need at least one seed".into());
        }
        let mut s = self.seeds.clone();
        s.sort_unstable();
        s.dedup();
        if s.len() != self.seeds.len() {
            return bad(format!("seeds must be distinct: {:?}", self.seeds));
        }
        if self.replicas.iter().any(|&n| n == 0) {
            return bad("replica counts must be positive".into());
        }
        if self.policies.iter().any(|p| !(p.coding_rate > 0.0 && p.coding_rate <= 1.0)) {
            return bad("coding rates must lie in (0, 1]".into());
        }
        if !(self.packets_per_trial > 0.0) || self.devices == 0 {
            return bad("packets_per_trial and devices must be positive".into());
        }
        self.energy.validate()?;
        for &n in &self.replicas {
            replica_params(&self.system, n).validate(false)?;
        }
        Ok(())
    }
}

/// System parameters for `n` replicas with the `M = 2N` slot rule.
pub fn replica_params(base: &SystemParams, n: usize) -> SystemParams {
    base.clone().with_replicas(n)
}

//! Self-consistent replica rate `g = N lambda / (1 - Po(g))`.

use serde::{Deserialize, Serialize};

use super::cdf::{Grid, InterferenceCdf, GRID_POINTS};
use super::outage::{
    convolve_cdf, outage_independent, outage_mrc, outage_single, outage_sinr_sum,
    unconditional_cdf, MixtureMode, OutageModel,
};
use super::overlap::{closed_form_cdf, overlap_cdf_oracle, OracleGeometry};
use crate::error::Result;
use crate::params::SystemParams;
use crate::traffic::substream;

/// Operating point of the channel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LoadPoint {
    /// New-packet arrival rate `lambda`, packets/s.
    pub lambda_agg: f64,
    /// Replica transmission rate `g` including retransmissions, replicas/s.
    pub replica_rate: f64,
    /// `W / (2Fm + W) * g * Tp`.
    pub offered_load: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LoadStatus {
    Converged,
    /// Outage approached one or the iteration did not settle.
    Overload,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LoadSolution {
    pub point: LoadPoint,
    pub outage: f64,
    pub iterations: usize,
    pub status: LoadStatus,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FixedPointOptions {
    /// Weight of the new iterate, `g <- (1-d) g + d * target`.
    pub damping: f64,
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Offered load above which the channel is declared overloaded.
    pub max_offered_load: f64,
}

impl Default for FixedPointOptions {
    fn default() -> Self {
        Self { damping: 0.5, tolerance: 1e-6, max_iterations: 200, max_offered_load: 25.0 }
    }
}

/// Damped iteration of `g <- N lambda / (1 - Po(g))` for an arbitrary outage map.
pub fn solve_fixed_point(
    lambda: f64,
    p: &SystemParams,
    opts: &FixedPointOptions,
    mut outage: impl FnMut(f64) -> Result<f64>,
) -> Result<LoadSolution> {
    let n = p.replicas as f64;
    let make = |g: f64, po: f64, it: usize, status| LoadSolution {
        point: LoadPoint { lambda_agg: lambda, replica_rate: g, offered_load: p.offered_load(g) },
        outage: po,
        iterations: it,
        status,
    };
    let mut g = n * lambda.max(0.0);
    if g == 0.0 {
        return Ok(make(0.0, outage(0.0)?, 0, LoadStatus::Converged));
    }
    for it in 1..=opts.max_iterations {
        let po = outage(g)?;
        if po >= 1.0 - 1e-9 {
            return Ok(make(g, po, it, LoadStatus::Overload));
        }
        let target = n * lambda / (1.0 - po);
        let next = (1.0 - opts.damping) * g + opts.damping * target;
        if p.offered_load(next) > opts.max_offered_load {
            return Ok(make(next, outage(next)?, it, LoadStatus::Overload));
        }
        if (next - g).abs() <= opts.tolerance * next {
            return Ok(make(next, outage(next)?, it, LoadStatus::Converged));
        }
        g = next;
    }
    Ok(make(g, outage(g)?, opts.max_iterations, LoadStatus::Overload))
}

/// Source of the single-interferer overlap law.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum BaseLaw {
    /// Sampled rectangle geometry.
    Oracle { samples: usize, seed: u64, geometry: OracleGeometry },
    /// The printed closed form, clamped to `[0, 1]`.
    ClosedForm,
}

impl Default for BaseLaw {
    fn default() -> Self {
        BaseLaw::Oracle { samples: 1_000_000, seed: 0x5eed, geometry: OracleGeometry::default() }
    }
}

/// Closed-form reliability model for one parameter set.
#[derive(Debug, Clone)]
pub struct AnalyticModel {
    pub params: SystemParams,
    /// Single-interferer overlap law (conditioned on overlap for the oracle).
    pub base: InterferenceCdf,
    pub mixture: MixtureMode,
    pub outage_model: OutageModel,
}

impl AnalyticModel {
    /// Builds the base law on `points` grid points over `[0, N W Tp]`.
    pub fn new(
        params: &SystemParams,
        law: BaseLaw,
        mixture: MixtureMode,
        outage_model: OutageModel,
        points: usize,
    ) -> Result<Self> {
        let grid = Grid::new(params.replicas.max(1) as f64 * params.replica_area(), points)?;
        let base = match law {
            BaseLaw::Oracle { samples, seed, geometry } => {
                let mut rng = substream(seed, 0);
                overlap_cdf_oracle(&mut rng, params, samples, grid, geometry)?.conditional
            }
            BaseLaw::ClosedForm => closed_form_cdf(params, grid)?,
        };
        Ok(Self { params: params.clone(), base, mixture, outage_model })
    }

    pub fn with_defaults(params: &SystemParams) -> Result<Self> {
        Self::new(params, BaseLaw::default(), MixtureMode::default(), OutageModel::default(), GRID_POINTS)
    }

    /// Per-replica aggregate overlap law at replica rate `g`.
    pub fn per_replica(&self, replica_rate: f64) -> Result<InterferenceCdf> {
        unconditional_cdf(&self.base, replica_rate, &self.params, self.mixture)
    }

    /// Outage at replica rate `g` under the configured model.
    pub fn outage(&self, replica_rate: f64) -> Result<f64> {
        let p = &self.params;
        let u = self.per_replica(replica_rate)?;
        Ok(match self.outage_model {
            OutageModel::Single => outage_single(&u, p),
            OutageModel::Independent => outage_independent(&u, p),
            OutageModel::MrcSummedArea => outage_mrc(&convolve_cdf(&u, p.replicas)?, p),
            OutageModel::MrcSinrSum => outage_sinr_sum(&u, p)?,
        })
    }

    /// Solves for the replica rate sustained by new-packet rate `lambda`.
    pub fn solve_offered_load(&self, lambda: f64, opts: &FixedPointOptions) -> Result<LoadSolution> {
        solve_fixed_point(lambda, &self.params, opts, |g| self.outage(g))
    }
}

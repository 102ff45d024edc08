//! Interferer-count mixtures and outage probabilities.

use serde::{Deserialize, Serialize};

use super::cdf::{CdfMeta, Convolver, Grid, InterferenceCdf};
use super::overlap::sinr;
use crate::error::Result;
use crate::params::SystemParams;

/// Poisson tail mass below which the mixture is truncated.
pub const POISSON_TRUNCATION: f64 = 1e-9;

/// How the number of interferers in the vulnerable window is handled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum MixtureMode {
    /// Average over a Poisson(2 g Tp) interferer count.
    #[default]
    PoissonMixture,
    /// Fix the count at `ceil(2 g Tp) - 1`.
    MeanCount,
}

/// `n`-fold sum of i.i.d. draws from `base`; `n = 0` is the unit step.
pub fn convolve_cdf(base: &InterferenceCdf, n: usize) -> Result<InterferenceCdf> {
    let unit = InterferenceCdf::unit_step(base.grid(), base.meta.clone());
    if n == 0 {
        return Ok(unit);
    }
    let conv = Convolver::new(base.grid())?;
    let spec = conv.spectrum(base);
    let mut cur = base.clone();
    for _ in 1..n {
        cur = conv.convolve_with_spectrum(&cur, base, &spec)?;
    }
    cur.meta.count = Some(n);
    Ok(cur)
}

fn poisson_pmf(n: usize, mean: f64, ln_fact: f64) -> f64 {
    if mean <= 0.0 {
        return if n == 0 { 1.0 } else { 0.0 };
    }
    (n as f64 * mean.ln() - mean - ln_fact).exp()
}

/// Aggregate overlap law for one replica when other replicas arrive at rate
/// `g`: each of the Poisson(2 g Tp) replicas starting within `Tp` of the
/// reference overlaps it with probability `base.meta.overlap_probability`,
/// contributing an area drawn from `base`.
pub fn unconditional_cdf(
    base: &InterferenceCdf,
    replica_rate: f64,
    p: &SystemParams,
    mode: MixtureMode,
) -> Result<InterferenceCdf> {
    let grid = base.grid();
    let single = base.thin(base.meta.overlap_probability);
    let mean = (2.0 * replica_rate * p.packet_duration).max(0.0);
    let meta = CdfMeta { count: None, replica_rate: Some(replica_rate), ..single.meta.clone() };
    if mean == 0.0 {
        return Ok(InterferenceCdf::unit_step(grid, meta));
    }
    match mode {
        MixtureMode::MeanCount => {
            let n = (mean.ceil() as usize).saturating_sub(1);
            let mut out = convolve_cdf(&single, n)?;
            out.meta = CdfMeta { count: Some(n), ..meta };
            Ok(out)
        }
        MixtureMode::PoissonMixture => {
            let conv = Convolver::new(grid)?;
            let spec = conv.spectrum(&single);
            let mut out = InterferenceCdf::zero(grid, meta);
            let mut cur = InterferenceCdf::unit_step(grid, single.meta.clone());
            let mut covered = 0.0;
            let mut ln_fact = 0.0;
            let mut n = 0usize;
            loop {
                let w = poisson_pmf(n, mean, ln_fact);
                out.add_scaled(&cur, w)?;
                covered += w;
                // stop once the remaining count mass is negligible and we are past the mode
                if 1.0 - covered < POISSON_TRUNCATION && n as f64 >= mean {
                    break;
                }
                if cur.tail() > 1.0 - 1e-12 {
                    // every further sum is past the grid
                    break;
                }
                n += 1;
                ln_fact += (n as f64).ln();
                cur = conv.convolve_with_spectrum(&cur, &single, &spec)?;
            }
            out.add_tail((1.0 - covered).max(0.0));
            Ok(out)
        }
    }
}

/// SINR margin `W Tp (k/St - 1/gamma)` on aggregate overlap for `k` combined replicas.
fn overlap_budget(p: &SystemParams, k: f64) -> f64 {
    p.replica_area() * (k / p.sinr_threshold - 1.0 / p.required_snr)
}

/// Single-replica outage `1 - F(W Tp (1/St - 1/gamma))`.
pub fn outage_single(cdf: &InterferenceCdf, p: &SystemParams) -> f64 {
    if p.sinr_threshold > p.required_snr {
        log::warn!(
            "threshold {} above interference-free SNR {}: decoding impossible",
            p.sinr_threshold,
            p.required_snr
        );
        return 1.0;
    }
    1.0 - cdf.cdf(overlap_budget(p, 1.0))
}

/// Combined outage with the summed-area law: `1 - F(W Tp (N/St - 1/gamma))`,
/// where `cdf_sum` is the law of the interference summed over the `N` replicas.
pub fn outage_mrc(cdf_sum: &InterferenceCdf, p: &SystemParams) -> f64 {
    let x = overlap_budget(p, p.replicas as f64);
    if x < 0.0 {
        return 1.0;
    }
    1.0 - cdf_sum.cdf(x)
}

/// All `N` replicas fail individually: `[1 - F(W Tp (1/St - 1/gamma))]^N`.
pub fn outage_independent(cdf: &InterferenceCdf, p: &SystemParams) -> f64 {
    outage_single(cdf, p).powi(p.replicas as i32)
}

/// Combined outage `P(sum_i SINR_i < St)` for `N` replicas whose aggregate
/// overlaps are i.i.d. draws from `cdf`.
pub fn outage_sinr_sum(cdf: &InterferenceCdf, p: &SystemParams) -> Result<f64> {
    let n = p.replicas.max(1);
    let grid = Grid::new(n as f64 * p.required_snr * (1.0 + 1e-9), cdf.grid().points.max(1024))?;
    // Interference past the grid is mapped to zero SINR.
    let points = cdf
        .points()
        .map(|(x, w)| (if x.is_finite() { sinr(x, p) } else { 0.0 }, w));
    let per_replica = InterferenceCdf::from_weighted_points(grid, points, cdf.meta.clone());
    let sum = convolve_cdf(&per_replica, n)?;
    // Decoded iff the sum reaches St.
    Ok(sum.cdf(p.sinr_threshold).clamp(0.0, 1.0))
}

/// Which outage expression the analytic model reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum OutageModel {
    /// One replica, no combining.
    Single,
    /// Each replica decoded on its own.
    Independent,
    /// Combining with the summed-area threshold.
    MrcSummedArea,
    /// Combining with the sum of per-replica SINRs.
    #[default]
    MrcSinrSum,
}

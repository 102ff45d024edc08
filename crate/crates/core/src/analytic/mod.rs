//! Closed-form interference statistics and outage probabilities.
//!
//! Replicas are `W x Tp` rectangles with uniformly spread energy, so the
//! SINR of a replica depends only on the total area `M` that other replicas
//! overlap with it. This module tabulates the law of `M`, from a single
//! interferer up to a Poisson number of them, and turns it into outage
//! probabilities with and without replica combining.

mod cdf;
mod load;
mod mmse;
mod outage;
mod overlap;

pub use cdf::{CdfMeta, Grid, InterferenceCdf, GRID_POINTS};
pub use load::{
    solve_fixed_point, AnalyticModel, BaseLaw, FixedPointOptions, LoadPoint, LoadSolution,
    LoadStatus,
};
pub use mmse::{combined_sinr, mmse_weights, weight_residual};
pub use outage::{
    convolve_cdf, outage_independent, outage_mrc, outage_single, outage_sinr_sum,
    unconditional_cdf, MixtureMode, OutageModel, POISSON_TRUNCATION,
};
pub use overlap::{
    closed_form_cdf, overlap_ccdf_closed_form, overlap_cdf_oracle, rectangle_overlap, sinr,
    CfoDifferenceLaw, ClosedFormCcdf, OracleCdf, OracleGeometry,
};

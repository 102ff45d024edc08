//! Rectangle-level Monte Carlo simulation of the access protocol.

mod graph;
mod granted;
mod sic;
mod sweep;
mod trial;

pub use graph::{CollisionGraph, Overlap};
pub use granted::{ra_round, run_granted_baseline};
pub use sic::{replica_sinr, sic_decode, CombiningPolicy, SicConfig, SicOutcome};
pub use sweep::{sweep, Estimate, Scheme, SweepCell, SweepRow, SweepSettings};
pub use trial::{run_trial, TrialConfig, TrialResult};

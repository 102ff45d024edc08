//! Grant-free, time/frequency-asynchronous random access with packet
//! replicas and a successive-interference-cancellation receiver.
//!
//! * [`params`] holds the radio, protocol and energy constants.
//! * [`traffic`] draws arrivals, virtual frames and carrier offsets.
//! * [`analytic`] evaluates the closed-form interference and outage model.
//! * [`kpi`] turns an outage probability into delay, lifetime and efficiency.
//! * [`sim`] is the rectangle-level Monte Carlo simulator used as ground truth.

pub mod analytic;
pub mod error;
pub mod kpi;
pub mod params;
pub mod sim;
pub mod traffic;

pub use error::{Error, Result};
pub use params::{EnergyParams, SystemParams};

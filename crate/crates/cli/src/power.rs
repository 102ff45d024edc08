//! Mean transmit power over a simulated device population.

use gfra_core::kpi::tx_power_db_model;
use gfra_core::traffic::substream;
use gfra_core::{EnergyParams, SystemParams};
use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerStats {
    pub devices: usize,
    /// Mean transmit power in W.
    pub mean: f64,
    /// Share of devices whose link needs more than the maximum power.
    pub coverage_limited: f64,
}

/// Places `devices` uniformly on the annulus `Rin < r < Rc` and averages the
/// clamped dB-model transmit power.
pub fn population_power(e: &EnergyParams, p: &SystemParams, devices: usize, seed: u64) -> PowerStats {
    let mut rng = substream(seed, 0x9077);
    let (a, b) = (e.inner_radius.powi(2), e.cell_radius.powi(2));
    let (mut sum, mut limited) = (0.0, 0usize);
    for _ in 0..devices {
        let r = rng.gen_range(a..b).sqrt();
        let lp = tx_power_db_model(r, e, p);
        sum += lp.watts;
        limited += lp.coverage_limited as usize;
    }
    let n = devices.max(1) as f64;
    PowerStats { devices, mean: sum / n, coverage_limited: limited as f64 / n }
}

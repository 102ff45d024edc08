//! Stochastic generators: Poisson arrivals, virtual-frame slot draws and
//! carrier offsets.

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::SystemParams;

/// RNG used throughout the crate. Seedable and splittable into streams.
pub type SimRng = ChaCha8Rng;

/// Independent RNG stream `stream` derived from `seed`.
pub fn substream(seed: u64, stream: u64) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// One transmitted copy of a packet: a `duration x bandwidth` rectangle in
/// the time-frequency plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Replica {
    pub packet: usize,
    /// Start time in s.
    pub t0: f64,
    /// Carrier offset in Hz; the replica occupies `[df - W/2, df + W/2]`.
    pub df: f64,
    pub duration: f64,
    pub bandwidth: f64,
    /// Energy per unit time-frequency area (rho).
    pub energy_density: f64,
}

impl Replica {
    pub fn area(&self) -> f64 {
        self.duration * self.bandwidth
    }

    pub fn end(&self) -> f64 {
        self.t0 + self.duration
    }
}

/// A device's window of `M` slots holding the `N` replicas of one packet.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VirtualFrame {
    pub device: u64,
    pub arrival_time: f64,
    /// Sorted, distinct slot indices in `[0, M)`; always starts with 0.
    pub slots: Vec<usize>,
    /// Carrier offset in Hz, constant over the frame.
    pub cfo: f64,
}

impl VirtualFrame {
    /// Replica rectangles of this frame, tagged with `packet`.
    pub fn replicas(&self, packet: usize, p: &SystemParams) -> impl Iterator<Item = Replica> + '_ {
        let tp = p.packet_duration;
        let w = p.bandwidth;
        self.slots.iter().map(move |&s| Replica {
            packet,
            t0: self.arrival_time + s as f64 * tp,
            df: self.cfo,
            duration: tp,
            bandwidth: w,
            energy_density: 1.0,
        })
    }
}

/// Places the first replica in slot 0 and the remaining `N - 1` uniformly
/// without replacement in `1..M`; draws the carrier offset uniformly in
/// `[-Fm, Fm]`.
pub fn draw_virtual_frame<R: Rng + ?Sized>(
    rng: &mut R,
    p: &SystemParams,
    device: u64,
    arrival_time: f64,
) -> Result<VirtualFrame> {
    let (n, m) = (p.replicas, p.slots);
    if n < 1 || n > m {
        return Err(Error::invalid(format!("need 1 <= N <= M, got N={n} M={m}")));
    }
    let mut slots = Vec::with_capacity(n);
    slots.push(0);
    if n > 1 {
        slots.extend(index::sample(rng, m - 1, n - 1).into_iter().map(|k| k + 1));
        slots.sort_unstable();
    }
    Ok(VirtualFrame { device, arrival_time, slots, cfo: draw_cfo(rng, p.max_cfo) })
}

/// Uniform carrier offset on `[-fm, fm]`.
pub fn draw_cfo<R: Rng + ?Sized>(rng: &mut R, fm: f64) -> f64 {
    if fm > 0.0 {
        rng.gen_range(-fm..=fm)
    } else {
        0.0
    }
}

/// Ordered arrival times of a Poisson process with rate `lambda` on `[0, horizon)`.
pub fn generate_arrivals<R: Rng + ?Sized>(rng: &mut R, lambda: f64, horizon: f64) -> Vec<f64> {
    if !(lambda > 0.0) || !(horizon > 0.0) {
        return Vec::new();
    }
    let exp = Exp::new(lambda).expect("positive rate");
    let mut out = Vec::with_capacity((lambda * horizon * 1.1) as usize + 8);
    let mut t = exp.sample(rng);
    while t < horizon {
        out.push(t);
        t += exp.sample(rng);
    }
    out
}

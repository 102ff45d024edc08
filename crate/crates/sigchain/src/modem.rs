//! Nonnegative 4-PAM payloads and packet synthesis.

use std::f64::consts::TAU;

use rand::Rng;

use crate::preamble::{upsample, zc_preamble};
use crate::signal::rotate;
use crate::{ComplexSignal, Error, Result, SystemParams, C64};

/// Default Zadoff-Chu root.
pub const DEFAULT_ROOT: usize = 5;

/// Amplitude of level 1; levels `{0, 1, 2, 3}` times this have unit mean power.
pub fn level_scale() -> f64 {
    1.0 / 3.5f64.sqrt()
}

/// Gray labels: 00 -> 0, 01 -> 1, 11 -> 2, 10 -> 3.
pub fn level_of(b0: bool, b1: bool) -> u8 {
    match (b0, b1) {
        (false, false) => 0,
        (false, true) => 1,
        (true, true) => 2,
        (true, false) => 3,
    }
}

pub fn bits_of(level: u8) -> (bool, bool) {
    match level {
        0 => (false, false),
        1 => (false, true),
        2 => (true, true),
        _ => (true, false),
    }
}

pub fn bits_to_levels(bits: &[bool]) -> Result<Vec<u8>> {
    if bits.len() % 2 != 0 {
        return Err(Error::InvalidArgument(format!("odd bit count {}", bits.len())));
    }
    Ok(bits.chunks_exact(2).map(|c| level_of(c[0], c[1])).collect())
}

pub fn levels_to_bits(levels: &[u8]) -> Vec<bool> {
    levels
        .iter()
        .flat_map(|&l| {
            let (a, b) = bits_of(l);
            [a, b]
        })
        .collect()
}

/// Sample-level dimensions of a packet.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PacketLayout {
    pub samples_per_symbol: usize,
    pub preamble_symbols: usize,
    pub payload_symbols: usize,
}

impl PacketLayout {
    pub fn from_params(p: &SystemParams) -> Result<Self> {
        p.validate(true)?;
        let sps = (p.sample_rate * p.symbol_duration).round();
        if sps < 1.0 || (sps - p.sample_rate * p.symbol_duration).abs() > 1e-6 {
            return Err(Error::InvalidParams(format!(
                "Fs * Tb = {} is not a whole number of samples",
                p.sample_rate * p.symbol_duration
            )));
        }
        let total = (p.packet_duration / p.symbol_duration).round() as usize;
        if total <= p.preamble_len {
            return Err(Error::InvalidParams(format!(
                "packet of {total} symbols leaves no room after a {}-symbol preamble",
                p.preamble_len
            )));
        }
        Ok(Self { samples_per_symbol: sps as usize, preamble_symbols: p.preamble_len, payload_symbols: total - p.preamble_len })
    }

    pub fn payload_bits(&self) -> usize {
        2 * self.payload_symbols
    }

    pub fn preamble_samples(&self) -> usize {
        self.preamble_symbols * self.samples_per_symbol
    }

    pub fn packet_samples(&self) -> usize {
        (self.preamble_symbols + self.payload_symbols) * self.samples_per_symbol
    }
}

/// Upsampled preamble reference for `p` and `root`.
pub fn preamble_reference(p: &SystemParams, root: usize) -> Result<Vec<C64>> {
    let l = PacketLayout::from_params(p)?;
    Ok(upsample(&zc_preamble(p.preamble_len, root)?, l.samples_per_symbol))
}

/// Packet with carrier offset `df` and carrier phase `phase`, starting at t0 = 0.
/// Fewer bits than the layout holds give a shorter packet.
pub fn synthesize_with_phase(bits: &[bool], p: &SystemParams, df: f64, phase: f64, root: usize) -> Result<ComplexSignal> {
    let layout = PacketLayout::from_params(p)?;
    let levels = bits_to_levels(bits)?;
    if levels.len() > layout.payload_symbols {
        return Err(Error::InvalidArgument(format!(
            "{} bits exceed the {}-bit payload",
            bits.len(),
            layout.payload_bits()
        )));
    }
    let mut x = preamble_reference(p, root)?;
    let a = level_scale();
    x.extend(upsample(&levels.iter().map(|&l| C64::new(a * l as f64, 0.0)).collect::<Vec<_>>(), layout.samples_per_symbol));
    let c = C64::from_polar(1.0, phase);
    x.iter_mut().for_each(|z| *z *= c);
    rotate(&mut x, df, p.sample_rate);
    ComplexSignal::new(x, p.sample_rate, 0.0)
}

/// Packet with a uniformly random carrier phase and the default root.
pub fn synthesize_packet<R: Rng + ?Sized>(bits: &[bool], p: &SystemParams, df: f64, rng: &mut R) -> Result<ComplexSignal> {
    let phase = rng.gen_range(0.0..TAU);
    synthesize_with_phase(bits, p, df, phase, DEFAULT_ROOT)
}

pub fn random_bits<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<bool> {
    (0..n).map(|_| rng.gen()).collect()
}

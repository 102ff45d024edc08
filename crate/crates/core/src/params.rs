//! Radio, protocol and energy parameters.
//!
//! Defaults follow the reference simulation table: 200 Hz bandwidth, 100 Hz
//! maximum carrier offset, 4 kHz receiver sampling, 10 ms symbols, 100-bit
//! packets with 50 overhead bits, 6 dB required SNR and a 23-symbol preamble.
//! Every field is a documented config key; see `docs/config.md`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Converts decibels to a linear power ratio.
pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Converts a linear power ratio to decibels.
pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

/// Thermal noise density at 290 K, -174 dBm/Hz, in W/Hz.
pub const THERMAL_NOISE_DENSITY: f64 = 3.981_071_705_534_969_4e-21;

/// Radio and protocol constants shared by every part of the model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SystemParams {
    /// Signal bandwidth `W` in Hz.
    pub bandwidth: f64,
    /// Maximum carrier frequency offset magnitude `Fm` in Hz.
    pub max_cfo: f64,
    /// Receiver sampling rate `Fs` in Hz (sample-level receiver only).
    pub sample_rate: f64,
    /// Symbol duration `Tb` in seconds.
    pub symbol_duration: f64,
    /// Packet duration `Tp` in seconds. Derived by [`packet_duration`].
    pub packet_duration: f64,
    /// Packet length `D` in bits.
    pub packet_bits: u32,
    /// Overhead bits `Doh` per packet.
    pub overhead_bits: u32,
    /// Required receiver SNR `gamma` (linear).
    pub required_snr: f64,
    /// SNR gap `Gamma` between capacity and the practical modulation (linear).
    pub snr_gap: f64,
    /// Decoding SINR threshold `St` (linear).
    pub sinr_threshold: f64,
    /// Noise energy density `N0` in J/Hz.
    pub noise_density: f64,
    /// Preamble length `Nzc` in symbols.
    pub preamble_len: usize,
    /// Slots per virtual frame `M`.
    pub slots: usize,
    /// Replicas per packet `N`.
    pub replicas: usize,
    /// Maximum processing-frame duration `Tmax` in seconds.
    pub max_frame: f64,
    /// ACK wait time `Tack` in seconds.
    pub ack_wait: f64,
}

impl Default for SystemParams {
    fn default() -> Self {
        let gamma = db_to_linear(6.0);
        let mut p = Self {
            bandwidth: 200.0,
            max_cfo: 100.0,
            sample_rate: 4000.0,
            symbol_duration: 0.010,
            packet_duration: 0.0,
            packet_bits: 100,
            overhead_bits: 50,
            required_snr: gamma,
            snr_gap: gamma,
            sinr_threshold: gamma * 0.5,
            noise_density: THERMAL_NOISE_DENSITY,
            preamble_len: 23,
            slots: 4,
            replicas: 2,
            max_frame: 4.0,
            ack_wait: 0.5,
        };
        p.packet_duration = packet_duration(&p).expect("default parameters are valid");
        p
    }
}

/// `Tp = D / (W * log2(1 + gamma/Gamma))`.
pub fn packet_duration(p: &SystemParams) -> Result<f64> {
    if !(p.bandwidth > 0.0) {
        return Err(Error::invalid("bandwidth must be positive"));
    }
    let ratio = p.required_snr / p.snr_gap;
    let arg = 1.0 + ratio;
    if !(arg > 0.0) || !arg.is_finite() {
        return Err(Error::invalid(format!(
            "log2 argument 1 + gamma/Gamma = {arg} is not positive"
        )));
    }
    let spectral = arg.log2();
    if !(spectral > 0.0) {
        return Err(Error::invalid("gamma/Gamma must be positive"));
    }
    Ok(p.packet_bits as f64 / (p.bandwidth * spectral))
}

impl SystemParams {
    /// Recomputes `packet_duration` from `D`, `W`, `gamma` and `Gamma`.
    pub fn refresh_packet_duration(&mut self) -> Result<()> {
        self.packet_duration = packet_duration(self)?;
        Ok(())
    }

    /// Sets `N` and `M` using the reference rule `M = 2N` for `N > 1`, `M = 1` for `N = 1`.
    pub fn with_replicas(mut self, n: usize) -> Self {
        self.replicas = n;
        self.slots = if n > 1 { 2 * n } else { 1 };
        self
    }

    /// Time-frequency area `W * Tp` of one replica in s*Hz.
    pub fn replica_area(&self) -> f64 {
        self.bandwidth * self.packet_duration
    }

    /// Duration of one virtual frame, `M * Tp`.
    pub fn frame_duration(&self) -> f64 {
        self.slots as f64 * self.packet_duration
    }

    /// Total spectrum `2Fm + W` that replicas can occupy.
    pub fn occupied_band(&self) -> f64 {
        2.0 * self.max_cfo + self.bandwidth
    }

    /// Useful payload bits per packet, `D - Doh`.
    pub fn payload_bits(&self) -> u32 {
        self.packet_bits - self.overhead_bits
    }

    /// Normalised offered load per channel `W/(2Fm+W) * g * Tp` for replica rate `g`.
    pub fn offered_load(&self, replica_rate: f64) -> f64 {
        self.bandwidth / self.occupied_band() * replica_rate * self.packet_duration
    }

    /// Inverse of [`Self::offered_load`]: replica rate `g` that yields `load`.
    pub fn replica_rate_for_load(&self, load: f64) -> f64 {
        load * self.occupied_band() / (self.bandwidth * self.packet_duration)
    }

    /// Checks the model invariants. Set `sample_level` to also check the
    /// receiver sampling rate.
    pub fn validate(&self, sample_level: bool) -> Result<()> {
        if !(self.bandwidth > 0.0) {
            return Err(Error::invalid("bandwidth must be positive"));
        }
        if !(self.max_cfo >= 0.0) {
            return Err(Error::invalid("max_cfo must be non-negative"));
        }
        if sample_level && self.sample_rate < 2.0 * self.occupied_band() {
            return Err(Error::invalid(format!(
                "sample_rate {} below 2(2Fm+W) = {}",
                self.sample_rate,
                2.0 * self.occupied_band()
            )));
        }
        if self.replicas < 1 || self.replicas > self.slots {
            return Err(Error::invalid(format!(
                "need 1 <= N <= M, got N={} M={}",
                self.replicas, self.slots
            )));
        }
        if !(self.packet_duration > 0.0) {
            return Err(Error::invalid("packet_duration must be positive"));
        }
        if self.overhead_bits >= self.packet_bits {
            return Err(Error::invalid("need D > Doh"));
        }
        if self.sinr_threshold > self.required_snr {
            return Err(Error::invalid("need St <= gamma"));
        }
        if !(self.symbol_duration > 0.0) || !(self.ack_wait >= 0.0) || !(self.max_frame > 0.0) {
            return Err(Error::invalid("durations must be positive"));
        }
        Ok(())
    }
}

/// Device energy and link-budget constants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnergyParams {
    /// Battery capacity `E0` in J.
    pub battery: f64,
    /// Mean reporting period `Tr` in s.
    pub report_period: f64,
    /// Static energy per report `Est` in J.
    pub static_energy: f64,
    /// Circuit power `Pc` in W.
    pub circuit_power: f64,
    /// Inverse power-amplifier efficiency `alpha`.
    pub pa_inefficiency: f64,
    /// Cell radius `Rc` in m.
    pub cell_radius: f64,
    /// Inner exclusion radius `Rin` in m.
    pub inner_radius: f64,
    /// Product of antenna gains `G` (linear). The default also absorbs the
    /// pathloss intercept and link margin so that the `r^sigma` model matches
    /// the dB model at the cell edge.
    pub antenna_gain: f64,
    /// Pathloss exponent `sigma`; the dB model uses a slope of `10 sigma` dB/decade.
    pub pathloss_exponent: f64,
    /// Pathloss at 1 km in dB for the dB model.
    pub pathloss_intercept_db: f64,
    /// Synchronisation energy `Esynch` in J (granted access).
    pub sync_energy: f64,
    /// Synchronisation delay `Dsynch` in s (granted access).
    pub sync_delay: f64,
    /// Minimum transmit power in W.
    pub min_tx_power: f64,
    /// Maximum transmit power in W.
    pub max_tx_power: f64,
    /// Fixed link margin added to the dB pathloss, in dB.
    pub link_margin_db: f64,
}

impl Default for EnergyParams {
    fn default() -> Self {
        Self {
            battery: 1000.0,
            report_period: 1000.0,
            static_energy: 1e-3,
            circuit_power: 1e-3,
            pa_inefficiency: 2.5,
            cell_radius: 1000.0,
            inner_radius: 50.0,
            antenna_gain: 1000f64.powf(3.76) / db_to_linear(148.1),
            pathloss_exponent: 3.76,
            pathloss_intercept_db: 128.1,
            sync_energy: 6e-3,
            sync_delay: 2.0,
            min_tx_power: 1e-3,
            max_tx_power: 0.1,
            link_margin_db: 20.0,
        }
    }
}

impl EnergyParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("battery", self.battery),
            ("report_period", self.report_period),
            ("static_energy", self.static_energy),
            ("circuit_power", self.circuit_power),
            ("pa_inefficiency", self.pa_inefficiency),
            ("cell_radius", self.cell_radius),
            ("inner_radius", self.inner_radius),
            ("antenna_gain", self.antenna_gain),
            ("pathloss_exponent", self.pathloss_exponent),
            ("sync_energy", self.sync_energy),
            ("sync_delay", self.sync_delay),
        ];
        for (name, v) in positive {
            if !(v > 0.0) {
                return Err(Error::invalid(format!("{name} must be positive, got {v}")));
            }
        }
        if self.inner_radius >= self.cell_radius {
            return Err(Error::invalid("need inner_radius < cell_radius"));
        }
        if self.min_tx_power > self.max_tx_power {
            return Err(Error::invalid("need min_tx_power <= max_tx_power"));
        }
        Ok(())
    }
}

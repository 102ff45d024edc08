//! The full chain: frame, estimate offsets, correlate, cancel ghosts, extract.

use serde::{Deserialize, Serialize};

use crate::correlate::{correlate_preamble, DEFAULT_ETA};
use crate::drift::{build_drift_table, DriftTable};
use crate::extract::{extract_sequences, fit_packet, Extracted, PacketFit};
use crate::framing::{default_power_threshold, frame_events_with, DetectionEvent, FramingConfig};
use crate::modem::{level_scale, preamble_reference, PacketLayout, DEFAULT_ROOT};
use crate::periodogram::{periodogram_peaks, PeriodogramConfig};
use crate::spc::{spc_resolve_with, Branch, Peak, PeakMap, SpcConfig, Validated};
use crate::{ComplexSignal, Result, SystemParams, C64};

/// Template images weaker than this fraction of the clean peak are ignored.
pub const IMAGE_FLOOR: f64 = 0.3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReceiverConfig {
    pub root: usize,
    /// Correlation threshold as a fraction of the clean peak.
    pub eta: f64,
    /// Drift table grid step, Hz.
    pub drift_step: f64,
    pub framing: FramingConfig,
    pub periodogram: PeriodogramConfig,
    pub spc: SpcConfig,
    /// Accepted packets must clear this fraction of the clean peak.
    pub accept_ratio: f64,
    /// Minimum payload carrier amplitude, relative to its expected value,
    /// over the whole payload
    pub carrier_full: f64,
    /// and over each half of it.
    pub carrier_half: f64,
    /// Cap on packets taken from one event.
    pub max_packets: usize,
    /// Accepted candidates compared by explained energy per round.
    pub contenders: usize,
}

impl Default for ReceiverConfig {
    fn default() -> Self {
        Self {
            root: DEFAULT_ROOT,
            eta: DEFAULT_ETA,
            drift_step: 1.0,
            framing: FramingConfig::default(),
            periodogram: PeriodogramConfig::default(),
            spc: SpcConfig::default(),
            accept_ratio: 0.7,
            carrier_full: 0.45,
            carrier_half: 0.2,
            max_packets: 32,
            contenders: 4,
        }
    }
}

/// A packet taken out of an event, before bit demapping.
#[derive(Debug, Clone, PartialEq)]
pub struct Decoded {
    pub validated: Validated,
    pub fit: Option<PacketFit>,
    pub partial: bool,
    pub time: f64,
}

/// A packet found by the receiver.
#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    pub cfo: f64,
    /// Absolute start time, s.
    pub time: f64,
    pub magnitude: f64,
    pub partial: bool,
    pub bits: Vec<bool>,
}

pub struct Receiver {
    pub params: SystemParams,
    pub config: ReceiverConfig,
    pub layout: PacketLayout,
    pub reference: Vec<C64>,
    pub drift: DriftTable,
}

impl Receiver {
    pub fn new(p: &SystemParams, config: ReceiverConfig) -> Result<Self> {
        let layout = PacketLayout::from_params(p)?;
        let reference = preamble_reference(p, config.root)?;
        let drift = build_drift_table(
            p.preamble_len,
            config.root,
            p.symbol_duration,
            p.sample_rate,
            p.occupied_band(),
            config.drift_step,
        )?
        .with_images(layout.payload_symbols * layout.samples_per_symbol, 1.5 * level_scale(), IMAGE_FLOOR)?;
        Ok(Self { params: p.clone(), config, layout, reference, drift })
    }

    pub fn threshold(&self) -> f64 {
        self.config.eta * self.reference.iter().map(|z| z.norm_sqr()).sum::<f64>()
    }

    pub fn events(&self, signal: &ComplexSignal, noise_variance: f64) -> Vec<DetectionEvent> {
        frame_events_with(signal, &self.params, default_power_threshold(noise_variance), &self.config.framing)
    }

    pub fn cfos(&self, ev: &DetectionEvent) -> Vec<f64> {
        let fmax = self.params.max_cfo + 0.05 * self.params.bandwidth;
        periodogram_peaks(&ev.buffer.samples, ev.buffer.fs, fmax, &self.config.periodogram)
            .into_iter()
            .map(|c| c.freq)
            .collect()
    }

    pub fn peak_map(&self, ev: &DetectionEvent, cfos: &[f64]) -> PeakMap {
        let spacing = self.layout.samples_per_symbol / 2;
        let branches = cfos
            .iter()
            .map(|&cfo| {
                let c = correlate_preamble(&ev.buffer.samples, ev.buffer.fs, cfo, &self.reference, self.config.eta, spacing);
                Branch {
                    cfo,
                    peaks: c.positions.iter().zip(&c.magnitudes).map(|(&position, &magnitude)| Peak { position, magnitude }).collect(),
                }
            })
            .collect();
        PeakMap { branches, threshold: self.threshold() }
    }

    /// Payload carrier amplitude after the preamble at `pos`, demodulated by
    /// `cfo` and scaled by the preamble amplitude, over the whole payload and
    /// its two halves. A nonnegative payload of mean level leaves `1.0`.
    pub fn payload_carrier(&self, x: &[C64], fs: f64, cfo: f64, pos: usize) -> (f64, f64, f64) {
        let lp = self.reference.len();
        let len = self.layout.packet_samples();
        let a = (pos + lp).min(x.len());
        let b = (pos + len).min(x.len());
        if b <= a + 1 {
            return (0.0, 0.0, 0.0);
        }
        let w = std::f64::consts::TAU * cfo / fs;
        let rot = |n: usize| x[n] * C64::from_polar(1.0, -w * n as f64);
        let pre: C64 = (pos..a).map(|n| rot(n) * self.reference[n - pos].conj()).sum();
        let amp = pre.norm() / lp as f64;
        let expect = amp * 1.5 * level_scale();
        if expect <= 0.0 {
            return (0.0, 0.0, 0.0);
        }
        let full = self.layout.packet_samples() - lp;
        let mid = a + full / 2;
        let mean = |u: usize, v: usize, n: usize| (u..v.min(b)).map(rot).sum::<C64>().norm() / n as f64 / expect;
        (mean(a, a + full, full), mean(a, mid, full / 2), mean(mid, a + full, full - full / 2))
    }

    fn spc_config(&self) -> SpcConfig {
        SpcConfig { accept_ratio: self.config.accept_ratio, clean_peak: self.threshold() / self.config.eta, ..self.config.spc }
    }

    /// Of the packets SPC accepts in `ev`, the one whose reconstruction
    /// explains the most signal energy. Peak height alone cannot separate a
    /// packet from a ghost of similar height; a ghost carries the wrong
    /// carrier and its reconstruction removes little.
    fn best_candidate(&self, ev: &DetectionEvent) -> Result<Option<(Validated, Option<PacketFit>, Extracted)>> {
        let cfos = self.cfos(ev);
        if cfos.is_empty() {
            return Ok(None);
        }
        let pm = self.peak_map(ev, &cfos);
        let (x, fs) = (&ev.buffer.samples, ev.buffer.fs);
        let verify = |cfo: f64, pos: usize| {
            let (full, h1, h2) = self.payload_carrier(x, fs, cfo, pos);
            full >= self.config.carrier_full && h1.min(h2) >= self.config.carrier_half
        };
        let mut best: Option<(f64, Validated, Option<PacketFit>, Extracted)> = None;
        for v in spc_resolve_with(&pm, &self.drift, &self.spc_config(), verify).into_iter().take(self.config.contenders) {
            let (fit, ex) = self.fit(ev, &v)?;
            let gain = fit.as_ref().map_or(0.0, |f| self.explained_energy(ev, &v, f, ex.samples.len()));
            if best.as_ref().map_or(true, |b| gain > b.0) {
                best = Some((gain, v, fit, ex));
            }
        }
        Ok(best.map(|(_, v, f, x)| (v, f, x)))
    }

    /// Drop in buffer energy when the modelled packet is subtracted.
    fn explained_energy(&self, ev: &DetectionEvent, v: &Validated, fit: &PacketFit, len: usize) -> f64 {
        let w = fit.waveform(&self.reference, self.layout.samples_per_symbol, v.cfo, ev.buffer.fs, len);
        ev.buffer.samples[v.offset..]
            .iter()
            .zip(&w)
            .map(|(x, w)| x.norm_sqr() - (x - w).norm_sqr())
            .sum()
    }

    /// Best preamble alignment within the image tolerance of `v`.
    fn relocate(&self, ev: &DetectionEvent, v: &Validated) -> Validated {
        let r = self.config.spc.image_tolerance;
        let lp = self.reference.len();
        let x = &ev.buffer.samples;
        let w = std::f64::consts::TAU * v.cfo / ev.buffer.fs;
        let score = |off: usize| -> f64 {
            (0..lp).map(|m| x[off + m] * C64::from_polar(1.0, -w * m as f64) * self.reference[m].conj()).sum::<C64>().norm()
        };
        let lo = v.offset.saturating_sub(r);
        let hi = (v.offset + r).min(x.len().saturating_sub(lp));
        let best = (lo..=hi).max_by(|&a, &b| score(a).total_cmp(&score(b))).unwrap_or(v.offset);
        Validated { offset: best, magnitude: score(best), ..*v }
    }

    fn fit(&self, ev: &DetectionEvent, v: &Validated) -> Result<(Option<PacketFit>, Extracted)> {
        let x = extract_sequences(ev, std::slice::from_ref(v), &self.params)?.remove(0);
        Ok((fit_packet(&x, &self.reference, &self.layout), x))
    }

    fn add_packet(&self, ev: &mut DetectionEvent, v: &Validated, fit: &PacketFit, len: usize, sign: f64) {
        let w = fit.waveform(&self.reference, self.layout.samples_per_symbol, v.cfo, ev.buffer.fs, len);
        for (d, s) in ev.buffer.samples[v.offset..].iter_mut().zip(w) {
            *d += s * sign;
        }
    }

    /// Successive cancellation over one event: accept the strongest packet
    /// SPC validates, subtract its reconstruction, and look again at the
    /// residual, which also re-estimates the carrier offsets. A final pass
    /// refits each packet with all the others removed.
    pub fn decode_event(&self, ev: &DetectionEvent) -> Result<Vec<Decoded>> {
        let mut residual = ev.clone();
        let mut found: Vec<Decoded> = Vec::new();
        while found.len() < self.config.max_packets {
            let Some((v, fit, x)) = self.best_candidate(&residual)? else { break };
            let again = found.iter().any(|d| {
                d.validated.offset.abs_diff(v.offset) <= self.config.spc.image_tolerance
                    && (d.validated.cfo - v.cfo).abs() <= self.config.spc.cfo_uncertainty
            });
            if again {
                break;
            }
            if let Some(f) = &fit {
                self.add_packet(&mut residual, &v, f, x.samples.len(), -1.0);
            }
            found.push(Decoded { validated: v, fit, partial: x.partial, time: x.time });
        }
        // refit each packet with all the others removed
        for i in 0..found.len() {
            let Some(old) = found[i].fit.clone() else { continue };
            let v = found[i].validated;
            let len = self.layout.packet_samples().min(residual.buffer.len() - v.offset);
            self.add_packet(&mut residual, &v, &old, len, 1.0);
            let mut nv = self.relocate(&residual, &v);
            // fold the fitted residual carrier into the offset estimate
            nv.cfo += old.slope * residual.buffer.fs / std::f64::consts::TAU;
            let (fit, x) = self.fit(&residual, &nv)?;
            let (nv, fit) = match fit {
                Some(f) => (nv, f),
                None => (v, old),
            };
            self.add_packet(&mut residual, &nv, &fit, x.samples.len().min(len), -1.0);
            found[i] = Decoded { validated: nv, fit: Some(fit), partial: x.partial, time: x.time };
        }
        Ok(found)
    }

    /// Validated `(cfo, offset)` pairs of one event, in the order found.
    pub fn resolve(&self, ev: &DetectionEvent) -> Vec<Validated> {
        self.decode_event(ev).map(|d| d.into_iter().map(|d| d.validated).collect()).unwrap_or_default()
    }

    pub fn process_event(&self, ev: &DetectionEvent) -> Result<Vec<Detection>> {
        Ok(self
            .decode_event(ev)?
            .into_iter()
            .map(|d| Detection {
                cfo: d.validated.cfo,
                time: d.time,
                magnitude: d.validated.magnitude,
                partial: d.partial,
                bits: d.fit.map(|f| f.bits()).unwrap_or_default(),
            })
            .collect())
    }

    pub fn process(&self, signal: &ComplexSignal, noise_variance: f64) -> Result<Vec<Detection>> {
        let mut out = Vec::new();
        for ev in self.events(signal, noise_variance) {
            out.extend(self.process_event(&ev)?);
        }
        Ok(out)
    }
}

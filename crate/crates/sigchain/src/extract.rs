//! Packet extraction and 4-PAM decisions.

use crate::framing::DetectionEvent;
use crate::modem::{level_scale, levels_to_bits, PacketLayout};
use crate::signal::rotate;
use crate::spc::Validated;
use crate::{Result, SystemParams, C64};

/// A demodulated, packet-length slice `Z` with its offset `f` and start `tau`.
#[derive(Debug, Clone, PartialEq)]
pub struct Extracted {
    pub samples: Vec<C64>,
    pub cfo: f64,
    /// Start, samples into the event buffer.
    pub offset: usize,
    /// Start, absolute seconds.
    pub time: f64,
    /// The buffer ended before the packet did.
    pub partial: bool,
}

pub fn extract_sequences(ev: &DetectionEvent, validated: &[Validated], p: &SystemParams) -> Result<Vec<Extracted>> {
    let layout = PacketLayout::from_params(p)?;
    let len = layout.packet_samples();
    let buf = &ev.buffer;
    Ok(validated
        .iter()
        .map(|v| {
            let a = v.offset.min(buf.len());
            let b = (a + len).min(buf.len());
            let mut samples = buf.samples[a..b].to_vec();
            rotate(&mut samples, -v.cfo, buf.fs);
            Extracted { partial: b - a < len, samples, cfo: v.cfo, offset: v.offset, time: buf.t0 + v.offset as f64 / buf.fs }
        })
        .collect())
}

/// Channel and payload estimates of one packet, relative to its extracted
/// (carrier-removed) samples: sample `n` of the packet is modelled as
/// `amplitude * exp(j (phase + slope n)) * template[n]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PacketFit {
    pub levels: Vec<u8>,
    pub amplitude: f64,
    pub phase: f64,
    /// Residual carrier, rad/sample.
    pub slope: f64,
}

impl PacketFit {
    pub fn bits(&self) -> Vec<bool> {
        levels_to_bits(&self.levels)
    }

    /// The modelled packet with carrier `cfo` put back, `len` samples long.
    pub fn waveform(&self, reference: &[C64], sps: usize, cfo: f64, fs: f64, len: usize) -> Vec<C64> {
        let scale = level_scale();
        let w = std::f64::consts::TAU * cfo / fs + self.slope;
        (0..len)
            .map(|n| {
                let t = if n < reference.len() {
                    reference[n]
                } else {
                    match self.levels.get((n - reference.len()) / sps) {
                        Some(&l) => C64::new(scale * l as f64, 0.0),
                        None => C64::new(0.0, 0.0),
                    }
                };
                t * C64::from_polar(self.amplitude, self.phase + w * n as f64)
            })
            .collect()
    }
}

/// Fits amplitude, phase and payload decisions to an extracted packet.
///
/// Amplitude and phase come from the preamble; a residual offset is taken
/// from the phase step between the preamble halves and then refined on the
/// payload symbols that are clearly not zero. Only whole symbols are decided.
pub fn fit_packet(x: &Extracted, reference: &[C64], layout: &PacketLayout) -> Option<PacketFit> {
    let sps = layout.samples_per_symbol;
    let lp = reference.len();
    if x.samples.len() < lp {
        return None;
    }
    let half = lp / 2;
    let corr = |a: usize, b: usize| -> C64 { (a..b).map(|m| x.samples[m] * reference[m].conj()).sum() };
    let (c1, c2) = (corr(0, half), corr(half, lp));
    // rad/sample, from halves whose centres are half a preamble apart
    let mut slope = (c2 * c1.conj()).arg() / half as f64;
    let c: C64 = (0..lp).map(|m| x.samples[m] * reference[m].conj() * C64::from_polar(1.0, -slope * m as f64)).sum();
    let mut amp = c.norm() / lp as f64;
    if !(amp > 0.0) {
        return None;
    }
    let mut phase = c.arg();

    let nsym = ((x.samples.len() - lp) / sps).min(layout.payload_symbols);
    let raw: Vec<(f64, C64)> = (0..nsym)
        .map(|k| {
            let a = lp + k * sps;
            let t = a as f64 + (sps as f64 - 1.0) / 2.0;
            (t, x.samples[a..a + sps].iter().sum::<C64>() / sps as f64)
        })
        .collect();
    let scale = level_scale();
    let decide = |phase: f64, slope: f64, amp: f64| -> Vec<u8> {
        raw.iter()
            .map(|&(t, z)| {
                let r = (z * C64::from_polar(1.0, -(phase + slope * t))).re / amp / scale;
                r.round().clamp(0.0, 3.0) as u8
            })
            .collect()
    };
    let first = decide(phase, slope, amp);

    // least-squares line through the residual phases of the strong symbols
    let pts: Vec<(f64, f64)> = raw
        .iter()
        .zip(&first)
        .filter(|(_, &l)| l >= 2)
        .map(|(&(t, z), _)| (t, (z * C64::from_polar(1.0, -(phase + slope * t))).arg()))
        .collect();
    if pts.len() >= 3 {
        let n = pts.len() as f64;
        let (mt, me) = (pts.iter().map(|p| p.0).sum::<f64>() / n, pts.iter().map(|p| p.1).sum::<f64>() / n);
        let stt: f64 = pts.iter().map(|p| (p.0 - mt).powi(2)).sum();
        if stt > 0.0 {
            let b = pts.iter().map(|p| (p.0 - mt) * (p.1 - me)).sum::<f64>() / stt;
            slope += b;
            phase += me - b * mt;
        }
    }
    // amplitude refit against the first decisions
    let (num, den) = raw.iter().zip(&first).fold((0.0, 0.0), |(n, d), (&(t, z), &l)| {
        let r = (z * C64::from_polar(1.0, -(phase + slope * t))).re;
        (n + r * l as f64 * scale, d + (l as f64 * scale).powi(2))
    });
    if den > 0.0 && num > 0.0 {
        amp = num / den;
    }
    Some(PacketFit { levels: decide(phase, slope, amp), amplitude: amp, phase, slope })
}

/// Payload symbol decisions for an extracted packet.
pub fn decide_levels(x: &Extracted, reference: &[C64], layout: &PacketLayout) -> Vec<u8> {
    fit_packet(x, reference, layout).map(|f| f.levels).unwrap_or_default()
}

pub fn demap_bits(x: &Extracted, reference: &[C64], layout: &PacketLayout) -> Vec<bool> {
    levels_to_bits(&decide_levels(x, reference, layout))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::modem::{preamble_reference, random_bits, synthesize_with_phase};
    use crate::ComplexSignal;
    use gfra_core::traffic::substream;

    fn event(buffer: ComplexSignal) -> DetectionEvent {
        DetectionEvent {
            start_time: buffer.t0,
            end_time: buffer.t0 + buffer.duration(),
            frame_len: buffer.duration(),
            buffer,
            continues: false,
        }
    }

    #[test]
    fn full_buffer_gives_packet_length() {
        let p = SystemParams::default();
        let ev = event(ComplexSignal::zeros(2000, 4000.0, 0.0).unwrap());
        let v = Validated { cfo: 0.0, offset: 0, magnitude: 1.0 };
        let x = extract_sequences(&ev, &[v], &p).unwrap();
        assert_eq!(x[0].samples.len(), 2000);
        assert!(!x[0].partial);
        let v = Validated { offset: 1500, ..v };
        let x = extract_sequences(&ev, &[v], &p).unwrap();
        assert!(x[0].partial);
        assert_eq!(x[0].samples.len(), 500);
    }

    #[test]
    fn clean_round_trip_with_offset_error() {
        let p = SystemParams::default();
        let layout = PacketLayout::from_params(&p).unwrap();
        let r = preamble_reference(&p, 5).unwrap();
        let mut rng = substream(4, 0);
        for (cfo, err) in [(0.0, 0.0), (37.0, 0.8), (-91.0, -1.5)] {
            let bits = random_bits(&mut rng, 54);
            let mut s = ComplexSignal::zeros(3000, 4000.0, 0.0).unwrap();
            let mut pk = synthesize_with_phase(&bits, &p, cfo, 2.0, 5).unwrap();
            pk.t0 = 0.1;
            s.mix_in(&pk);
            s.add_noise(&mut rng, 0.01);
            let v = Validated { cfo: cfo + err, offset: 400, magnitude: 920.0 };
            let x = extract_sequences(&event(s), &[v], &p).unwrap();
            assert_eq!(demap_bits(&x[0], &r, &layout), bits, "cfo {cfo} err {err}");
        }
    }

    #[test]
    fn refit_waveform_cancels_the_packet() {
        let p = SystemParams::default();
        let layout = PacketLayout::from_params(&p).unwrap();
        let r = preamble_reference(&p, 5).unwrap();
        let bits = random_bits(&mut substream(5, 0), 54);
        let pk = synthesize_with_phase(&bits, &p, 41.0, -0.4, 5).unwrap();
        let v = Validated { cfo: 41.6, offset: 0, magnitude: 920.0 };
        let x = extract_sequences(&event(pk.clone()), &[v], &p).unwrap();
        let fit = fit_packet(&x[0], &r, &layout).unwrap();
        let w = fit.waveform(&r, 40, 41.6, 4000.0, 2000);
        let resid: f64 = w.iter().zip(&pk.samples).map(|(a, b)| (a - b).norm_sqr()).sum();
        assert!(resid < 1e-3 * pk.energy() * 4000.0, "residual {resid}");
    }
}

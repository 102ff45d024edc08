//! Preamble matched filtering after carrier removal.

use rustfft::FftPlanner;

use crate::signal::rotate;
use crate::C64;

/// Default detection threshold as a fraction of the clean peak.
pub const DEFAULT_ETA: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Correlation {
    /// Start offsets (samples into the buffer) of the detected preambles.
    pub positions: Vec<usize>,
    pub magnitudes: Vec<f64>,
    /// Complex correlation at each position; its phase is the carrier phase.
    pub values: Vec<C64>,
}

/// `c[t] = sum_m x[t + m] conj(r[m])` for every full overlap `t`.
pub fn cross_correlate(x: &[C64], r: &[C64]) -> Vec<C64> {
    if r.is_empty() || x.len() < r.len() {
        return Vec::new();
    }
    let n = (x.len() + r.len()).next_power_of_two();
    let mut planner = FftPlanner::new();
    let (fwd, inv) = (planner.plan_fft_forward(n), planner.plan_fft_inverse(n));
    let mut a = vec![C64::new(0.0, 0.0); n];
    a[..x.len()].copy_from_slice(x);
    let mut b = vec![C64::new(0.0, 0.0); n];
    b[..r.len()].copy_from_slice(r);
    fwd.process(&mut a);
    fwd.process(&mut b);
    for (u, v) in a.iter_mut().zip(&b) {
        *u *= v.conj();
    }
    inv.process(&mut a);
    let scale = 1.0 / n as f64;
    a.truncate(x.len() - r.len() + 1);
    a.iter_mut().for_each(|z| *z *= scale);
    a
}

/// Demodulates `x` by `cfo` and returns local maxima of the matched-filter
/// magnitude above `eta * |r|^2`, at least `spacing` samples apart.
pub fn correlate_preamble(x: &[C64], fs: f64, cfo: f64, reference: &[C64], eta: f64, spacing: usize) -> Correlation {
    let mut y = x.to_vec();
    rotate(&mut y, -cfo, fs);
    let c = cross_correlate(&y, reference);
    let mag: Vec<f64> = c.iter().map(|z| z.norm()).collect();
    let thr = eta * reference.iter().map(|z| z.norm_sqr()).sum::<f64>();
    let local_max = |t: usize| (t == 0 || mag[t] > mag[t - 1]) && (t + 1 == mag.len() || mag[t] >= mag[t + 1]);
    let mut cand: Vec<usize> = (0..mag.len()).filter(|&t| mag[t] >= thr && local_max(t)).collect();
    cand.sort_by(|&a, &b| mag[b].total_cmp(&mag[a]).then(a.cmp(&b)));
    let mut kept: Vec<usize> = Vec::new();
    for t in cand {
        if kept.iter().all(|&k| k.abs_diff(t) >= spacing.max(1)) {
            kept.push(t);
        }
    }
    kept.sort_unstable();
    Correlation {
        magnitudes: kept.iter().map(|&t| mag[t]).collect(),
        values: kept.iter().map(|&t| c[t]).collect(),
        positions: kept,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::modem::{preamble_reference, random_bits, synthesize_with_phase};
    use crate::{ComplexSignal, SystemParams};
    use gfra_core::traffic::substream;

    #[test]
    fn fft_correlation_matches_direct_sum() {
        let mut rng = substream(1, 0);
        let x: Vec<C64> = (0..300).map(|_| C64::new(rand::Rng::gen(&mut rng), rand::Rng::gen(&mut rng))).collect();
        let r = x[40..90].to_vec();
        let c = cross_correlate(&x, &r);
        assert_eq!(c.len(), 251);
        for t in [0, 17, 40, 250] {
            let d: C64 = (0..r.len()).map(|m| x[t + m] * r[m].conj()).sum();
            assert!((d - c[t]).norm() < 1e-9);
        }
    }

    fn packet_in_buffer(offset: usize, cfo: f64, phase: f64) -> (Vec<C64>, Vec<C64>) {
        let p = SystemParams::default();
        let bits = random_bits(&mut substream(2, 0), 54);
        let mut s = ComplexSignal::zeros(4000, p.sample_rate, 0.0).unwrap();
        let mut x = synthesize_with_phase(&bits, &p, cfo, phase, 5).unwrap();
        x.t0 = offset as f64 / p.sample_rate;
        s.mix_in(&x);
        (s.samples, preamble_reference(&p, 5).unwrap())
    }

    #[test]
    fn clean_packet_peaks_at_its_offset() {
        for &(off, cfo) in &[(0usize, 0.0), (733, 42.0), (1999, -88.5)] {
            let (x, r) = packet_in_buffer(off, cfo, 1.1);
            let c = correlate_preamble(&x, 4000.0, cfo, &r, DEFAULT_ETA, 40);
            let best = c.magnitudes.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap().0;
            assert!(c.positions[best].abs_diff(off) <= 1, "{off}: {:?}", c.positions);
            assert!((c.magnitudes[best] - 920.0).abs() < 1e-6);
        }
    }

    #[test]
    fn magnitude_ignores_phase() {
        let (a, r) = packet_in_buffer(500, 10.0, 0.0);
        let (b, _) = packet_in_buffer(500, 10.0, 2.5);
        let ca = correlate_preamble(&a, 4000.0, 10.0, &r, DEFAULT_ETA, 40);
        let cb = correlate_preamble(&b, 4000.0, 10.0, &r, DEFAULT_ETA, 40);
        assert_eq!(ca.positions, cb.positions);
        assert!(ca.magnitudes.iter().zip(&cb.magnitudes).all(|(x, y)| (x - y).abs() < 1e-6));
    }
}

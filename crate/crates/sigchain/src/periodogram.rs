//! Carrier offset estimation from the zero-padded magnitude spectrum.

use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::framing::DetectionEvent;
use crate::{SystemParams, C64};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PeriodogramConfig {
    pub zero_padding: usize,
    /// Peaks must clear the median bin by this much.
    pub floor_db: f64,
    /// And lie within this much of the strongest peak.
    pub dynamic_range_db: f64,
}

impl Default for PeriodogramConfig {
    fn default() -> Self {
        Self { zero_padding: 4, floor_db: 10.0, dynamic_range_db: 10.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CfoEstimate {
    pub freq: f64,
    /// Interpolated peak power, dB above the median bin.
    pub snr_db: f64,
}

/// CFO estimates for an event, strongest first.
pub fn periodogram_cfos(ev: &DetectionEvent, p: &SystemParams) -> Vec<f64> {
    periodogram_peaks(&ev.buffer.samples, ev.buffer.fs, p.max_cfo + 0.05 * p.bandwidth, &PeriodogramConfig::default())
        .into_iter()
        .map(|c| c.freq)
        .collect()
}

/// Spectral peaks within `[-fmax, fmax]`.
pub fn periodogram_peaks(x: &[C64], fs: f64, fmax: f64, cfg: &PeriodogramConfig) -> Vec<CfoEstimate> {
    let n = x.len();
    if n < 64 {
        return Vec::new();
    }
    let nfft = (n * cfg.zero_padding.max(1)).next_power_of_two();
    let mut buf = vec![C64::new(0.0, 0.0); nfft];
    buf[..n].copy_from_slice(x);
    FftPlanner::new().plan_fft_forward(nfft).process(&mut buf);
    let pow: Vec<f64> = buf.iter().map(|z| z.norm_sqr()).collect();

    let mut sorted = pow.clone();
    sorted.sort_by(f64::total_cmp);
    let median = sorted[nfft / 2];
    let max = sorted[nfft - 1];
    if !(max > 0.0) {
        return Vec::new();
    }
    let floor = (median * 10f64.powf(cfg.floor_db / 10.0)).max(max * 10f64.powf(-cfg.dynamic_range_db / 10.0));

    let df = fs / nfft as f64;
    // one resolution bin of the unpadded transform
    let res = (nfft as f64 / n as f64).ceil() as i64;
    let kmax = ((fmax / df).floor() as i64).min(nfft as i64 / 2 - 1);
    let at = |k: i64| pow[k.rem_euclid(nfft as i64) as usize];

    let mut cands: Vec<(i64, f64)> = (-kmax..=kmax)
        .filter(|&k| {
            let v = at(k);
            v > floor && (1..=res).all(|d| v >= at(k - d) && v > at(k + d))
        })
        .map(|k| (k, at(k)))
        .collect();
    cands.sort_by(|a, b| b.1.total_cmp(&a.1));
    let mut kept: Vec<(i64, f64)> = Vec::new();
    for c in cands {
        if kept.iter().all(|k| (k.0 - c.0).abs() > res) {
            kept.push(c);
        }
    }
    kept.into_iter()
        .map(|(k, v)| {
            // parabola through the log powers of the peak and its neighbours
            let (a, b, c) = (at(k - 1).max(1e-300).ln(), v.ln(), at(k + 1).max(1e-300).ln());
            let den = a - 2.0 * b + c;
            let delta = if den.abs() > 1e-300 { (0.5 * (a - c) / den).clamp(-0.5, 0.5) } else { 0.0 };
            let peak = b - 0.25 * (a - c) * delta;
            CfoEstimate { freq: (k as f64 + delta) * df, snr_db: 10.0 * (peak.exp() / median.max(1e-300)).log10() }
        })
        .collect()
}

//! Synthetic calibration suites for the receiver chain.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::drift::build_drift_table;
use crate::modem::{random_bits, synthesize_packet};
use crate::receiver::{Receiver, ReceiverConfig};
use crate::{ComplexSignal, Result, SystemParams};
use gfra_core::params::{db_to_linear, linear_to_db};
use gfra_core::traffic::substream;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SuiteConfig {
    pub single_trials: usize,
    pub spc_trials: usize,
    /// Per-sample SNR; `None` uses the required SNR of the system.
    pub snr_db: Option<f64>,
    pub seed: u64,
    /// A validated peak matches an injected packet within this many samples
    pub time_tolerance: usize,
    /// and this many Hz.
    pub cfo_tolerance: f64,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        Self { single_trials: 1000, spc_trials: 1000, snr_db: None, seed: 1, time_tolerance: 2, cfo_tolerance: 3.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SingleReport {
    pub trials: usize,
    pub snr_db: f64,
    pub bits: usize,
    pub bit_errors: usize,
    /// Trials without exactly one full-length detection.
    pub lost: usize,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpcReport {
    pub scenarios: usize,
    pub snr_db: Option<f64>,
    pub injected: usize,
    pub validated: usize,
    pub false_positives: usize,
    pub misses: usize,
    /// Share of scenarios with at least one false validation.
    pub false_positive_rate: f64,
    pub miss_rate: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftReport {
    pub grid_points: usize,
    pub zero_shift: i64,
    pub max_abs_shift: i64,
    pub bound: i64,
    pub deterministic: bool,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub single: SingleReport,
    pub spc: SpcReport,
    pub drift: DriftReport,
    pub pass: bool,
}

fn snr_linear(p: &SystemParams, cfg: &SuiteConfig) -> f64 {
    cfg.snr_db.map(db_to_linear).unwrap_or(p.required_snr)
}

/// One packet at a random time and offset in a 1 s buffer of noise.
pub fn single_packet_suite(p: &SystemParams, rc: &ReceiverConfig, cfg: &SuiteConfig) -> Result<SingleReport> {
    let rx = Receiver::new(p, *rc)?;
    let snr = snr_linear(p, cfg);
    let noise = 1.0 / snr;
    let nbits = rx.layout.payload_bits();
    let (mut errors, mut lost) = (0, 0);
    for t in 0..cfg.single_trials {
        let mut rng = substream(cfg.seed, t as u64);
        let bits = random_bits(&mut rng, nbits);
        let df = rng.gen_range(-p.max_cfo..=p.max_cfo);
        let mut pk = synthesize_packet(&bits, p, df, &mut rng)?;
        pk.t0 = rng.gen_range(0.1..0.4);
        let mut s = ComplexSignal::zeros(p.sample_rate as usize, p.sample_rate, 0.0)?;
        s.mix_in(&pk);
        s.add_noise(&mut rng, noise);
        let det: Vec<_> = rx.process(&s, noise)?.into_iter().filter(|d| !d.partial).collect();
        if det.len() != 1 {
            lost += 1;
        }
        errors += match det.first() {
            Some(d) if d.bits.len() == nbits => d.bits.iter().zip(&bits).filter(|(a, b)| a != b).count(),
            _ => nbits,
        };
    }
    Ok(SingleReport {
        trials: cfg.single_trials,
        snr_db: linear_to_db(snr),
        bits: nbits * cfg.single_trials,
        bit_errors: errors,
        lost,
        pass: errors == 0 && lost == 0,
    })
}

/// Two packets overlapping in time with independent offsets. `noise_free`
/// drops the receiver noise.
pub fn two_packet_suite(p: &SystemParams, rc: &ReceiverConfig, cfg: &SuiteConfig, noise_free: bool) -> Result<SpcReport> {
    let rx = Receiver::new(p, *rc)?;
    let noise = if noise_free { 0.0 } else { 1.0 / snr_linear(p, cfg) };
    let nbits = rx.layout.payload_bits();
    let (mut validated, mut fp, mut fp_scen, mut misses) = (0, 0, 0, 0);
    for t in 0..cfg.spc_trials {
        let mut rng = substream(cfg.seed ^ 0x5bc, t as u64);
        let mut s = ComplexSignal::zeros((1.2 * p.sample_rate) as usize, p.sample_rate, 0.0)?;
        let mut truth = Vec::new();
        for _ in 0..2 {
            let df = rng.gen_range(-p.max_cfo..=p.max_cfo);
            let mut pk = synthesize_packet(&random_bits(&mut rng, nbits), p, df, &mut rng)?;
            let start = rng.gen_range(0.1..0.1 + p.packet_duration);
            // whole samples so that the reference position is exact
            pk.t0 = (start * p.sample_rate).round() / p.sample_rate;
            s.mix_in(&pk);
            truth.push((s.index_of(pk.t0), df));
        }
        s.add_noise(&mut rng, noise);
        let mut found = Vec::new();
        for ev in rx.events(&s, noise) {
            let base = s.index_of(ev.buffer.t0);
            found.extend(rx.resolve(&ev).into_iter().map(|v| (base + v.offset as i64, v.cfo)));
        }
        validated += found.len();
        let hit = |a: &(i64, f64), b: &(i64, f64)| {
            (a.0 - b.0).unsigned_abs() as usize <= cfg.time_tolerance && (a.1 - b.1).abs() <= cfg.cfo_tolerance
        };
        let f = found.iter().filter(|v| !truth.iter().any(|t| hit(v, t))).count();
        fp += f;
        fp_scen += (f > 0) as usize;
        misses += truth.iter().filter(|t| !found.iter().any(|v| hit(v, t))).count();
    }
    let n = cfg.spc_trials.max(1) as f64;
    let false_positive_rate = fp_scen as f64 / n;
    let miss_rate = misses as f64 / (2.0 * n);
    Ok(SpcReport {
        scenarios: cfg.spc_trials,
        snr_db: (!noise_free).then(|| linear_to_db(snr_linear(p, cfg))),
        injected: 2 * cfg.spc_trials,
        validated,
        false_positives: fp,
        misses,
        false_positive_rate,
        miss_rate,
        pass: false_positive_rate < 0.01 && miss_rate < 0.05,
    })
}

pub fn drift_suite(p: &SystemParams, rc: &ReceiverConfig) -> Result<DriftReport> {
    let build = || build_drift_table(p.preamble_len, rc.root, p.symbol_duration, p.sample_rate, p.occupied_band(), rc.drift_step);
    let (a, b) = (build()?, build()?);
    let zero_shift = a.lookup(0.0).map(|e| e.shift).unwrap_or(i64::MAX);
    let bound = (p.preamble_len / 2 * a.samples_per_symbol()) as i64;
    let max_abs_shift = a.max_abs_shift();
    let deterministic = a == b;
    Ok(DriftReport {
        grid_points: a.len(),
        zero_shift,
        max_abs_shift,
        bound,
        deterministic,
        pass: zero_shift == 0 && max_abs_shift <= bound && deterministic,
    })
}

pub fn validate_receiver(p: &SystemParams, rc: &ReceiverConfig, cfg: &SuiteConfig) -> Result<ValidationReport> {
    let single = single_packet_suite(p, rc, cfg)?;
    let spc = two_packet_suite(p, rc, cfg, false)?;
    let drift = drift_suite(p, rc)?;
    let pass = single.pass && spc.pass && drift.pass;
    Ok(ValidationReport { single, spc, drift, pass })
}

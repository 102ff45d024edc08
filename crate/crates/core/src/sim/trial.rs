//! One Monte Carlo run of the grant-free protocol with retransmissions.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::graph::CollisionGraph;
use super::sic::{sic_decode, SicConfig};
use crate::error::{Error, Result};
use crate::kpi::{attempt_energy, spectral_efficiency, KpiReport};
use crate::params::{EnergyParams, SystemParams};
use crate::traffic::{draw_virtual_frame, generate_arrivals, substream, Replica, SimRng};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrialConfig {
    /// New-packet rate, packets/s.
    pub lambda: f64,
    /// Length of the circular time axis, s.
    pub horizon: f64,
    pub sic: SicConfig,
    /// Retransmissions after the first attempt.
    pub max_retries: usize,
    /// Mean transmit power used for energy accounting, W.
    pub avg_tx_power: f64,
    /// Record the per-replica interference of counted attempts.
    pub collect_interference: bool,
    /// Extra delay before a retransmission, uniform on `[0, retry_jitter]` s.
    pub retry_jitter: f64,
}

impl Default for TrialConfig {
    fn default() -> Self {
        Self {
            lambda: 1.0,
            horizon: 1e4,
            sic: SicConfig::default(),
            max_retries: 5,
            avg_tx_power: 1e-3,
            collect_interference: false,
            retry_jitter: 0.0,
        }
    }
}

impl TrialConfig {
    /// Horizon long enough for about `packets` new packets.
    pub fn horizon_for_packets(lambda: f64, packets: f64) -> f64 {
        packets / lambda
    }
}

/// Empirical statistics of one trial. Counts cover packets whose first
/// attempt starts outside the warm-up margins.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct TrialResult {
    pub packets: usize,
    pub attempts: usize,
    pub failed_attempts: usize,
    pub delivered: usize,
    /// Packets that exhausted all retries.
    pub dropped: usize,
    /// Replica rate over the whole horizon, retransmissions included.
    pub replica_rate: f64,
    pub offered_load: f64,
    /// Per-attempt outage; `None` when nothing was sent.
    pub outage: Option<f64>,
    pub kpi: Option<KpiReport>,
    /// Normalised interference `M / (W Tp)` per replica, if collected.
    pub interference: Vec<f64>,
    /// Graph rebuilds until no further retransmission was triggered.
    pub passes: usize,
}

impl TrialResult {
    pub fn success(&self) -> Option<f64> {
        self.outage.map(|o| 1.0 - o)
    }
}

struct Attempt {
    chain: usize,
    retry: usize,
    start: f64,
}

/// Runs one trial. Failed packets are resent as fresh virtual frames
/// (new slots and carrier offset) `Tack` after their frame ends. Because a
/// retransmission adds interference, decoding is repeated on the enlarged
/// set until no new retransmission appears.
pub fn run_trial(
    rng: &mut SimRng,
    p: &SystemParams,
    e: &EnergyParams,
    cfg: &TrialConfig,
) -> Result<TrialResult> {
    let frame = p.frame_duration();
    let warmup = 2.0 * frame;
    let cycle = frame + p.ack_wait;
    if !(cfg.horizon > 4.0 * warmup) || !(cfg.horizon >= 2.0 * p.packet_duration) {
        return Err(Error::InvalidArgument(format!("horizon {} too short", cfg.horizon)));
    }
    let arrivals = generate_arrivals(rng, cfg.lambda, cfg.horizon);
    let frame_seed: u64 = rng.gen();

    let mut attempts: Vec<Attempt> =
        arrivals.iter().enumerate().map(|(c, &t)| Attempt { chain: c, retry: 0, start: t }).collect();
    let mut last = (0..arrivals.len()).collect::<Vec<usize>>();
    let mut replicas: Vec<Replica> = Vec::new();
    let mut drawn = 0;
    let mut passes = 0;
    let (graph, outcome) = loop {
        passes += 1;
        for (k, a) in attempts.iter_mut().enumerate().skip(drawn) {
            let mut frng = substream(frame_seed, ((a.chain as u64) << 8) | a.retry as u64);
            if a.retry > 0 && cfg.retry_jitter > 0.0 {
                a.start += frng.gen_range(0.0..cfg.retry_jitter);
            }
            let vf = draw_virtual_frame(&mut frng, p, a.chain as u64, a.start)?;
            replicas.extend(vf.replicas(k, p));
        }
        drawn = attempts.len();
        let graph = CollisionGraph::from_replicas(replicas.clone(), attempts.len(), Some(cfg.horizon));
        let outcome = sic_decode(&graph, p, &cfg.sic);
        let mut spawned = false;
        for c in 0..last.len() {
            let a = &attempts[last[c]];
            if !outcome.decoded[last[c]] && a.retry < cfg.max_retries {
                let next = Attempt { chain: c, retry: a.retry + 1, start: a.start + cycle };
                last[c] = attempts.len();
                attempts.push(next);
                spawned = true;
            }
        }
        if !spawned {
            break (graph, outcome);
        }
    };

    let counted = |t: f64| t >= warmup && t <= cfg.horizon - warmup;
    let mut res = TrialResult { passes, ..Default::default() };
    let mut delay_sum = 0.0;
    for (c, &t) in arrivals.iter().enumerate() {
        if !counted(t) {
            continue;
        }
        res.packets += 1;
        let fin = &attempts[last[c]];
        res.attempts += fin.retry + 1;
        res.failed_attempts += fin.retry;
        if outcome.decoded[last[c]] {
            res.delivered += 1;
            delay_sum += fin.start - t + frame;
        } else {
            res.failed_attempts += 1;
            res.dropped += 1;
        }
    }
    if cfg.collect_interference {
        for (k, a) in attempts.iter().enumerate() {
            if counted(arrivals[a.chain]) {
                for &r in &graph.packet_replicas[k] {
                    res.interference.push(graph.interference_area(r) / graph.replicas[r].area());
                }
            }
        }
    }
    res.replica_rate = graph.replicas.len() as f64 / cfg.horizon;
    res.offered_load = p.offered_load(res.replica_rate);
    if res.attempts > 0 {
        let po = res.failed_attempts as f64 / res.attempts as f64;
        let window = cfg.horizon - 2.0 * warmup;
        let e_att = attempt_energy(e, p, cfg.avg_tx_power);
        let per_report = e.static_energy + e_att * res.attempts as f64 / res.packets as f64;
        res.outage = Some(po);
        res.kpi = Some(KpiReport {
            outage: po,
            expected_delay: if res.delivered > 0 { delay_sum / res.delivered as f64 } else { f64::INFINITY },
            battery_lifetime: e.battery * e.report_period / per_report,
            energy_efficiency: (res.attempts - res.failed_attempts) as f64 * p.payload_bits() as f64
                / (res.attempts as f64 * e_att),
            spectral_efficiency: spectral_efficiency(res.packets as f64 / window, p),
            throughput: res.delivered as f64 / window,
            avg_tx_power: cfg.avg_tx_power,
        });
    }
    Ok(res)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::CombiningPolicy;

    #[test]
    fn no_traffic_is_not_applicable() {
        let p = SystemParams::default();
        let cfg = TrialConfig { lambda: 0.0, ..Default::default() };
        let r = run_trial(&mut substream(1, 0), &p, &EnergyParams::default(), &cfg).unwrap();
        assert_eq!(r.packets, 0);
        assert_eq!(r.outage, None);
        assert!(r.kpi.is_none());
    }

    #[test]
    fn conservation_and_retry_cap() {
        let p = SystemParams::default();
        let cfg = TrialConfig { lambda: 2.0, horizon: 2000.0, max_retries: 2, ..Default::default() };
        let r = run_trial(&mut substream(3, 0), &p, &EnergyParams::default(), &cfg).unwrap();
        assert_eq!(r.delivered + r.dropped, r.packets);
        assert!(r.attempts <= 3 * r.packets);
        assert!(r.failed_attempts <= r.attempts);
        assert!(r.passes >= 1);
    }

    #[test]
    fn low_load_reliability() {
        let p = SystemParams::default();
        // offered load 0.01 with N = 2
        let lambda = p.replica_rate_for_load(0.01) / 2.0;
        let cfg = TrialConfig {
            lambda,
            horizon: TrialConfig::horizon_for_packets(lambda, 20_000.0),
            sic: SicConfig { policy: CombiningPolicy::Mrc, ..Default::default() },
            ..Default::default()
        };
        let r = run_trial(&mut substream(5, 0), &p, &EnergyParams::default(), &cfg).unwrap();
        assert!(r.success().unwrap() >= 0.99, "{:?}", r.outage);
    }

    #[test]
    fn deterministic_given_seed() {
        let p = SystemParams::default();
        let cfg = TrialConfig { lambda: 1.5, horizon: 1000.0, ..Default::default() };
        let e = EnergyParams::default();
        let a = run_trial(&mut substream(9, 2), &p, &e, &cfg).unwrap();
        let b = run_trial(&mut substream(9, 2), &p, &e, &cfg).unwrap();
        assert_eq!(a, b);
    }
}

//! Granted-access baseline: synchronisation, then slotted contention on a
//! random-access channel, then one collision-free data transmission.

use rand::Rng;

use super::trial::TrialResult;
use crate::error::{Error, Result};
use crate::kpi::{granted_access_energy, spectral_efficiency, KpiReport, RaConfig};
use crate::params::{EnergyParams, SystemParams};
use crate::traffic::{generate_arrivals, SimRng};

/// One RA period: each of `contenders` picks one of `opportunities`
/// uniformly; returns whether each pick was unique.
pub fn ra_round(rng: &mut SimRng, contenders: usize, opportunities: usize) -> Vec<bool> {
    let choice: Vec<usize> = (0..contenders).map(|_| rng.gen_range(0..opportunities)).collect();
    let mut picks = vec![0u32; opportunities];
    for &c in &choice {
        picks[c] += 1;
    }
    choice.iter().map(|&c| picks[c] == 1).collect()
}

/// Simulates the baseline for new-report rate `lambda` over `horizon` seconds.
///
/// A report arriving at `t` synchronises until `t + Dsynch` and then contends
/// from the next RA period on. Every contender picks one of the `K`
/// opportunities uniformly; singletons are granted and transmit, the rest
/// retry in the following period. `outage` is the per-attempt RA failure
/// rate.
pub fn run_granted_baseline(
    rng: &mut SimRng,
    lambda: f64,
    horizon: f64,
    p: &SystemParams,
    e: &EnergyParams,
    ra: &RaConfig,
    avg_tx_power: f64,
) -> Result<TrialResult> {
    if ra.opportunities == 0 || !(ra.period > 0.0) {
        return Err(Error::InvalidArgument("RA channel needs opportunities and a positive period".into()));
    }
    let arrivals = generate_arrivals(rng, lambda, horizon);
    // (arrival index, attempts so far)
    let mut backlog: Vec<(usize, usize)> = Vec::new();
    let mut next = 0;
    let mut res = TrialResult { passes: 1, ..Default::default() };
    let (mut delay_sum, mut energy) = (0.0, 0.0);
    let mut period = 0u64;
    loop {
        let t = period as f64 * ra.period;
        while next < arrivals.len() && arrivals[next] + e.sync_delay <= t {
            backlog.push((next, 0));
            next += 1;
        }
        if backlog.is_empty() && next >= arrivals.len() {
            break;
        }
        if backlog.is_empty() {
            // jump to the period in which the next report is ready
            period = ((arrivals[next] + e.sync_delay) / ra.period).ceil() as u64;
            continue;
        }
        let granted = ra_round(rng, backlog.len(), ra.opportunities);
        let mut keep = Vec::with_capacity(backlog.len());
        for (&(i, tries), ok) in backlog.iter().zip(granted) {
            let tries = tries + 1;
            res.attempts += 1;
            if ok {
                res.delivered += 1;
                res.packets += 1;
                delay_sum += t - arrivals[i] + p.packet_duration;
                energy += granted_access_energy(tries as f64, e, p, ra, avg_tx_power);
            } else {
                res.failed_attempts += 1;
                if tries >= ra.max_attempts {
                    res.packets += 1;
                    res.dropped += 1;
                    energy += granted_access_energy(tries as f64, e, p, ra, avg_tx_power)
                        - avg_tx_power * e.pa_inefficiency * p.packet_duration;
                } else {
                    keep.push((i, tries));
                }
            }
        }
        backlog = keep;
        period += 1;
    }
    res.replica_rate = res.delivered as f64 / horizon;
    res.offered_load = p.offered_load(res.replica_rate);
    if res.attempts > 0 {
        let po = res.failed_attempts as f64 / res.attempts as f64;
        let per_report = e.static_energy + energy / res.packets as f64;
        res.outage = Some(po);
        res.kpi = Some(KpiReport {
            outage: po,
            expected_delay: if res.delivered > 0 { delay_sum / res.delivered as f64 } else { f64::INFINITY },
            battery_lifetime: e.battery * e.report_period / per_report,
            energy_efficiency: res.delivered as f64 * p.payload_bits() as f64 / energy,
            spectral_efficiency: spectral_efficiency(arrivals.len() as f64 / horizon, p),
            throughput: res.delivered as f64 / horizon,
            avg_tx_power,
        });
    }
    Ok(res)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::traffic::substream;

    #[test]
    fn lone_device_succeeds_first_period() {
        let p = SystemParams::default();
        let e = EnergyParams::default();
        let ra = RaConfig::default();
        // one arrival expected in a short horizon with a low rate
        for seed in 0..20 {
            let r = run_granted_baseline(&mut substream(seed, 0), 0.05, 10.0, &p, &e, &ra, 1e-3).unwrap();
            if r.packets == 1 {
                assert_eq!(r.attempts, 1);
                assert_eq!(r.delivered, 1);
                let k = r.kpi.unwrap();
                assert!(k.expected_delay >= e.sync_delay);
                assert!(k.expected_delay <= e.sync_delay + ra.period + p.packet_duration);
            }
        }
    }

    #[test]
    fn ra_throughput_follows_aloha_law() {
        let mut rng = substream(8, 0);
        let k = 10;
        let mut best = (0, 0.0);
        for n in 1..=30 {
            let rounds = 20_000;
            let s: usize = (0..rounds).map(|_| ra_round(&mut rng, n, k).iter().filter(|&&x| x).count()).sum();
            let mean = s as f64 / rounds as f64;
            let law = n as f64 * (1.0 - 1.0 / k as f64).powi(n as i32 - 1);
            assert!((mean - law).abs() < 0.05 * law.max(1.0), "n={n}: {mean} vs {law}");
            if mean > best.1 {
                best = (n, mean);
            }
        }
        assert!((9..=11).contains(&best.0), "peak at {}", best.0);
    }

    #[test]
    fn delay_floor_and_conservation() {
        let p = SystemParams::default();
        let e = EnergyParams::default();
        let r = run_granted_baseline(&mut substream(4, 0), 1.0, 5000.0, &p, &e, &RaConfig::default(), 1e-3)
            .unwrap();
        assert_eq!(r.delivered + r.dropped, r.packets);
        assert!(r.kpi.unwrap().expected_delay >= e.sync_delay);
    }
}

//! Successive interference cancellation over a collision graph.

use serde::{Deserialize, Serialize};

use super::graph::CollisionGraph;
use crate::params::SystemParams;

/// How the replicas of one packet are combined.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum CombiningPolicy {
    /// Each replica is decoded on its own.
    None,
    /// Selection combining of interference-free fragments.
    Sc,
    /// Maximum-ratio combining: SINRs add.
    #[default]
    Mrc,
}

impl CombiningPolicy {
    pub fn as_str(self) -> &'static str {
        match self {
            CombiningPolicy::None => "none",
            CombiningPolicy::Sc => "sc",
            CombiningPolicy::Mrc => "mrc",
        }
    }
}

impl std::str::FromStr for CombiningPolicy {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "none" => Ok(Self::None),
            "sc" => Ok(Self::Sc),
            "mrc" => Ok(Self::Mrc),
            _ => Err(format!("unknown policy '{s}' (none, sc, mrc)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SicConfig {
    pub policy: CombiningPolicy,
    /// Clean fraction of the packet needed by `Sc`.
    pub coding_rate: f64,
    pub max_rounds: usize,
}

impl Default for SicConfig {
    fn default() -> Self {
        Self { policy: CombiningPolicy::Mrc, coding_rate: 1.0, max_rounds: 10_000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SicOutcome {
    pub decoded: Vec<bool>,
    /// Round (1-based) in which each packet was decoded.
    pub decoded_round: Vec<Option<usize>>,
    pub rounds: usize,
    /// Replicas of packets left undecoded.
    pub residual_replicas: usize,
}

impl SicOutcome {
    pub fn decoded_count(&self) -> usize {
        self.decoded.iter().filter(|&&d| d).count()
    }
}

/// SINR of a replica of area `area` hit by interference area `m`:
/// `1 / (m / area + 1 / gamma)`.
pub fn replica_sinr(m: f64, area: f64, gamma: f64) -> f64 {
    1.0 / (m / area + 1.0 / gamma)
}

struct State<'a> {
    g: &'a CollisionGraph,
    decoded: Vec<bool>,
}

impl State<'_> {
    fn active(&self, own: usize, other: usize) -> bool {
        let pk = self.g.replicas[other].packet;
        pk != own && !self.decoded[pk]
    }

    /// Normalised interference `M / (W Tp)` on replica `r`, power weighted.
    fn load(&self, r: usize) -> f64 {
        let rep = &self.g.replicas[r];
        let m: f64 = self.g.overlaps[r]
            .iter()
            .filter(|o| self.active(rep.packet, o.other))
            .map(|o| o.area * self.g.replicas[o.other].energy_density / rep.energy_density)
            .sum();
        m / rep.area()
    }

    /// Fraction of the packet covered by the union of interference-free
    /// fragments of its replicas, in relative time.
    fn clean_fraction(&self, pk: usize) -> f64 {
        let reps = &self.g.packet_replicas[pk];
        let dur = reps.iter().map(|&r| self.g.replicas[r].duration).fold(0.0, f64::max);
        if dur <= 0.0 {
            return 0.0;
        }
        let mut clean: Vec<(f64, f64)> = Vec::new();
        for &r in reps {
            let mut busy: Vec<(f64, f64)> = self.g.overlaps[r]
                .iter()
                .filter(|o| self.active(pk, o.other))
                .map(|o| (o.start, o.end))
                .collect();
            busy.sort_by(|a, b| a.0.total_cmp(&b.0));
            let mut cursor = 0.0;
            for (s, e) in busy {
                if s > cursor {
                    clean.push((cursor, s));
                }
                cursor = f64::max(cursor, e);
            }
            let d = self.g.replicas[r].duration;
            if cursor < d {
                clean.push((cursor, d));
            }
        }
        clean.sort_by(|a, b| a.0.total_cmp(&b.0));
        let (mut total, mut cur) = (0.0, None::<(f64, f64)>);
        for (s, e) in clean {
            cur = match cur {
                Some((cs, ce)) if s <= ce => Some((cs, ce.max(e))),
                Some((cs, ce)) => {
                    total += ce - cs;
                    Some((s, e))
                }
                None => Some((s, e)),
            };
        }
        if let Some((cs, ce)) = cur {
            total += ce - cs;
        }
        total / dur
    }

    fn decodable(&self, pk: usize, p: &SystemParams, cfg: &SicConfig) -> bool {
        let reps = &self.g.packet_replicas[pk];
        if reps.is_empty() {
            return false;
        }
        let slack = 1.0 / p.sinr_threshold - 1.0 / p.required_snr;
        let loads: Vec<f64> = reps.iter().map(|&r| self.load(r)).collect();
        // SINR >= St  <=>  M/(W Tp) <= 1/St - 1/gamma
        let single = loads.iter().any(|&x| x <= slack);
        match cfg.policy {
            CombiningPolicy::None => single,
            CombiningPolicy::Mrc => {
                single
                    || loads.iter().map(|&x| 1.0 / (x + 1.0 / p.required_snr)).sum::<f64>()
                        >= p.sinr_threshold
            }
            CombiningPolicy::Sc => {
                single || self.clean_fraction(pk) >= cfg.coding_rate * (1.0 - 1e-12)
            }
        }
    }
}

/// Iterative decode-and-cancel. Each round tests every undecoded packet
/// whose interference changed in the previous round against the state at
/// the start of the round; decoded packets are then removed together.
pub fn sic_decode(g: &CollisionGraph, p: &SystemParams, cfg: &SicConfig) -> SicOutcome {
    let np = g.packets();
    let mut st = State { g, decoded: vec![false; np] };
    let mut decoded_round = vec![None; np];
    let mut candidates: Vec<usize> = (0..np).collect();
    let mut rounds = 0;
    let mut mark = vec![usize::MAX; np];
    while !candidates.is_empty() && rounds < cfg.max_rounds {
        rounds += 1;
        let newly: Vec<usize> =
            candidates.iter().copied().filter(|&k| !st.decoded[k] && st.decodable(k, p, cfg)).collect();
        if newly.is_empty() {
            break;
        }
        for &k in &newly {
            st.decoded[k] = true;
            decoded_round[k] = Some(rounds);
        }
        candidates.clear();
        for &k in &newly {
            for &r in &g.packet_replicas[k] {
                for o in &g.overlaps[r] {
                    let q = g.replicas[o.other].packet;
                    if !st.decoded[q] && mark[q] != rounds {
                        mark[q] = rounds;
                        candidates.push(q);
                    }
                }
            }
        }
        candidates.sort_unstable();
    }
    let residual_replicas =
        (0..np).filter(|&k| !st.decoded[k]).map(|k| g.packet_replicas[k].len()).sum();
    SicOutcome { decoded: st.decoded, decoded_round, rounds, residual_replicas }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::traffic::Replica;

    fn rep(packet: usize, t0: f64, df: f64) -> Replica {
        Replica { packet, t0, df, duration: 0.5, bandwidth: 200.0, energy_density: 1.0 }
    }

    fn cfg(policy: CombiningPolicy) -> SicConfig {
        SicConfig { policy, ..Default::default() }
    }

    #[test]
    fn lone_packet_decodes_in_first_round() {
        let p = SystemParams::default();
        let g = CollisionGraph::from_replicas(vec![rep(0, 0.0, 0.0), rep(0, 1.0, 0.0)], 1, None);
        for pol in [CombiningPolicy::None, CombiningPolicy::Sc, CombiningPolicy::Mrc] {
            let out = sic_decode(&g, &p, &cfg(pol));
            assert_eq!(out.decoded, vec![true]);
            assert_eq!(out.decoded_round, vec![Some(1)]);
            assert_eq!(out.residual_replicas, 0);
        }
    }

    /// Four packets with two replicas each; replica slots pair up so that
    /// every replica is fully hit by exactly one replica of another packet,
    /// forming the ring 0-1-2-3-0.
    fn ring() -> CollisionGraph {
        let mut r = Vec::new();
        for k in 0..4 {
            let t_a = k as f64; // shared with packet k+1
            let t_b = ((k + 3) % 4) as f64; // shared with packet k-1
            r.push(rep(k, t_a, 0.0));
            r.push(rep(k, t_b, 0.0));
        }
        CollisionGraph::from_replicas(r, 4, None)
    }

    #[test]
    fn four_unsolvable_collisions_need_combining() {
        let g = ring();
        for r in 0..8 {
            assert_eq!(g.interference_area(r), 100.0);
        }
        let p = SystemParams { required_snr: 1e9, snr_gap: 1e9, sinr_threshold: 1.0, ..Default::default() };
        let none = sic_decode(&g, &p, &cfg(CombiningPolicy::None));
        assert_eq!(none.decoded_count(), 0);
        assert_eq!(none.residual_replicas, 8);
        let sc = sic_decode(&g, &p, &SicConfig { coding_rate: 0.5, ..cfg(CombiningPolicy::Sc) });
        assert_eq!(sc.decoded_count(), 0);
        let mrc = sic_decode(&g, &p, &cfg(CombiningPolicy::Mrc));
        assert_eq!(mrc.decoded_count(), 4);
        assert_eq!(mrc.residual_replicas, 0);
        assert_eq!(mrc.rounds, 1);
    }

    #[test]
    fn cancellation_unlocks_chain() {
        // packet 0 is clean on its second replica; packet 1 collides only with 0
        let p = SystemParams::default();
        let g = CollisionGraph::from_replicas(
            vec![rep(0, 0.0, 0.0), rep(0, 5.0, 0.0), rep(1, 0.0, 0.0)],
            2,
            None,
        );
        let out = sic_decode(&g, &p, &cfg(CombiningPolicy::None));
        assert_eq!(out.decoded_round, vec![Some(1), Some(2)]);
        assert_eq!(out.rounds, 2);
    }

    #[test]
    fn max_rounds_caps_iterations() {
        let p = SystemParams::default();
        let g = CollisionGraph::from_replicas(
            vec![rep(0, 0.0, 0.0), rep(0, 5.0, 0.0), rep(1, 0.0, 0.0)],
            2,
            None,
        );
        let out = sic_decode(&g, &p, &SicConfig { max_rounds: 1, ..cfg(CombiningPolicy::None) });
        assert_eq!(out.rounds, 1);
        assert_eq!(out.decoded, vec![true, false]);
    }

    #[test]
    fn selection_combining_uses_fragment_union() {
        let p = SystemParams::default();
        // packet 0: first replica hit on its second half, second replica on its first half
        let g = CollisionGraph::from_replicas(
            vec![
                rep(0, 0.0, 0.0),
                rep(0, 2.0, 0.0),
                rep(1, 0.25, 0.0),
                rep(1, 10.0, 100.0),
                rep(2, 1.75, 0.0),
                rep(2, 20.0, 100.0),
                rep(3, 0.25, 0.0),
                rep(4, 1.75, 0.0),
            ],
            5,
            None,
        );
        // two full-band interferers per replica: normalised load 1, SINR 0.8 each
        let st = SicConfig { coding_rate: 1.0, ..cfg(CombiningPolicy::Sc) };
        let state = State { g: &g, decoded: vec![false; 5] };
        assert!((state.clean_fraction(0) - 1.0).abs() < 1e-12);
        assert!(sic_decode(&g, &p, &st).decoded[0]);
        let none = sic_decode(&g, &p, &cfg(CombiningPolicy::None));
        assert!(!none.decoded[0]);
    }
}

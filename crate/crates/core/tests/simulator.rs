use gfra_core::sim::*;
use gfra_core::traffic::{draw_virtual_frame, generate_arrivals, substream, Replica};
use gfra_core::{EnergyParams, SystemParams};
use rand::Rng;

fn random_replicas(seed: u64, n: usize, horizon: f64) -> Vec<Replica> {
    let mut rng = substream(seed, 0);
    (0..n)
        .map(|i| Replica {
            packet: i / 2,
            t0: rng.gen_range(0.0..horizon),
            df: rng.gen_range(-100.0..100.0),
            duration: 0.5,
            bandwidth: 200.0,
            energy_density: 1.0,
        })
        .collect()
}

fn sorted_edges(g: &CollisionGraph) -> Vec<(usize, usize, u64, u64, u64)> {
    let mut v: Vec<_> = g
        .overlaps
        .iter()
        .enumerate()
        .flat_map(|(i, os)| os.iter().map(move |o| (i, o.other, o.area.to_bits(), o.start.to_bits(), o.end.to_bits())))
        .collect();
    v.sort_unstable();
    v
}

#[test]
fn sweep_equals_quadratic_reference() {
    for (seed, wrap) in [(1, None), (2, Some(200.0)), (3, Some(60.0))] {
        let reps = random_replicas(seed, 1000, wrap.unwrap_or(200.0));
        let fast = CollisionGraph::from_replicas(reps.clone(), 500, wrap);
        let slow = CollisionGraph::brute_force(reps, 500, wrap);
        assert!(fast.edge_count() > 100);
        assert_eq!(sorted_edges(&fast), sorted_edges(&slow));
    }
}

#[test]
fn graph_invariants() {
    let g = CollisionGraph::from_replicas(random_replicas(4, 600, 100.0), 300, Some(100.0));
    for (i, os) in g.overlaps.iter().enumerate() {
        for o in os {
            assert!(o.area > 0.0);
            assert!(o.area <= g.replicas[i].area().min(g.replicas[o.other].area()) + 1e-9);
            assert_eq!(g.overlap(o.other, i), g.overlap(i, o.other));
            assert!(o.start >= -1e-12 && o.end <= g.replicas[i].duration + 1e-12 && o.start < o.end);
        }
    }
}

fn dense_instance(seed: u64, n: usize) -> (CollisionGraph, SystemParams) {
    let p = SystemParams::default();
    let mut rng = substream(seed, 0);
    let horizon = 200.0;
    let frames: Vec<_> = generate_arrivals(&mut rng, 0.3 * n as f64 / horizon * 10.0, horizon)
        .into_iter()
        .map(|t| draw_virtual_frame(&mut rng, &p, 0, t).unwrap())
        .collect();
    (CollisionGraph::from_frames(&frames, &p, Some(horizon)), p)
}

#[test]
fn combining_never_loses_packets_on_an_instance() {
    for seed in 0..30 {
        let (g, p) = dense_instance(seed, 60);
        let none = sic_decode(&g, &p, &SicConfig { policy: CombiningPolicy::None, ..Default::default() });
        let mrc = sic_decode(&g, &p, &SicConfig { policy: CombiningPolicy::Mrc, ..Default::default() });
        let sc = sic_decode(&g, &p, &SicConfig { policy: CombiningPolicy::Sc, coding_rate: 0.5, ..Default::default() });
        for k in 0..g.packets() {
            if none.decoded[k] {
                assert!(mrc.decoded[k] && sc.decoded[k], "seed {seed} packet {k}");
            }
        }
    }
}

#[test]
fn decoded_set_grows_by_rounds() {
    for seed in 0..10 {
        let (g, p) = dense_instance(100 + seed, 80);
        let full = sic_decode(&g, &p, &SicConfig::default());
        let mut prev = 0;
        for cap in 1..=full.rounds {
            let o = sic_decode(&g, &p, &SicConfig { max_rounds: cap, ..Default::default() });
            assert!(o.rounds <= cap);
            let now = o.decoded_count();
            assert!(now >= prev);
            if cap < full.rounds {
                assert!(now > prev || cap == 1, "round {cap} decoded nothing new");
            }
            prev = now;
            for k in 0..g.packets() {
                assert_eq!(o.decoded[k], full.decoded_round[k].is_some_and(|r| r <= cap));
            }
        }
    }
}

#[test]
fn success_is_statistically_stable_across_seeds() {
    let p = SystemParams::default();
    let lambda = p.replica_rate_for_load(0.1) / 2.0;
    let cfg = TrialConfig { lambda, horizon: 10_000.0 / lambda, ..Default::default() };
    let e = EnergyParams::default();
    let run = |seeds: std::ops::Range<u64>| {
        let (mut att, mut fail) = (0usize, 0usize);
        for s in seeds {
            let r = run_trial(&mut substream(s, 0), &p, &e, &cfg).unwrap();
            att += r.attempts;
            fail += r.failed_attempts;
        }
        (1.0 - fail as f64 / att as f64, att)
    };
    let (a, n) = run(0..4);
    let (b, _) = run(0..8);
    let se = (a * (1.0 - a) / n as f64).sqrt();
    assert!((a - b).abs() < 2.0 * se + 1e-12, "{a} vs {b}, se {se}");
}

#[test]
fn outage_grows_with_load_in_sweep() {
    let p = SystemParams::default();
    let cells: Vec<SweepCell> = [0.05, 0.15, 0.3, 0.5]
        .iter()
        .map(|&load| SweepCell {
            load,
            lambda: p.replica_rate_for_load(load) / 2.0,
            replicas: 2,
            scheme: Scheme::GrantFree { sic: SicConfig::default() },
        })
        .collect();
    let s = SweepSettings { packets_per_trial: 5000.0, ..Default::default() };
    let rows = sweep(&cells, 4, &p, &EnergyParams::default(), &s, 7).unwrap();
    for w in rows.windows(2) {
        assert!(w[1].outage.mean + w[1].outage.ci95 >= w[0].outage.mean - w[0].outage.ci95);
    }
}

#[test]
fn policy_ordering_on_batches() {
    let p = SystemParams::default();
    let e = EnergyParams::default();
    let lambda = p.replica_rate_for_load(0.2) / 2.0;
    let succ = |sic: SicConfig| {
        let cfg = TrialConfig { lambda, horizon: 20_000.0 / lambda, sic, max_retries: 0, ..Default::default() };
        run_trial(&mut substream(31, 0), &p, &e, &cfg).unwrap().success().unwrap()
    };
    let none = succ(SicConfig { policy: CombiningPolicy::None, ..Default::default() });
    let sc = succ(SicConfig { policy: CombiningPolicy::Sc, coding_rate: 1.0, ..Default::default() });
    let mrc = succ(SicConfig { policy: CombiningPolicy::Mrc, ..Default::default() });
    println!("success none {none:.4} sc {sc:.4} mrc {mrc:.4}");
    assert!(none <= sc && sc <= mrc + 0.005);
}

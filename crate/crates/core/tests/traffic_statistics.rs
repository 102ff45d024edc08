use gfra_core::traffic::{draw_cfo, draw_virtual_frame, generate_arrivals, substream};
use gfra_core::SystemParams;

/// Two-sided KS statistic of sorted `xs` against the CDF `f`.
fn ks(xs: &mut [f64], f: impl Fn(f64) -> f64) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    xs.iter()
        .enumerate()
        .map(|(i, &x)| {
            let c = f(x);
            f64::max(c - i as f64 / n, (i + 1) as f64 / n - c)
        })
        .fold(0.0, f64::max)
}

// 1% critical value of the KS statistic for large n
fn ks_crit(n: usize) -> f64 {
    1.628 / (n as f64).sqrt()
}

#[test]
fn second_slot_uniform_over_remaining() {
    let p = SystemParams::default().with_replicas(2);
    assert_eq!(p.slots, 4);
    let mut rng = substream(11, 0);
    let n = 100_000;
    let mut counts = [0usize; 4];
    for _ in 0..n {
        let vf = draw_virtual_frame(&mut rng, &p, 0, 0.0).unwrap();
        assert_eq!(vf.slots.len(), 2);
        assert_eq!(vf.slots[0], 0);
        counts[vf.slots[1]] += 1;
    }
    assert_eq!(counts[0], 0);
    let expect = n as f64 / 3.0;
    let sigma = (n as f64 * (1.0 / 3.0) * (2.0 / 3.0)).sqrt();
    for &c in &counts[1..] {
        assert!((c as f64 - expect).abs() < 3.0 * sigma, "{counts:?}");
    }
}

#[test]
fn frames_span_m_slots_with_n_replicas() {
    let mut rng = substream(12, 0);
    for n in 1..=6 {
        let p = SystemParams::default().with_replicas(n);
        for _ in 0..200 {
            let vf = draw_virtual_frame(&mut rng, &p, 7, 3.0).unwrap();
            let reps: Vec<_> = vf.replicas(0, &p).collect();
            assert_eq!(reps.len(), n);
            assert!(reps.iter().all(|r| r.t0 >= 3.0 && r.end() <= 3.0 + p.frame_duration() + 1e-12));
            assert!(vf.slots.windows(2).all(|w| w[0] < w[1]));
        }
    }
    let full = SystemParams { replicas: 4, slots: 4, ..SystemParams::default() };
    assert_eq!(draw_virtual_frame(&mut rng, &full, 0, 0.0).unwrap().slots, vec![0, 1, 2, 3]);
}

#[test]
fn arrival_counts_are_poisson() {
    let mut total = 0.0;
    let mut sq = 0.0;
    let runs = 200;
    for s in 0..runs {
        let n = generate_arrivals(&mut substream(13, s), 10.0, 100.0).len() as f64;
        assert!((n - 1000.0).abs() < 5.0 * 1000f64.sqrt());
        total += n;
        sq += n * n;
    }
    let mean = total / runs as f64;
    let var = sq / runs as f64 - mean * mean;
    // mean of 200 runs: sd about 2.2
    assert!((mean - 1000.0).abs() < 3.0 * (1000.0 / runs as f64).sqrt() * 1.5);
    assert!((var / 1000.0 - 1.0).abs() < 0.3, "variance {var}");
    assert!(generate_arrivals(&mut substream(13, 0), 0.0, 100.0).is_empty());
}

#[test]
fn inter_arrivals_are_exponential() {
    let a = generate_arrivals(&mut substream(14, 0), 10.0, 1000.0);
    assert!(a.windows(2).all(|w| w[0] <= w[1]));
    let mut gaps: Vec<f64> = a.windows(2).map(|w| w[1] - w[0]).collect();
    let n = gaps.len();
    let d = ks(&mut gaps, |x| 1.0 - (-10.0 * x).exp());
    assert!(d < ks_crit(n), "KS {d}");
}

#[test]
fn carrier_offsets_are_uniform() {
    let mut rng = substream(15, 0);
    let mut xs: Vec<f64> = (0..50_000).map(|_| draw_cfo(&mut rng, 100.0)).collect();
    assert!(xs.iter().all(|x| x.abs() <= 100.0));
    let n = xs.len();
    let d = ks(&mut xs, |x| (x + 100.0) / 200.0);
    assert!(d < ks_crit(n), "KS {d}");
    assert_eq!(draw_cfo(&mut rng, 0.0), 0.0);
}

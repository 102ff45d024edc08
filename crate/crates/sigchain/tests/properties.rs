use gfra_core::traffic::substream;
use gfra_sigchain::drift::build_drift_table;
use gfra_sigchain::modem::{bits_to_levels, levels_to_bits, random_bits, synthesize_with_phase};
use gfra_sigchain::preamble::{periodic_autocorrelation, zc_preamble};
use gfra_sigchain::receiver::{Receiver, ReceiverConfig};
use gfra_sigchain::{ComplexSignal, SystemParams};
use proptest::prelude::*;
use std::sync::OnceLock;

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 { a } else { gcd(b, a % b) }
}

fn receiver() -> &'static Receiver {
    static RX: OnceLock<Receiver> = OnceLock::new();
    RX.get_or_init(|| Receiver::new(&SystemParams::default(), ReceiverConfig::default()).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn zc_is_unimodular_with_ideal_autocorrelation(n in 2usize..80, u in 1usize..80) {
        prop_assume!(u < n && gcd(u, n) == 1);
        let z = zc_preamble(n, u).unwrap();
        prop_assert!(z.iter().all(|c| (c.norm() - 1.0).abs() < 1e-12));
        for lag in 1..n {
            prop_assert!(periodic_autocorrelation(&z, lag).norm() < 1e-8 * n as f64);
        }
    }

    #[test]
    fn gray_mapping_round_trips(seed in any::<u64>(), half in 0usize..64) {
        let bits = random_bits(&mut substream(seed, 0), 2 * half);
        let levels = bits_to_levels(&bits).unwrap();
        prop_assert!(levels.iter().all(|&l| l < 4));
        prop_assert_eq!(levels_to_bits(&levels), bits);
    }

    #[test]
    fn drift_is_antisymmetric(nzc in prop::sample::select(vec![11usize, 13, 23, 31]), step in 1.0f64..5.0) {
        let dt = build_drift_table(nzc, 1, 0.01, 1000.0, 150.0, step).unwrap();
        let n = dt.len();
        for i in 0..n {
            let j = n - 1 - i;
            prop_assert_eq!(dt.shifts[i], -dt.shifts[j]);
            prop_assert!((dt.magnitudes[i] - dt.magnitudes[j]).abs() < 1e-9);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    /// Without noise the chain never reports more packets than it was given.
    #[test]
    fn never_more_than_injected(
        f1 in -100.0f64..100.0, f2 in -100.0f64..100.0,
        lag in 0usize..2000, ph in 0.0f64..6.28, seed in any::<u64>(),
    ) {
        let p = SystemParams::default();
        let rx = receiver();
        let mut rng = substream(seed, 0);
        let mut s = ComplexSignal::zeros(4800, p.sample_rate, 0.0).unwrap();
        for (k, (df, start)) in [(f1, 400), (f2, 400 + lag)].into_iter().enumerate() {
            let bits = random_bits(&mut rng, 54);
            let mut pk = synthesize_with_phase(&bits, &p, df, ph * k as f64, 5).unwrap();
            pk.t0 = start as f64 / p.sample_rate;
            s.mix_in(&pk);
        }
        let ev = rx.events(&s, 0.0);
        let found: usize = ev.iter().map(|e| rx.resolve(e).len()).sum();
        prop_assert!(found <= 2, "{found}");
    }
}

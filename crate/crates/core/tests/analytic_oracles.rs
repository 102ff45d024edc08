use gfra_core::analytic::*;
use gfra_core::sim::{run_trial, CombiningPolicy, SicConfig, TrialConfig};
use gfra_core::traffic::substream;
use gfra_core::{EnergyParams, SystemParams};

/// Adaptive Simpson integration.
fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn rec(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
            return left + right + (left + right - whole) / 15.0;
        }
        rec(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1) + rec(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
    }
    let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
    rec(f, a, b, fa, fm, fb, (b - a) / 6.0 * (fa + 4.0 * fm + fb), tol, 50)
}

/// The double integral over the vulnerable zone that defines the
/// single-interferer exceedance probability, evaluated numerically.
fn exceedance_by_quadrature(s: f64, p: &SystemParams) -> f64 {
    let (tp, w, fm) = (p.packet_duration, p.bandwidth, p.max_cfo);
    let density = 1.0 / (2.0 * tp) / (2.0 * fm);
    let inner = |u: f64| {
        let upper = w - s / (tp - u);
        // integrand is constant in v
        if upper > 0.0 {
            simpson(&|_v| density, 0.0, upper, 1e-14)
        } else {
            0.0
        }
    };
    4.0 * simpson(&inner, 0.0, tp - s / w, 1e-12)
}

#[test]
fn closed_form_matches_quadrature_on_valid_domain() {
    let p = SystemParams { bandwidth: 100.0, max_cfo: 100.0, ..SystemParams::default() };
    let p = SystemParams { packet_duration: 0.5, ..p };
    let area = p.replica_area();
    let mut checked = 0;
    for k in 1..40 {
        let s = area * k as f64 / 40.0;
        let c = overlap_ccdf_closed_form(s, &p).unwrap();
        if c.clamped {
            continue;
        }
        let q = exceedance_by_quadrature(s, &p);
        assert!((c.value - q).abs() < 1e-6, "s={s}: {} vs {q}", c.value);
        checked += 1;
    }
    assert!(checked > 30);
    // the specific point at half the replica area
    let s = 0.5 * area;
    assert!((overlap_ccdf_closed_form(s, &p).unwrap().value - exceedance_by_quadrature(s, &p)).abs() < 1e-6);
}

#[test]
fn closed_form_clamps_in_reference_regime() {
    let p = SystemParams::default();
    let c = overlap_ccdf_closed_form(1e-9, &p).unwrap();
    assert!(c.clamped);
    assert_eq!(c.value, 1.0);
}

#[test]
fn oracle_is_seed_stable() {
    let p = SystemParams::default();
    let grid = Grid::new(p.replica_area(), GRID_POINTS).unwrap();
    let a = overlap_cdf_oracle(&mut substream(1, 0), &p, 1_000_000, grid, OracleGeometry::default()).unwrap();
    let b = overlap_cdf_oracle(&mut substream(2, 0), &p, 1_000_000, grid, OracleGeometry::default()).unwrap();
    let d = a.conditional.sup_distance(&b.conditional);
    assert!(d < 0.005, "sup distance {d}");
    let (ma, mb) = (a.conditional.quantile(0.5), b.conditional.quantile(0.5));
    assert!((ma - mb).abs() < 0.02 * ma);
    assert!((a.overlap_probability - b.overlap_probability).abs() < 0.005);
}

#[test]
fn oracle_against_closed_form_reported() {
    // W = Fm keeps the closed form below one; the closed form assumes a
    // uniform frequency offset, so compare with the uniform geometry
    let p = SystemParams { bandwidth: 100.0, max_cfo: 100.0, packet_duration: 0.5, ..SystemParams::default() };
    let grid = Grid::new(p.replica_area(), 1024).unwrap();
    let geom = OracleGeometry { cfo_law: CfoDifferenceLaw::Uniform, fixed_time_offset: None };
    let o = overlap_cdf_oracle(&mut substream(3, 0), &p, 400_000, grid, geom).unwrap();
    let cf = closed_form_cdf(&p, grid).unwrap();
    // the closed form spreads the offset over [-Fm, Fm], the oracle over
    // [-2Fm, 2Fm]: overlap probabilities differ but the conditional laws agree
    let d = o.unconditional().sup_distance(&cf);
    println!("oracle vs closed form sup distance, unconditional: {d:.4}");
    assert!((o.overlap_probability - 0.5).abs() < 0.01);
    let dc = o.conditional.sup_distance(&cf);
    println!("oracle vs closed form sup distance, conditional: {dc:.4}");
    assert!(dc < 0.01);
}

#[test]
fn mean_count_against_poisson_mixture() {
    let p = SystemParams::default();
    let m = AnalyticModel::with_defaults(&p).unwrap();
    // g * 2Tp = 4
    let g = 4.0 / (2.0 * p.packet_duration);
    let poisson = unconditional_cdf(&m.base, g, &p, MixtureMode::PoissonMixture).unwrap();
    let mean = unconditional_cdf(&m.base, g, &p, MixtureMode::MeanCount).unwrap();
    let d = poisson.sup_distance(&mean);
    println!("mean-count vs Poisson mixture at 2gTp = 4: {d:.4}");
    assert!(d < 1.0);
}

#[test]
fn grid_refinement_is_stable() {
    let p = SystemParams::default();
    let law = BaseLaw::Oracle { samples: 1_000_000, seed: 9, geometry: OracleGeometry::default() };
    let coarse = AnalyticModel::new(&p, law, MixtureMode::PoissonMixture, OutageModel::MrcSinrSum, 2048).unwrap();
    let fine = AnalyticModel::new(&p, law, MixtureMode::PoissonMixture, OutageModel::MrcSinrSum, 4096).unwrap();
    for load in [0.02, 0.1, 0.2] {
        let g = p.replica_rate_for_load(load);
        for model in [OutageModel::Single, OutageModel::Independent, OutageModel::MrcSinrSum, OutageModel::MrcSummedArea] {
            let (mut a, mut b) = (coarse.clone(), fine.clone());
            a.outage_model = model;
            b.outage_model = model;
            let (x, y) = (a.outage(g).unwrap(), b.outage(g).unwrap());
            assert!((x - y).abs() < 1e-3, "{model:?} at {load}: {x} vs {y}");
        }
    }
}

/// Retransmissions are spread over twenty frames so that two packets that
/// collided once rarely collide again in lockstep; the analytic model
/// treats every attempt as independent.
fn empirical(p: &SystemParams, lambda: f64, policy: CombiningPolicy, collect: bool, seed: u64) -> gfra_core::sim::TrialResult {
    let cfg = TrialConfig {
        retry_jitter: 20.0 * p.frame_duration(),
        lambda,
        horizon: TrialConfig::horizon_for_packets(lambda, 100_000.0),
        sic: SicConfig { policy, ..Default::default() },
        collect_interference: collect,
        ..Default::default()
    };
    run_trial(&mut substream(seed, 0), p, &EnergyParams::default(), &cfg).unwrap()
}

/// New-packet rate at which the analytic fixed point sits at `load`.
fn lambda_for_load(m: &AnalyticModel, load: f64) -> f64 {
    let g = m.params.replica_rate_for_load(load);
    g * (1.0 - m.outage(g).unwrap()) / m.params.replicas as f64
}

#[test]
fn single_replica_outage_against_simulation() {
    let p = SystemParams::default().with_replicas(1);
    let mut m = AnalyticModel::with_defaults(&p).unwrap();
    m.outage_model = OutageModel::Single;
    let lambda = lambda_for_load(&m, 0.02);
    let sol = m.solve_offered_load(lambda, &FixedPointOptions::default()).unwrap();
    let r = empirical(&p, lambda, CombiningPolicy::None, false, 21);
    let d = (sol.outage - r.outage.unwrap()).abs();
    assert!(d < 0.02, "analytic {} empirical {:?}", sol.outage, r.outage);
}

#[test]
fn independent_outage_against_no_combining_simulation() {
    let p = SystemParams::default();
    let mut m = AnalyticModel::with_defaults(&p).unwrap();
    m.outage_model = OutageModel::Independent;
    let lambda = lambda_for_load(&m, 0.02);
    let sol = m.solve_offered_load(lambda, &FixedPointOptions::default()).unwrap();
    let r = empirical(&p, lambda, CombiningPolicy::None, false, 22);
    let d = (sol.outage - r.outage.unwrap()).abs();
    assert!(d < 0.03, "analytic {} empirical {:?}", sol.outage, r.outage);
}

#[test]
fn mrc_outage_against_simulation() {
    let p = SystemParams::default();
    let m = AnalyticModel::with_defaults(&p).unwrap();
    for load in [0.02, 0.1] {
        let lambda = lambda_for_load(&m, load);
        let sol = m.solve_offered_load(lambda, &FixedPointOptions::default()).unwrap();
        let r = empirical(&p, lambda, CombiningPolicy::Mrc, false, 23);
        assert!((sol.outage - r.outage.unwrap()).abs() < 0.03);
    }
}

#[test]
fn aggregate_interference_law_against_simulation() {
    let p = SystemParams::default();
    let m = AnalyticModel::with_defaults(&p).unwrap();
    let lambda = lambda_for_load(&m, 0.05);
    let r = empirical(&p, lambda, CombiningPolicy::Mrc, true, 24);
    let area = p.replica_area();
    let samples: Vec<f64> = r.interference.iter().map(|x| x * area).collect();
    let analytic = m.per_replica(r.replica_rate).unwrap();
    let simulated = InterferenceCdf::from_samples(analytic.grid(), &samples, analytic.meta.clone());
    let d = analytic.sup_distance(&simulated);
    assert!(d < 0.03, "sup distance {d}");
}

//! Single-interferer overlap law: closed form and geometric sampler.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::cdf::{CdfMeta, Grid, InterferenceCdf};
use crate::error::{Error, Result};
use crate::params::SystemParams;

/// `SINR = 1 / (M / (W Tp) + 1/gamma)` for aggregate overlap `M` (s*Hz).
pub fn sinr(aggregate_overlap: f64, p: &SystemParams) -> f64 {
    1.0 / (aggregate_overlap / p.replica_area() + 1.0 / p.required_snr)
}

/// Closed-form exceedance probability of the single-interferer overlap.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClosedFormCcdf {
    pub value: f64,
    /// The raw expression left `[0, 1]` and was clamped.
    pub clamped: bool,
}

/// `P(S > s) = [W (Tp - s/W) + s ln(s / (Tp W))] / (Tp Fm)`, with the
/// `s -> 0` limit `W / Fm`.
pub fn overlap_ccdf_closed_form(s: f64, p: &SystemParams) -> Result<ClosedFormCcdf> {
    let (w, tp, fm) = (p.bandwidth, p.packet_duration, p.max_cfo);
    let area = w * tp;
    if !(0.0..=area).contains(&s) {
        return Err(Error::Domain(format!("overlap {s} outside [0, {area}]")));
    }
    if !(fm > 0.0) {
        return Err(Error::Domain("closed form needs Fm > 0".into()));
    }
    let log_term = if s > 0.0 { s * (s / area).ln() } else { 0.0 };
    let raw = (w * (tp - s / w) + log_term) / (tp * fm);
    let value = raw.clamp(0.0, 1.0);
    Ok(ClosedFormCcdf { value, clamped: value != raw })
}

/// Single-interferer distribution from the closed form, clamped to `[0, 1]`.
/// Non-overlap (when `W < Fm`) appears as the atom at zero.
pub fn closed_form_cdf(p: &SystemParams, grid: Grid) -> Result<InterferenceCdf> {
    let area = p.replica_area();
    overlap_ccdf_closed_form(0.0, p)?;
    let meta = meta(p, 1.0);
    Ok(InterferenceCdf::from_fn(grid, meta, |s| {
        if s <= 0.0 {
            let p0 = overlap_ccdf_closed_form(0.0, p).map(|c| c.value).unwrap_or(1.0);
            1.0 - p0
        } else if s >= area {
            1.0
        } else {
            1.0 - overlap_ccdf_closed_form(s, p).map(|c| c.value).unwrap_or(0.0)
        }
    }))
}

/// Law of the carrier-offset difference between two replicas.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum CfoDifferenceLaw {
    /// Difference of two independent uniforms on `[-Fm, Fm]`.
    #[default]
    Triangular,
    /// Uniform on `[-2Fm, 2Fm]`.
    Uniform,
}

/// Geometry of the sampled interferer relative to the reference replica.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct OracleGeometry {
    pub cfo_law: CfoDifferenceLaw,
    /// Pin the start-time offset instead of drawing it on `(-Tp, Tp)`.
    pub fixed_time_offset: Option<f64>,
}

/// Empirical single-interferer overlap law.
#[derive(Debug, Clone)]
pub struct OracleCdf {
    /// Overlap area conditioned on overlap > 0.
    pub conditional: InterferenceCdf,
    /// Probability that the interferer overlaps at all.
    pub overlap_probability: f64,
}

impl OracleCdf {
    /// Unconditional law with the non-overlap atom restored.
    pub fn unconditional(&self) -> InterferenceCdf {
        self.conditional.thin(self.overlap_probability)
    }
}

/// Overlap area between rectangles `[0,Tp] x [-W/2,W/2]` and one shifted by
/// `(dt, df)`.
pub fn rectangle_overlap(dt: f64, df: f64, tp: f64, w: f64) -> f64 {
    (tp - dt.abs()).max(0.0) * (w - df.abs()).max(0.0)
}

/// Samples an interferer with start offset uniform on `(-Tp, Tp)` and
/// carrier-offset difference per `geometry`, and tabulates the overlap area.
pub fn overlap_cdf_oracle<R: Rng + ?Sized>(
    rng: &mut R,
    p: &SystemParams,
    samples: usize,
    grid: Grid,
    geometry: OracleGeometry,
) -> Result<OracleCdf> {
    if samples < 10_000 {
        return Err(Error::InvalidArgument(format!("oracle needs >= 1e4 samples, got {samples}")));
    }
    let (tp, w, fm) = (p.packet_duration, p.bandwidth, p.max_cfo);
    let mut overlaps = Vec::with_capacity(samples);
    for _ in 0..samples {
        let dt = match geometry.fixed_time_offset {
            Some(t) => t,
            None => rng.gen_range(-tp..tp),
        };
        let df = if fm > 0.0 {
            match geometry.cfo_law {
                CfoDifferenceLaw::Triangular => rng.gen_range(-fm..=fm) - rng.gen_range(-fm..=fm),
                CfoDifferenceLaw::Uniform => rng.gen_range(-2.0 * fm..=2.0 * fm),
            }
        } else {
            0.0
        };
        let a = rectangle_overlap(dt, df, tp, w);
        if a > 0.0 {
            overlaps.push(a);
        }
    }
    let overlap_probability = overlaps.len() as f64 / samples as f64;
    let conditional = InterferenceCdf::from_samples(grid, &overlaps, meta(p, overlap_probability));
    Ok(OracleCdf { conditional, overlap_probability })
}

pub(crate) fn meta(p: &SystemParams, overlap_probability: f64) -> CdfMeta {
    CdfMeta {
        packet_duration: p.packet_duration,
        bandwidth: p.bandwidth,
        max_cfo: p.max_cfo,
        count: Some(1),
        replica_rate: None,
        overlap_probability,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::traffic::substream;

    fn grid(p: &SystemParams) -> Grid {
        Grid::new(p.replica_area(), 1024).unwrap()
    }

    #[test]
    fn sinr_limits() {
        let p = SystemParams::default();
        assert!((sinr(0.0, &p) - p.required_snr).abs() < 1e-12);
        let loud = SystemParams { required_snr: 1e12, sinr_threshold: 1.0, ..p.clone() };
        assert!((sinr(loud.replica_area(), &loud) - 1.0).abs() < 1e-9);
        let q = SystemParams { bandwidth: 200.0, required_snr: 3.98, ..p };
        // W*Tp = 100
        let v = sinr(100.0, &q);
        assert!((v - 1.0 / (1.0 + 1.0 / 3.98)).abs() < 1e-12);
        assert!((v - 0.799).abs() < 5e-4);
    }

    #[test]
    fn sinr_monotone() {
        let p = SystemParams::default();
        let mut last = f64::INFINITY;
        for m in [0.0, 1.0, 10.0, 100.0, 1000.0] {
            let v = sinr(m, &p);
            assert!(v < last);
            last = v;
        }
        let hi = SystemParams { required_snr: 10.0, ..p.clone() };
        assert!(sinr(5.0, &hi) > sinr(5.0, &p));
    }

    #[test]
    fn closed_form_endpoints() {
        let p = SystemParams::default();
        let full = overlap_ccdf_closed_form(p.replica_area(), &p).unwrap();
        assert!(full.value.abs() < 1e-12 && !full.clamped);
        // Reference values give W/Fm = 2 at s -> 0.
        let zero = overlap_ccdf_closed_form(0.0, &p).unwrap();
        assert_eq!(zero.value, 1.0);
        assert!(zero.clamped);
        let tiny = overlap_ccdf_closed_form(1e-9, &p).unwrap();
        assert!(tiny.clamped);
        let wide = SystemParams { max_cfo: 400.0, ..p.clone() };
        let z = overlap_ccdf_closed_form(0.0, &wide).unwrap();
        assert!((z.value - 0.5).abs() < 1e-12 && !z.clamped);
    }

    #[test]
    fn closed_form_domain() {
        let p = SystemParams::default();
        assert!(matches!(overlap_ccdf_closed_form(-1.0, &p), Err(Error::Domain(_))));
        assert!(matches!(overlap_ccdf_closed_form(p.replica_area() * 1.01, &p), Err(Error::Domain(_))));
    }

    #[test]
    fn degenerate_oracle_is_full_overlap() {
        let p = SystemParams { max_cfo: 0.0, ..SystemParams::default() };
        let mut rng = substream(1, 0);
        let geom = OracleGeometry { fixed_time_offset: Some(0.0), ..Default::default() };
        let o = overlap_cdf_oracle(&mut rng, &p, 10_000, grid(&p), geom).unwrap();
        assert_eq!(o.overlap_probability, 1.0);
        let a = p.replica_area();
        assert!(o.conditional.cdf(a * 0.99) < 1e-12);
        assert!((o.conditional.cdf(a) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn oracle_rejects_small_sample() {
        let p = SystemParams::default();
        let mut rng = substream(1, 0);
        assert!(overlap_cdf_oracle(&mut rng, &p, 100, grid(&p), Default::default()).is_err());
    }

    #[test]
    fn oracle_matches_exact_product_law() {
        // With W = 2 Fm and triangular offsets, overlap/(W Tp) = U * V where
        // U ~ U(0,1) and V has density 2v on [0,1]: P(UV > x) = 1 - 2x + x^2.
        let p = SystemParams::default();
        let mut rng = substream(5, 0);
        let o = overlap_cdf_oracle(&mut rng, &p, 400_000, grid(&p), Default::default()).unwrap();
        assert!(o.overlap_probability > 0.999);
        for x in [0.1, 0.3, 0.5, 0.8] {
            let exact = 1.0 - (1.0 - 2.0 * x + x * x);
            let got = o.conditional.cdf(x * p.replica_area());
            assert!((got - exact).abs() < 5e-3, "x={x}: {got} vs {exact}");
        }
    }

    #[test]
    fn uniform_law_thins_when_band_is_wide() {
        let p = SystemParams { max_cfo: 400.0, ..SystemParams::default() };
        let mut rng = substream(5, 1);
        let geom = OracleGeometry { cfo_law: CfoDifferenceLaw::Uniform, fixed_time_offset: None };
        let o = overlap_cdf_oracle(&mut rng, &p, 200_000, grid(&p), geom).unwrap();
        // |df| < W with df ~ U(-800, 800)
        assert!((o.overlap_probability - 0.25).abs() < 5e-3);
        let u = o.unconditional();
        assert!((u.atom() - 0.75).abs() < 5e-3);
    }
}

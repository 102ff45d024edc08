//! Tabulated distributions of aggregate overlap area.
//!
//! A distribution is stored as an atom at zero plus a continuous part
//! discretised on a uniform grid: `mass[k]` holds the probability of the
//! interval `[x_k - h/2, x_k + h/2)` (clipped at zero), so sums of grid
//! values stay unbiased under convolution. Mass beyond the last grid point is
//! tracked in `tail` instead of being folded back onto the grid.

use std::io::Write;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default number of grid points.
pub const GRID_POINTS: usize = 2048;

/// Uniform grid `x_k = k * step`, `k = 0..points`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub step: f64,
    pub points: usize,
}

impl Grid {
    /// `points` values spanning `[0, max]`.
    pub fn new(max: f64, points: usize) -> Result<Self> {
        if !(max > 0.0) || points < 2 {
            return Err(Error::InvalidArgument(format!(
                "grid needs max > 0 and >= 2 points, got max={max} points={points}"
            )));
        }
        Ok(Self { step: max / (points - 1) as f64, points })
    }

    pub fn max(&self) -> f64 {
        self.step * (self.points - 1) as f64
    }

    pub fn value(&self, k: usize) -> f64 {
        self.step * k as f64
    }

    /// Nearest grid index of `x >= 0`, or `None` past the last half cell.
    pub fn index_of(&self, x: f64) -> Option<usize> {
        let k = (x / self.step + 0.5).floor();
        if k < self.points as f64 {
            Some(k.max(0.0) as usize)
        } else {
            None
        }
    }

    fn same_as(&self, other: &Grid) -> bool {
        self.points == other.points && (self.step - other.step).abs() <= 1e-12 * self.step.abs()
    }
}

/// Which law generated a distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CdfMeta {
    pub packet_duration: f64,
    pub bandwidth: f64,
    pub max_cfo: f64,
    /// Number of summed interferers, when fixed.
    pub count: Option<usize>,
    /// Replica rate `g` for mixtures over the interferer count.
    pub replica_rate: Option<f64>,
    /// Probability that a single interferer overlaps at all. Distributions
    /// conditioned on overlap carry the thinning probability here; others 1.
    pub overlap_probability: f64,
}

/// Distribution of an aggregate overlap area in s*Hz.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterferenceCdf {
    grid: Grid,
    atom: f64,
    mass: Vec<f64>,
    tail: f64,
    pub meta: CdfMeta,
}

impl InterferenceCdf {
    /// Point mass at zero.
    pub fn unit_step(grid: Grid, meta: CdfMeta) -> Self {
        Self { grid, atom: 1.0, mass: vec![0.0; grid.points], tail: 0.0, meta }
    }

    /// Builds a distribution from samples; exact zeros go to the atom.
    pub fn from_samples(grid: Grid, samples: &[f64], meta: CdfMeta) -> Self {
        let mut mass = vec![0.0; grid.points];
        let (mut atom, mut tail) = (0.0, 0.0);
        let w = 1.0 / samples.len().max(1) as f64;
        for &s in samples {
            if s <= 0.0 {
                atom += w;
            } else {
                match grid.index_of(s) {
                    Some(k) => mass[k] += w,
                    None => tail += w,
                }
            }
        }
        Self { grid, atom, mass, tail, meta }
    }

    /// Builds a distribution from weighted point values; values past the grid
    /// go to the tail and exact zeros to the atom.
    pub fn from_weighted_points(
        grid: Grid,
        points: impl IntoIterator<Item = (f64, f64)>,
        meta: CdfMeta,
    ) -> Self {
        let mut mass = vec![0.0; grid.points];
        let (mut atom, mut tail) = (0.0, 0.0);
        for (x, w) in points {
            if x <= 0.0 {
                atom += w;
            } else {
                match grid.index_of(x) {
                    Some(k) => mass[k] += w,
                    None => tail += w,
                }
            }
        }
        Self { grid, atom, mass, tail, meta }
    }

    /// Builds a distribution from a CDF `f` that is continuous on `(0, inf)`;
    /// `f(0)` is taken as the atom at zero.
    pub fn from_fn(grid: Grid, meta: CdfMeta, f: impl Fn(f64) -> f64) -> Self {
        let atom = f(0.0).clamp(0.0, 1.0);
        let mut mass = Vec::with_capacity(grid.points);
        let mut prev = atom;
        for k in 0..grid.points {
            let hi = f(grid.value(k) + 0.5 * grid.step).clamp(prev, 1.0);
            mass.push(hi - prev);
            prev = hi;
        }
        Self { grid, atom, mass, tail: (1.0 - prev).max(0.0), meta }
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    /// Probability of exactly zero overlap.
    pub fn atom(&self) -> f64 {
        self.atom
    }

    /// Probability beyond the last grid point.
    pub fn tail(&self) -> f64 {
        self.tail
    }

    pub fn total_mass(&self) -> f64 {
        self.atom + self.mass.iter().sum::<f64>() + self.tail
    }

    /// Ascending grid values.
    pub fn grid_values(&self) -> Vec<f64> {
        (0..self.grid.points).map(|k| self.grid.value(k)).collect()
    }

    /// `F(x_k)` at each grid point.
    pub fn cdf_values(&self) -> Vec<f64> {
        self.grid_values().into_iter().map(|x| self.cdf(x)).collect()
    }

    /// `F(s) = P(area <= s)`, piecewise linear inside each grid cell.
    pub fn cdf(&self, s: f64) -> f64 {
        if s < 0.0 {
            return 0.0;
        }
        let h = self.grid.step;
        if s >= self.grid.max() {
            return (1.0 - self.tail).clamp(0.0, 1.0);
        }
        let mut acc = self.atom;
        if s < 0.5 * h {
            // first cell is [0, h/2)
            acc += self.mass[0] * (s / (0.5 * h));
            return acc.clamp(0.0, 1.0);
        }
        let u = s / h + 0.5;
        let j = u.floor() as usize;
        let last = self.mass.len() - 1;
        // last cell is [max - h/2, max]
        let frac = if j >= last { (s - (self.grid.max() - 0.5 * h)) / (0.5 * h) } else { u - j as f64 };
        let j = j.min(last);
        acc += self.mass[..j].iter().sum::<f64>();
        acc += self.mass[j] * frac;
        acc.clamp(0.0, 1.0)
    }

    /// Empirical median (smallest grid value with `F >= 0.5`).
    pub fn quantile(&self, q: f64) -> f64 {
        if self.atom >= q {
            return 0.0;
        }
        let mut acc = self.atom;
        let h = self.grid.step;
        for (k, &m) in self.mass.iter().enumerate() {
            if acc + m >= q && m > 0.0 {
                let (lo, width) = if k == 0 { (0.0, 0.5 * h) } else { (self.grid.value(k) - 0.5 * h, h) };
                return lo + width * (q - acc) / m;
            }
            acc += m;
        }
        f64::INFINITY
    }

    /// Largest absolute CDF difference over the union of both grids.
    pub fn sup_distance(&self, other: &InterferenceCdf) -> f64 {
        let mut pts = self.grid_values();
        pts.extend(other.grid_values());
        pts.iter()
            .flat_map(|&x| [x, x + 0.5 * self.grid.step, x + 0.5 * other.grid.step])
            .map(|x| (self.cdf(x) - other.cdf(x)).abs())
            .fold(0.0, f64::max)
    }

    /// Mixture `(1 - p) * delta_0 + p * self`.
    pub fn thin(&self, p: f64) -> InterferenceCdf {
        let p = p.clamp(0.0, 1.0);
        InterferenceCdf {
            grid: self.grid,
            atom: 1.0 - p + p * self.atom,
            mass: self.mass.iter().map(|m| m * p).collect(),
            tail: self.tail * p,
            meta: CdfMeta { overlap_probability: 1.0, ..self.meta.clone() },
        }
    }

    /// Adds `weight * other` to `self` (for mixtures). Grids must match.
    pub fn add_scaled(&mut self, other: &InterferenceCdf, weight: f64) -> Result<()> {
        if !self.grid.same_as(&other.grid) {
            return Err(Error::InvalidArgument("grid mismatch in mixture".into()));
        }
        self.atom += weight * other.atom;
        self.tail += weight * other.tail;
        for (a, b) in self.mass.iter_mut().zip(&other.mass) {
            *a += weight * b;
        }
        Ok(())
    }

    /// All-zero measure on `grid`, the starting point of a mixture.
    pub fn zero(grid: Grid, meta: CdfMeta) -> Self {
        Self { grid, atom: 0.0, mass: vec![0.0; grid.points], tail: 0.0, meta }
    }

    /// Adds probability mass `w` beyond the grid.
    pub fn add_tail(&mut self, w: f64) {
        self.tail += w;
    }

    /// Iterates `(value, probability)` over the atom and grid cells, and the
    /// tail as `(inf, p)`.
    pub fn points(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        std::iter::once((0.0, self.atom))
            .chain(self.mass.iter().enumerate().map(|(k, &m)| (self.grid.value(k), m)))
            .chain(std::iter::once((f64::INFINITY, self.tail)))
    }

    /// Distribution of the sum of independent draws from `self` and `other`.
    pub fn convolve(&self, other: &InterferenceCdf) -> Result<InterferenceCdf> {
        let mut conv = Convolver::new(self.grid)?;
        conv.convolve(self, other)
    }

    /// Writes `s,F(s)` rows at every grid point.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "s,F")?;
        for (x, f) in self.grid_values().into_iter().zip(self.cdf_values()) {
            writeln!(w, "{x},{f}")?;
        }
        Ok(())
    }

    #[cfg(test)]
    pub(crate) fn check_invariants(&self) -> bool {
        let vals = self.cdf_values();
        vals.windows(2).all(|w| w[1] + 1e-12 >= w[0])
            && vals.iter().all(|v| (0.0..=1.0).contains(v))
            && (self.total_mass() - 1.0).abs() < 1e-6
    }
}

/// FFT-backed linear convolution on a fixed grid.
pub(crate) struct Convolver {
    grid: Grid,
    fft: Arc<dyn Fft<f64>>,
    ifft: Arc<dyn Fft<f64>>,
    len: usize,
}

impl Convolver {
    pub(crate) fn new(grid: Grid) -> Result<Self> {
        let len = (2 * grid.points).next_power_of_two();
        let mut planner = FftPlanner::new();
        Ok(Self { grid, fft: planner.plan_fft_forward(len), ifft: planner.plan_fft_inverse(len), len })
    }

    pub(crate) fn spectrum(&self, c: &InterferenceCdf) -> Vec<Complex64> {
        let mut buf = vec![Complex64::new(0.0, 0.0); self.len];
        for (b, &m) in buf.iter_mut().zip(&c.mass) {
            b.re = m;
        }
        self.fft.process(&mut buf);
        buf
    }

    pub(crate) fn convolve(&mut self, a: &InterferenceCdf, b: &InterferenceCdf) -> Result<InterferenceCdf> {
        let sb = self.spectrum(b);
        self.convolve_with_spectrum(a, b, &sb)
    }

    /// Like [`Self::convolve`] with the spectrum of `b` precomputed.
    pub(crate) fn convolve_with_spectrum(
        &self,
        a: &InterferenceCdf,
        b: &InterferenceCdf,
        spec_b: &[Complex64],
    ) -> Result<InterferenceCdf> {
        if !a.grid.same_as(&self.grid) || !b.grid.same_as(&self.grid) {
            return Err(Error::InvalidArgument("grid mismatch in convolution".into()));
        }
        let n = self.grid.points;
        let mut buf = self.spectrum(a);
        for (x, y) in buf.iter_mut().zip(spec_b) {
            *x *= y;
        }
        self.ifft.process(&mut buf);
        let scale = 1.0 / self.len as f64;
        let floor = 1e-14 * a.mass.iter().sum::<f64>() * b.mass.iter().sum::<f64>();
        let mut mass: Vec<f64> = buf[..n]
            .iter()
            .map(|c| {
                let v = c.re * scale;
                if v > floor { v } else { 0.0 }
            })
            .collect();
        for k in 0..n {
            mass[k] += a.atom * b.mass[k] + b.atom * a.mass[k];
        }
        let atom = a.atom * b.atom;
        let sa: f64 = a.mass.iter().sum();
        let sb: f64 = b.mass.iter().sum();
        // Grid-to-grid products that landed past the last point.
        let kept: f64 = mass.iter().sum::<f64>() - a.atom * sb - b.atom * sa;
        let overflow = (sa * sb - kept).max(0.0);
        let tail = a.tail + b.tail - a.tail * b.tail + overflow;
        let mut out = InterferenceCdf { grid: self.grid, atom, mass, tail, meta: a.meta.clone() };
        out.renormalize();
        Ok(out)
    }
}

impl InterferenceCdf {
    /// Removes FFT round-off so total mass is exactly one.
    fn renormalize(&mut self) {
        let inner = self.atom + self.mass.iter().sum::<f64>();
        let target = (1.0 - self.tail).max(0.0);
        if inner > 0.0 {
            let f = target / inner;
            self.atom *= f;
            self.mass.iter_mut().for_each(|m| *m *= f);
        }
    }
}

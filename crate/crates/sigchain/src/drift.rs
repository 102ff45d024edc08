//! Peak drift `Q(df)`: where the preamble correlation peak lands when the
//! preamble carries a residual frequency offset `df`.

use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::preamble::{upsample, zc_preamble};
use crate::signal::rotate;
use crate::{Error, Result, C64};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftTable {
    pub nzc: usize,
    pub root: usize,
    pub symbol_duration: f64,
    pub fs: f64,
    /// Grid `-max_offset, -max_offset + step, ..., max_offset`.
    pub step: f64,
    pub max_offset: f64,
    /// Peak shift in samples at each grid point.
    pub shifts: Vec<i64>,
    /// Peak magnitude relative to the zero-offset peak.
    pub magnitudes: Vec<f64>,
    /// Every correlation peak a whole packet casts at each grid offset; see
    /// [`DriftTable::with_images`]. Empty unless requested.
    #[serde(default)]
    pub images: Vec<Vec<Image>>,
}

/// A local maximum of the correlation between the preamble and a
/// frequency-shifted template packet.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Image {
    pub shift: i64,
    pub magnitude: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriftEntry<'a> {
    pub offset: f64,
    pub shift: i64,
    pub magnitude: f64,
    pub images: &'a [Image],
}

/// Builds the table on the grid `k * step`, `|k * step| <= max_offset`.
/// Shifts are searched within `+-floor(nzc / 2)` symbols.
pub fn build_drift_table(nzc: usize, root: usize, tb: f64, fs: f64, max_offset: f64, step: f64) -> Result<DriftTable> {
    if !(step > 0.0) || !(max_offset >= 0.0) {
        return Err(Error::InvalidArgument(format!("bad drift grid: step {step}, span {max_offset}")));
    }
    let sps = (fs * tb).round() as usize;
    if sps == 0 {
        return Err(Error::InvalidParams("fewer than one sample per symbol".into()));
    }
    let p = upsample(&zc_preamble(nzc, root)?, sps);
    let lp = p.len();
    let energy: f64 = p.iter().map(|z| z.norm_sqr()).sum();
    let max_lag = (nzc / 2 * sps) as i64;
    let n = (2 * lp).next_power_of_two();
    let mut planner = FftPlanner::new();
    let (fwd, inv) = (planner.plan_fft_forward(n), planner.plan_fft_inverse(n));
    let mut pf = vec![C64::new(0.0, 0.0); n];
    pf[..lp].copy_from_slice(&p);
    fwd.process(&mut pf);

    let half = (max_offset / step).round() as i64;
    let mut shifts = Vec::with_capacity((2 * half + 1) as usize);
    let mut magnitudes = Vec::with_capacity(shifts.capacity());
    let mut buf = vec![C64::new(0.0, 0.0); n];
    for k in -half..=half {
        buf.iter_mut().for_each(|z| *z = C64::new(0.0, 0.0));
        buf[..lp].copy_from_slice(&p);
        rotate(&mut buf[..lp], k as f64 * step, fs);
        fwd.process(&mut buf);
        for (u, v) in buf.iter_mut().zip(&pf) {
            *u *= v.conj();
        }
        inv.process(&mut buf);
        // c(l) = sum_m s[m + l] conj(p[m]) sits at index l mod n
        let mut best = (0i64, f64::NEG_INFINITY);
        for l in -max_lag..=max_lag {
            let m = buf[l.rem_euclid(n as i64) as usize].norm() / n as f64 / energy;
            // ties go to the smaller shift, then to the side of the offset,
            // which keeps the table antisymmetric
            let tie = (m - best.1).abs() <= 1e-9;
            let better = (!tie && m > best.1)
                || (tie && (l.abs() < best.0.abs() || (l.abs() == best.0.abs() && l.signum() == k.signum())));
            if better {
                best = (l, m);
            }
        }
        shifts.push(best.0);
        magnitudes.push(best.1);
    }
    Ok(DriftTable { nzc, root, symbol_duration: tb, fs, step, max_offset: half as f64 * step, shifts, magnitudes, images: Vec::new() })
}

impl DriftTable {
    /// Adds the image sets of a template packet: the preamble followed by
    /// `payload_samples` of constant amplitude `payload_level`, the mean of
    /// the payload constellation. A nonnegative payload has a strong
    /// carrier component, so besides the shifted preamble peak the packet
    /// casts further peaks where the preamble tail meets the payload. Local
    /// maxima above `floor` times the clean peak are kept.
    pub fn with_images(mut self, payload_samples: usize, payload_level: f64, floor: f64) -> Result<Self> {
        let sps = self.samples_per_symbol();
        let p = upsample(&zc_preamble(self.nzc, self.root)?, sps);
        let lp = p.len();
        let len = lp + payload_samples;
        let energy: f64 = p.iter().map(|z| z.norm_sqr()).sum();
        let n = (len + lp).next_power_of_two();
        let mut planner = FftPlanner::new();
        let (fwd, inv) = (planner.plan_fft_forward(n), planner.plan_fft_inverse(n));
        let mut pf = vec![C64::new(0.0, 0.0); n];
        pf[..lp].copy_from_slice(&p);
        fwd.process(&mut pf);
        let mut buf = vec![C64::new(0.0, 0.0); n];
        let mut images = Vec::with_capacity(self.len());
        for i in 0..self.len() {
            buf.iter_mut().for_each(|z| *z = C64::new(0.0, 0.0));
            buf[..lp].copy_from_slice(&p);
            buf[lp..len].iter_mut().for_each(|z| *z = C64::new(payload_level, 0.0));
            rotate(&mut buf[..len], self.offset_at(i), self.fs);
            fwd.process(&mut buf);
            for (u, v) in buf.iter_mut().zip(&pf) {
                *u *= v.conj();
            }
            inv.process(&mut buf);
            let lags: Vec<i64> = (-(lp as i64) + 1..len as i64).collect();
            let mag: Vec<f64> = lags.iter().map(|&l| buf[l.rem_euclid(n as i64) as usize].norm() / n as f64 / energy).collect();
            let set = (0..mag.len())
                .filter(|&k| {
                    mag[k] >= floor
                        && (k == 0 || mag[k] > mag[k - 1])
                        && (k + 1 == mag.len() || mag[k] >= mag[k + 1])
                })
                .map(|k| Image { shift: lags[k], magnitude: mag[k] })
                .collect();
            images.push(set);
        }
        self.images = images;
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.shifts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.shifts.is_empty()
    }

    fn index(&self, df: f64) -> Option<usize> {
        let k = (df / self.step).round() as i64 + (self.len() as i64 - 1) / 2;
        (0..self.len() as i64).contains(&k).then_some(k as usize)
    }

    pub fn offset_at(&self, i: usize) -> f64 {
        (i as f64 - ((self.len() - 1) / 2) as f64) * self.step
    }

    /// Nearest grid entry, `None` off the grid.
    pub fn lookup(&self, df: f64) -> Option<DriftEntry<'_>> {
        self.index(df).map(|i| DriftEntry {
            offset: self.offset_at(i),
            shift: self.shifts[i],
            magnitude: self.magnitudes[i],
            images: self.images.get(i).map(Vec::as_slice).unwrap_or(&[]),
        })
    }

    /// Grid entries within `radius` Hz of `df`.
    pub fn around(&self, df: f64, radius: f64) -> Vec<DriftEntry<'_>> {
        let r = (radius / self.step).round() as i64;
        (-r..=r).filter_map(|k| self.lookup(df + k as f64 * self.step)).collect()
    }

    pub fn max_abs_shift(&self) -> i64 {
        self.shifts.iter().map(|s| s.abs()).max().unwrap_or(0)
    }

    pub fn samples_per_symbol(&self) -> usize {
        (self.fs * self.symbol_duration).round() as usize
    }
}

use std::f64::consts::TAU;
use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub type C64 = rustfft::num_complex::Complex64;

/// Complex baseband samples at rate `fs`; sample `n` is taken at `t0 + n/fs`.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexSignal {
    pub samples: Vec<C64>,
    pub fs: f64,
    pub t0: f64,
}

/// Sidecar written next to an I/Q dump.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IqHeader {
    pub format: String,
    pub fs: f64,
    pub t0: f64,
    pub samples: usize,
}

impl ComplexSignal {
    pub fn new(samples: Vec<C64>, fs: f64, t0: f64) -> Result<Self> {
        if !(fs > 0.0) || !fs.is_finite() {
            return Err(Error::InvalidParams(format!("sample rate must be positive, got {fs}")));
        }
        Ok(Self { samples, fs, t0 })
    }

    pub fn zeros(len: usize, fs: f64, t0: f64) -> Result<Self> {
        Self::new(vec![C64::new(0.0, 0.0); len], fs, t0)
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration(&self) -> f64 {
        self.len() as f64 / self.fs
    }

    pub fn energy(&self) -> f64 {
        self.samples.iter().map(|z| z.norm_sqr()).sum::<f64>() / self.fs
    }

    /// Index of the sample nearest to absolute time `t`.
    pub fn index_of(&self, t: f64) -> i64 {
        ((t - self.t0) * self.fs).round() as i64
    }

    /// Multiplies sample `n` by `exp(j 2pi df n / fs)`.
    pub fn shift_frequency(&mut self, df: f64) {
        rotate(&mut self.samples, df, self.fs);
    }

    /// Adds `other` at its own start time, growing the buffer if needed.
    pub fn mix_in(&mut self, other: &ComplexSignal) {
        let off = self.index_of(other.t0);
        assert!(off >= 0, "signal starts before the buffer");
        let off = off as usize;
        if self.samples.len() < off + other.len() {
            self.samples.resize(off + other.len(), C64::new(0.0, 0.0));
        }
        for (d, s) in self.samples[off..].iter_mut().zip(&other.samples) {
            *d += s;
        }
    }

    /// Adds circular white Gaussian noise of total variance `variance`.
    pub fn add_noise<R: Rng + ?Sized>(&mut self, rng: &mut R, variance: f64) {
        if variance <= 0.0 {
            return;
        }
        let n = Normal::new(0.0, (variance / 2.0).sqrt()).expect("finite variance");
        for z in &mut self.samples {
            *z += C64::new(n.sample(rng), n.sample(rng));
        }
    }

    /// Copy of samples `[a, b)` with the start time moved accordingly.
    pub fn slice(&self, a: usize, b: usize) -> ComplexSignal {
        let b = b.min(self.len());
        let a = a.min(b);
        ComplexSignal { samples: self.samples[a..b].to_vec(), fs: self.fs, t0: self.t0 + a as f64 / self.fs }
    }

    /// Writes interleaved little-endian f32 I/Q to `path` and a JSON header
    /// to `path` with `.hdr` appended. Returns the header path.
    pub fn write_iq(&self, path: &Path) -> Result<PathBuf> {
        let mut w = BufWriter::new(File::create(path)?);
        for z in &self.samples {
            w.write_all(&(z.re as f32).to_le_bytes())?;
            w.write_all(&(z.im as f32).to_le_bytes())?;
        }
        w.flush()?;
        let hdr = header_path(path);
        let h = IqHeader { format: "cf32_le".into(), fs: self.fs, t0: self.t0, samples: self.len() };
        std::fs::write(&hdr, serde_json::to_string_pretty(&h)?)?;
        Ok(hdr)
    }

    pub fn read_iq(path: &Path) -> Result<Self> {
        let h: IqHeader = serde_json::from_str(&std::fs::read_to_string(header_path(path))?)?;
        let mut raw = Vec::new();
        File::open(path)?.read_to_end(&mut raw)?;
        if raw.len() != 8 * h.samples {
            return Err(Error::InvalidArgument(format!("{} bytes for {} samples", raw.len(), h.samples)));
        }
        let f = |b: &[u8]| f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64;
        let samples = raw.chunks_exact(8).map(|c| C64::new(f(&c[..4]), f(&c[4..]))).collect();
        Self::new(samples, h.fs, h.t0)
    }
}

fn header_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".hdr");
    PathBuf::from(s)
}

/// In-place `x[n] *= exp(j 2pi df n / fs)`.
pub fn rotate(x: &mut [C64], df: f64, fs: f64) {
    if df == 0.0 {
        return;
    }
    let w = TAU * df / fs;
    for (n, z) in x.iter_mut().enumerate() {
        *z *= C64::from_polar(1.0, w * n as f64);
    }
}

//! MMSE combining of replicas observed through independent interference.

use crate::error::{Error, Result};

/// Solves `[sx2 * J + diag(si2)] w = sx2 * 1` where `J` is the all-ones
/// matrix, `sx2` the signal power and `si2` the interference-plus-noise
/// power on each replica.
pub fn mmse_weights(signal_power: f64, noise_powers: &[f64]) -> Result<Vec<f64>> {
    if noise_powers.is_empty() {
        return Err(Error::InvalidArgument("at least one branch required".into()));
    }
    if !(signal_power > 0.0) || noise_powers.iter().any(|&s| !(s > 0.0) || !s.is_finite()) {
        return Err(Error::Degenerate(
            "signal and interference-plus-noise powers must be positive".into(),
        ));
    }
    let n = noise_powers.len();
    let mut a: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let mut row = vec![signal_power; n + 1];
            row[i] += noise_powers[i];
            row
        })
        .collect();
    solve_in_place(&mut a)
}

/// Gaussian elimination with partial pivoting on an augmented `n x (n+1)` matrix.
fn solve_in_place(a: &mut [Vec<f64>]) -> Result<Vec<f64>> {
    let n = a.len();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        if a[pivot][col].abs() < f64::MIN_POSITIVE {
            return Err(Error::Degenerate("singular combining system".into()));
        }
        a.swap(col, pivot);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            if f != 0.0 {
                for k in col..=n {
                    a[row][k] -= f * a[col][k];
                }
            }
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|k| a[i][k] * x[k]).sum();
        x[i] = (a[i][n] - s) / a[i][i];
    }
    Ok(x)
}

/// Output SINR of `sum_i w_i Y_i` with `Y_i = X + Omega_i`.
pub fn combined_sinr(weights: &[f64], signal_power: f64, noise_powers: &[f64]) -> f64 {
    let gain: f64 = weights.iter().sum();
    let noise: f64 = weights.iter().zip(noise_powers).map(|(w, s)| w * w * s).sum();
    signal_power * gain * gain / noise
}

/// Relative residual `|A w - b| / |b|` of the combining system.
pub fn weight_residual(weights: &[f64], signal_power: f64, noise_powers: &[f64]) -> f64 {
    let sum: f64 = weights.iter().sum();
    let mut num = 0.0;
    for (w, s) in weights.iter().zip(noise_powers) {
        let r = signal_power * sum + s * w - signal_power;
        num += r * r;
    }
    num.sqrt() / (signal_power * (weights.len() as f64).sqrt())
}

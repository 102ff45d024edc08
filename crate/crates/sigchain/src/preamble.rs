//! Zadoff-Chu preambles.

use std::f64::consts::PI;

use crate::{Error, Result, C64};

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Symbol-rate Zadoff-Chu sequence of length `nzc` and root `root`.
pub fn zc_preamble(nzc: usize, root: usize) -> Result<Vec<C64>> {
    if nzc < 2 || root == 0 || root >= nzc || gcd(root, nzc) != 1 {
        return Err(Error::InvalidParams(format!("ZC root {root} must be in 1..{nzc} and coprime with it")));
    }
    let (n_f, u) = (nzc as f64, root as f64);
    Ok((0..nzc)
        .map(|n| {
            let n = n as f64;
            // odd and even lengths use the two standard forms
            let arg = if nzc % 2 == 1 { n * (n + 1.0) } else { n * n };
            C64::from_polar(1.0, -PI * u * arg / n_f)
        })
        .collect())
}

/// Holds each symbol for `sps` samples.
pub fn upsample(symbols: &[C64], sps: usize) -> Vec<C64> {
    symbols.iter().flat_map(|&s| std::iter::repeat(s).take(sps)).collect()
}

/// `sum_n x[(n + lag) mod N] conj(x[n])`.
pub fn periodic_autocorrelation(x: &[C64], lag: usize) -> C64 {
    let n = x.len();
    (0..n).map(|i| x[(i + lag) % n] * x[i].conj()).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_modulus_and_ideal_autocorrelation() {
        let zc = zc_preamble(23, 5).unwrap();
        assert_eq!(zc.len(), 23);
        assert!(zc.iter().all(|z| (z.norm() - 1.0).abs() < 1e-12));
        assert!((periodic_autocorrelation(&zc, 0) - C64::new(23.0, 0.0)).norm() < 1e-9);
        for lag in 1..23 {
            assert!(periodic_autocorrelation(&zc, lag).norm() < 1e-9, "lag {lag}");
        }
    }

    #[test]
    fn first_terms_match_definition() {
        let zc = zc_preamble(23, 5).unwrap();
        assert!((zc[0] - C64::new(1.0, 0.0)).norm() < 1e-12);
        // n = 1: exp(-j pi 5 * 2 / 23)
        let want = C64::from_polar(1.0, -PI * 10.0 / 23.0);
        assert!((zc[1] - want).norm() < 1e-12);
    }

    #[test]
    fn non_coprime_root_rejected() {
        assert!(zc_preamble(21, 7).is_err());
        assert!(zc_preamble(23, 0).is_err());
        assert!(zc_preamble(23, 23).is_err());
        assert!(zc_preamble(45, 7).is_ok());
    }

    #[test]
    fn upsampling_holds_symbols() {
        let u = upsample(&zc_preamble(5, 2).unwrap(), 3);
        assert_eq!(u.len(), 15);
        assert_eq!(u[3], u[5]);
    }
}

//! Successive peak cancellation.
//!
//! Demodulating with the wrong carrier offset does not remove a preamble
//! from the correlation output, it moves it by `Q(df)`. A peak in branch `j`
//! is accepted only if the ghosts it should cast into the other branches are
//! there. Candidates are visited strongest first and an accepted peak takes
//! its ghosts with it, so a ghost cannot later be accepted on the strength of
//! the peak that cast it.

use serde::{Deserialize, Serialize};

use crate::drift::DriftTable;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Peak {
    pub position: usize,
    pub magnitude: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Branch {
    pub cfo: f64,
    pub peaks: Vec<Peak>,
}

/// Correlation peaks per CFO branch, with the absolute detection threshold.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PeakMap {
    pub branches: Vec<Branch>,
    pub threshold: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Validated {
    pub cfo: f64,
    pub offset: usize,
    pub magnitude: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpcConfig {
    /// Position tolerance when matching a predicted ghost, samples.
    pub tolerance: usize,
    /// The CFO estimates are trusted to this many Hz; every table entry in
    /// that window is an admissible ghost position.
    pub cfo_uncertainty: f64,
    /// A ghost is required only when its predicted magnitude clears the
    /// threshold by this factor; weaker ones may have drowned.
    pub evidence_margin: f64,
    /// Position tolerance when cancelling the other images of an accepted
    /// packet. These depend on its random payload, hence the wider window.
    pub image_tolerance: usize,
    /// Candidates weaker than this fraction of the clean peak serve as
    /// evidence only and are never accepted themselves.
    pub accept_ratio: f64,
    /// Height of the clean peak; with `accept_ratio` fixes the floor.
    pub clean_peak: f64,
}

impl Default for SpcConfig {
    fn default() -> Self {
        Self { tolerance: 1, cfo_uncertainty: 2.0, evidence_margin: 1.5, image_tolerance: 6, accept_ratio: 0.0, clean_peak: 0.0 }
    }
}

pub fn spc_resolve(pm: &PeakMap, dt: &DriftTable) -> Vec<Validated> {
    spc_resolve_with(pm, dt, &SpcConfig::default(), |_, _| true)
}

/// As [`spc_resolve`]; `verify(cfo, position)` gets a last say on each
/// candidate that has its cross-branch evidence.
pub fn spc_resolve_with(pm: &PeakMap, dt: &DriftTable, cfg: &SpcConfig, verify: impl Fn(f64, usize) -> bool) -> Vec<Validated> {
    let mut cands: Vec<(usize, usize)> = pm
        .branches
        .iter()
        .enumerate()
        .flat_map(|(j, b)| (0..b.peaks.len()).map(move |i| (j, i)))
        .collect();
    let peak = |(j, i): (usize, usize)| pm.branches[j].peaks[i];
    cands.sort_by(|&a, &b| peak(b).magnitude.total_cmp(&peak(a).magnitude).then(a.cmp(&b)));

    let mut live: Vec<Vec<bool>> = pm.branches.iter().map(|b| vec![true; b.peaks.len()]).collect();
    let near = |pos: usize, target: i64| (pos as i64 - target).abs() <= cfg.tolerance as i64;
    let mut out = Vec::new();

    for (j, i) in cands {
        if !live[j][i] {
            continue;
        }
        live[j][i] = false;
        let pk = peak((j, i));
        let bj = &pm.branches[j];
        if pk.magnitude < cfg.accept_ratio * cfg.clean_peak {
            continue;
        }
        let mut ok = true;
        let mut ghosts: Vec<(usize, usize)> = Vec::new();
        for (k, bk) in pm.branches.iter().enumerate() {
            if k == j {
                continue;
            }
            // the packet sits at df = f_j - f_k relative to branch k
            let entries = dt.around(bj.cfo - bk.cfo, cfg.cfo_uncertainty);
            let found: Vec<usize> = (0..bk.peaks.len())
                .filter(|&q| entries.iter().any(|e| near(bk.peaks[q].position, pk.position as i64 + e.shift)))
                .collect();
            let weakest = entries.iter().map(|e| e.magnitude).fold(f64::INFINITY, f64::min);
            let expected = entries.is_empty() || weakest * pk.magnitude < cfg.evidence_margin * pm.threshold;
            if found.is_empty() && !expected {
                ok = false;
                break;
            }
            ghosts.extend(found.into_iter().map(|q| (k, q)));
        }
        if ok && verify(bj.cfo, pk.position) {
            for (k, q) in ghosts {
                live[k][q] = false;
            }
            for (k, bk) in pm.branches.iter().enumerate() {
                let entries = dt.around(bj.cfo - bk.cfo, cfg.cfo_uncertainty);
                for (q, other) in bk.peaks.iter().enumerate() {
                    let hit = entries.iter().flat_map(|e| e.images).any(|im| {
                        (other.position as i64 - (pk.position as i64 + im.shift)).abs() <= cfg.image_tolerance as i64
                    });
                    if hit {
                        live[k][q] = false;
                    }
                }
            }
            out.push(Validated { cfo: bj.cfo, offset: pk.position, magnitude: pk.magnitude });
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::drift::build_drift_table;

    fn table() -> DriftTable {
        build_drift_table(23, 5, 0.01, 4000.0, 400.0, 1.0).unwrap()
    }

    #[test]
    fn empty_map() {
        assert!(spc_resolve(&PeakMap::default(), &table()).is_empty());
    }

    #[test]
    fn single_branch_accepts_everything() {
        let pm = PeakMap {
            branches: vec![Branch {
                cfo: 10.0,
                peaks: vec![Peak { position: 5, magnitude: 900.0 }, Peak { position: 800, magnitude: 500.0 }],
            }],
            threshold: 460.0,
        };
        assert_eq!(spc_resolve(&pm, &table()).len(), 2);
    }

    #[test]
    fn constructed_ghosts_are_rejected() {
        let dt = table();
        let (fa, fb) = (-13.0, 9.0);
        let (pa, pb) = (300usize, 1100usize);
        // each packet casts a ghost into the other branch
        let ga = dt.lookup(fa - fb).unwrap();
        let gb = dt.lookup(fb - fa).unwrap();
        assert!(ga.magnitude * 900.0 > 1.5 * 460.0);
        let pm = PeakMap {
            branches: vec![
                Branch {
                    cfo: fa,
                    peaks: vec![
                        Peak { position: pa, magnitude: 920.0 },
                        Peak { position: (pb as i64 + gb.shift) as usize, magnitude: 900.0 * gb.magnitude },
                    ],
                },
                Branch {
                    cfo: fb,
                    peaks: vec![
                        Peak { position: pb, magnitude: 900.0 },
                        Peak { position: (pa as i64 + ga.shift) as usize, magnitude: 920.0 * ga.magnitude },
                    ],
                },
            ],
            threshold: 460.0,
        };
        let mut v = spc_resolve(&pm, &dt);
        v.sort_by_key(|x| x.offset);
        assert_eq!(v.len(), 2);
        assert_eq!((v[0].cfo, v[0].offset), (fa, pa));
        assert_eq!((v[1].cfo, v[1].offset), (fb, pb));
    }

    #[test]
    fn weak_candidates_are_evidence_only() {
        let pm = PeakMap {
            branches: vec![Branch {
                cfo: 0.0,
                peaks: vec![Peak { position: 5, magnitude: 900.0 }, Peak { position: 800, magnitude: 500.0 }],
            }],
            threshold: 460.0,
        };
        let cfg = SpcConfig { accept_ratio: 0.7, clean_peak: 920.0, ..Default::default() };
        let v = spc_resolve_with(&pm, &table(), &cfg, |_, _| true);
        assert_eq!(v.len(), 1);
        assert!(spc_resolve_with(&pm, &table(), &cfg, |_, p| p != 5).is_empty());
    }

    #[test]
    fn missing_evidence_rejects() {
        let dt = table();
        let pm = PeakMap {
            branches: vec![
                Branch { cfo: 0.0, peaks: vec![Peak { position: 400, magnitude: 920.0 }] },
                Branch { cfo: 1.0, peaks: vec![] },
            ],
            threshold: 460.0,
        };
        // a 1 Hz offset barely dents the peak, so its copy must be present
        let exact = SpcConfig { cfo_uncertainty: 0.0, ..Default::default() };
        assert!(spc_resolve_with(&pm, &dt, &exact, |_, _| true).is_empty());
    }
}

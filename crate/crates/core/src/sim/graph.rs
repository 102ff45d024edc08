//! Pairwise rectangle intersections between replicas.

use serde::{Deserialize, Serialize};

use crate::params::SystemParams;
use crate::traffic::{Replica, VirtualFrame};

/// One side of an overlap edge, seen from the owning replica.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Overlap {
    pub other: usize,
    /// Intersection area in s*Hz.
    pub area: f64,
    /// Overlapped time interval relative to the owner's start, `[start, end)`.
    pub start: f64,
    pub end: f64,
}

/// Replicas and their non-zero pairwise overlaps.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct CollisionGraph {
    pub replicas: Vec<Replica>,
    /// Adjacency lists, symmetric in `other`/`area`.
    pub overlaps: Vec<Vec<Overlap>>,
    /// Replica indices of each packet.
    pub packet_replicas: Vec<Vec<usize>>,
}

/// Intersection of `a` with `b` shifted in time by `shift`, or `None`.
fn intersect(a: &Replica, b: &Replica, shift: f64) -> Option<(f64, f64, f64)> {
    let bt0 = b.t0 + shift;
    let lo = a.t0.max(bt0);
    let hi = a.end().min(bt0 + b.duration);
    let dt = hi - lo;
    if !(dt > 0.0) {
        return None;
    }
    let flo = (a.df - 0.5 * a.bandwidth).max(b.df - 0.5 * b.bandwidth);
    let fhi = (a.df + 0.5 * a.bandwidth).min(b.df + 0.5 * b.bandwidth);
    let dfq = fhi - flo;
    if !(dfq > 0.0) {
        return None;
    }
    Some((dt * dfq, lo, hi))
}

impl CollisionGraph {
    /// Builds the graph of all replicas in `frames`; packet `i` is frame `i`.
    /// With `horizon = Some(h)` the time axis is a circle of length `h`.
    pub fn from_frames(frames: &[VirtualFrame], p: &SystemParams, horizon: Option<f64>) -> Self {
        let replicas: Vec<Replica> =
            frames.iter().enumerate().flat_map(|(i, f)| f.replicas(i, p)).collect();
        Self::from_replicas(replicas, frames.len(), horizon)
    }

    /// Sweep over start times. Each replica is compared only with replicas
    /// starting before its end, so the cost is `O(n log n + edges)`.
    /// Start times are reduced modulo the horizon when one is given.
    pub fn from_replicas(mut replicas: Vec<Replica>, packets: usize, horizon: Option<f64>) -> Self {
        if let Some(h) = horizon {
            for r in &mut replicas {
                r.t0 = r.t0.rem_euclid(h);
            }
        }
        let n = replicas.len();
        let mut packet_replicas = vec![Vec::new(); packets];
        for (i, r) in replicas.iter().enumerate() {
            if r.packet >= packet_replicas.len() {
                packet_replicas.resize(r.packet + 1, Vec::new());
            }
            packet_replicas[r.packet].push(i);
        }
        let max_dur = replicas.iter().map(|r| r.duration).fold(0.0, f64::max);
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| replicas[a].t0.total_cmp(&replicas[b].t0).then(a.cmp(&b)));

        // wrapped copies of early replicas appended after the originals
        let mut ext: Vec<(usize, f64)> = order.iter().map(|&i| (i, 0.0)).collect();
        if let Some(h) = horizon {
            assert!(h >= 2.0 * max_dur, "circular horizon shorter than two replica durations");
            ext.extend(order.iter().take_while(|&&i| replicas[i].t0 < max_dur).map(|&i| (i, h)));
        }

        let mut overlaps = vec![Vec::new(); n];
        for (pos, &(i, _)) in ext.iter().enumerate().take(n) {
            let a = &replicas[i];
            let limit = a.end();
            for &(j, shift) in &ext[pos + 1..] {
                let b = &replicas[j];
                if b.t0 + shift >= limit {
                    break;
                }
                if j == i {
                    continue;
                }
                if let Some((area, lo, hi)) = intersect(a, b, shift) {
                    let bt0 = b.t0 + shift;
                    overlaps[i].push(Overlap { other: j, area, start: lo - a.t0, end: hi - a.t0 });
                    overlaps[j].push(Overlap { other: i, area, start: lo - bt0, end: hi - bt0 });
                }
            }
        }
        Self { replicas, overlaps, packet_replicas }
    }

    /// Quadratic reference construction, used to check the sweep.
    pub fn brute_force(mut replicas: Vec<Replica>, packets: usize, horizon: Option<f64>) -> Self {
        if let Some(h) = horizon {
            for r in &mut replicas {
                r.t0 = r.t0.rem_euclid(h);
            }
        }
        let n = replicas.len();
        let mut g = Self::from_replicas(Vec::new(), packets, None);
        g.overlaps = vec![Vec::new(); n];
        for r in &replicas {
            if r.packet >= g.packet_replicas.len() {
                g.packet_replicas.resize(r.packet + 1, Vec::new());
            }
        }
        for (i, r) in replicas.iter().enumerate() {
            g.packet_replicas[r.packet].push(i);
        }
        for i in 0..n {
            for j in i + 1..n {
                let (a, b) = (&replicas[i], &replicas[j]);
                let mut cands = vec![(i, j, 0.0)];
                if let Some(h) = horizon {
                    // shift the earlier one forward by one period
                    if a.t0 <= b.t0 {
                        cands.push((j, i, h));
                    } else {
                        cands.push((i, j, h));
                    }
                }
                for (x, y, shift) in cands {
                    let (rx, ry) = (&replicas[x], &replicas[y]);
                    if let Some((area, lo, hi)) = intersect(rx, ry, shift) {
                        let yt0 = ry.t0 + shift;
                        g.overlaps[x].push(Overlap { other: y, area, start: lo - rx.t0, end: hi - rx.t0 });
                        g.overlaps[y].push(Overlap { other: x, area, start: lo - yt0, end: hi - yt0 });
                    }
                }
            }
        }
        g.replicas = replicas;
        g
    }

    pub fn packets(&self) -> usize {
        self.packet_replicas.len()
    }

    pub fn edge_count(&self) -> usize {
        self.overlaps.iter().map(Vec::len).sum::<usize>() / 2
    }

    /// Overlap area between replicas `a` and `b` (zero if disjoint).
    pub fn overlap(&self, a: usize, b: usize) -> f64 {
        self.overlaps[a].iter().filter(|o| o.other == b).map(|o| o.area).sum()
    }

    /// Aggregate overlap area on replica `r` from replicas of other packets.
    pub fn interference_area(&self, r: usize) -> f64 {
        let own = self.replicas[r].packet;
        self.overlaps[r]
            .iter()
            .filter(|o| self.replicas[o.other].packet != own)
            .map(|o| o.area)
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rep(packet: usize, t0: f64, df: f64) -> Replica {
        Replica { packet, t0, df, duration: 0.5, bandwidth: 200.0, energy_density: 1.0 }
    }

    #[test]
    fn disjoint_replicas_have_no_edge() {
        let g = CollisionGraph::from_replicas(vec![rep(0, 0.0, 0.0), rep(1, 1.0, 0.0)], 2, None);
        assert_eq!(g.edge_count(), 0);
        let g = CollisionGraph::from_replicas(vec![rep(0, 0.0, -150.0), rep(1, 0.0, 100.0)], 2, None);
        assert_eq!(g.edge_count(), 0);
    }

    #[test]
    fn identical_rectangles_fully_overlap() {
        let g = CollisionGraph::from_replicas(vec![rep(0, 1.0, 30.0), rep(1, 1.0, 30.0)], 2, None);
        assert_eq!(g.overlap(0, 1), 100.0);
        assert_eq!(g.overlaps[0][0].start, 0.0);
        assert_eq!(g.overlaps[0][0].end, 0.5);
    }

    #[test]
    fn partial_overlap_area() {
        let g = CollisionGraph::from_replicas(vec![rep(0, 0.0, 0.0), rep(1, 0.25, 50.0)], 2, None);
        assert!((g.overlap(1, 0) - 0.25 * 150.0).abs() < 1e-12);
        let o = g.overlaps[1][0];
        assert_eq!((o.start, o.end), (0.0, 0.25));
    }

    #[test]
    fn wrap_around_horizon() {
        let g = CollisionGraph::from_replicas(vec![rep(0, 9.8, 0.0), rep(1, 0.1, 0.0)], 2, Some(10.0));
        // second replica occupies [10.1, 10.6) on the unrolled axis
        assert!((g.overlap(0, 1) - 0.2 * 200.0).abs() < 1e-9);
        let g = CollisionGraph::from_replicas(vec![rep(0, 9.8, 0.0), rep(1, 0.1, 0.0)], 2, None);
        assert_eq!(g.edge_count(), 0);
    }
}

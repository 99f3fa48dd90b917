//! From activation maps to discrete targets: normalisation, thresholding,
//! density clustering, population-coded readout and ground-truth matching.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frame::FrameBuffer;
use crate::ganglion::direction_of;

/// One candidate target in one frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    /// Cluster centroid, pixels.
    pub x: f64,
    pub y: f64,
    /// Population-coded direction in `(-pi, pi]`, image coordinates.
    pub direction: f64,
    /// Magnitude of the mean energy vector.
    pub energy: f64,
    pub n_points: usize,
    pub frame_index: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DetectorParams {
    /// DBSCAN neighbourhood radius (pixels).
    pub eps: f64,
    /// DBSCAN core-point threshold, counting the point itself.
    pub n_min: usize,
    /// Threshold on the min-max normalised activation.
    pub gamma: f64,
    /// Match radius `size_factor * d + offset_deg` degrees.
    pub dth_size_factor: f64,
    pub dth_offset_deg: f64,
}

impl Default for DetectorParams {
    fn default() -> Self {
        Self::synthetic()
    }
}

impl DetectorParams {
    pub fn synthetic() -> Self {
        Self {
            eps: 3.0,
            n_min: 1,
            gamma: 0.3,
            dth_size_factor: 0.5,
            dth_offset_deg: 1.0,
        }
    }

    pub fn real() -> Self {
        Self {
            eps: 2.0,
            n_min: 8,
            ..Self::synthetic()
        }
    }

    /// Parses a match rule of the form `"0.5d+1"`: a factor on the target
    /// extent plus an offset in degrees. Either part may be omitted.
    pub fn with_dth_rule(mut self, rule: &str) -> Result<Self> {
        let r: String = rule.chars().filter(|c| !c.is_whitespace()).collect();
        let r = r.trim_end_matches('°');
        let bad = || Error::Parse(format!("match rule {rule:?} is not of the form `a*d + b`"));
        let (factor, offset) = match r.split_once('d') {
            Some((f, o)) => {
                let f = f.trim_end_matches('*');
                let factor = match f {
                    "" | "+" => 1.0,
                    "-" => -1.0,
                    _ => f.parse().map_err(|_| bad())?,
                };
                let offset = if o.is_empty() { 0.0 } else { o.parse().map_err(|_| bad())? };
                (factor, offset)
            }
            None => (0.0, r.parse().map_err(|_| bad())?),
        };
        if !(factor >= 0.0 && offset >= 0.0 && factor + offset > 0.0) {
            return Err(bad());
        }
        self.dth_size_factor = factor;
        self.dth_offset_deg = offset;
        Ok(self)
    }

    /// Match radius in pixels for a target of extent `size_px`.
    pub fn match_radius(&self, size_px: f64, px_per_deg: f64) -> f64 {
        self.dth_size_factor * size_px + self.dth_offset_deg * px_per_deg
    }
}

/// Maps a field into `[0, 1]`; a constant field maps to all zeros.
pub fn minmax_norm(field: &FrameBuffer) -> FrameBuffer {
    let (lo, hi) = (field.min(), field.max());
    if hi <= lo {
        return FrameBuffer::zeros(field.width(), field.height());
    }
    field.map(|v| normalize(v, lo, hi))
}

#[inline]
pub(crate) fn normalize(v: f64, lo: f64, hi: f64) -> f64 {
    (v - lo) / (hi - lo)
}

/// Pixel coordinates whose value is strictly greater than `gamma`, row-major.
pub fn threshold_select(norm: &FrameBuffer, gamma: f64) -> Vec<(usize, usize)> {
    let w = norm.width();
    norm.data()
        .iter()
        .enumerate()
        .filter(|(_, &v)| v > gamma)
        .map(|(i, _)| (i % w, i / w))
        .collect()
}

/// Density-based clustering with Euclidean distance.
///
/// A point is core when at least `n_min` points (itself included) lie within
/// `eps`. Clusters are grown from core points in input order; a border point
/// joins the first cluster that reaches it; noise is dropped. Returns member
/// indices per cluster, in discovery order, each list sorted.
pub fn dbscan(points: &[[f64; 2]], eps: f64, n_min: usize) -> Vec<Vec<usize>> {
    let neighbors = GridIndex::new(points, eps).all_neighbors(points, eps);
    let core: Vec<bool> = neighbors.iter().map(|n| n.len() >= n_min).collect();
    let mut label: Vec<Option<usize>> = vec![None; points.len()];
    let mut clusters = Vec::new();
    let mut stack = Vec::new();
    for start in 0..points.len() {
        if label[start].is_some() || !core[start] {
            continue;
        }
        let id = clusters.len();
        let mut members = vec![start];
        label[start] = Some(id);
        stack.push(start);
        while let Some(p) = stack.pop() {
            for &q in &neighbors[p] {
                if label[q].is_none() {
                    label[q] = Some(id);
                    members.push(q);
                    if core[q] {
                        stack.push(q);
                    }
                }
            }
        }
        members.sort_unstable();
        clusters.push(members);
    }
    clusters
}

/// Uniform grid with cell side `eps` for radius queries.
struct GridIndex {
    cells: std::collections::HashMap<(i64, i64), Vec<usize>>,
    cell: f64,
}

impl GridIndex {
    fn new(points: &[[f64; 2]], eps: f64) -> Self {
        let cell = if eps > 0.0 { eps } else { 1.0 };
        let mut cells: std::collections::HashMap<(i64, i64), Vec<usize>> = Default::default();
        for (i, p) in points.iter().enumerate() {
            cells.entry(Self::key(p, cell)).or_default().push(i);
        }
        Self { cells, cell }
    }

    fn key(p: &[f64; 2], cell: f64) -> (i64, i64) {
        ((p[0] / cell).floor() as i64, (p[1] / cell).floor() as i64)
    }

    fn all_neighbors(&self, points: &[[f64; 2]], eps: f64) -> Vec<Vec<usize>> {
        let eps2 = eps * eps;
        points
            .iter()
            .map(|p| {
                let (cx, cy) = Self::key(p, self.cell);
                let mut out = Vec::new();
                for gy in cy - 1..=cy + 1 {
                    for gx in cx - 1..=cx + 1 {
                        if let Some(ids) = self.cells.get(&(gx, gy)) {
                            for &j in ids {
                                let q = &points[j];
                                let d2 = (p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2);
                                if d2 <= eps2 {
                                    out.push(j);
                                }
                            }
                        }
                    }
                }
                out.sort_unstable();
                out
            })
            .collect()
    }
}

/// A member pixel of a cluster with its energy readout.
#[derive(Debug, Clone, Copy)]
pub struct MemberSample {
    pub x: f64,
    pub y: f64,
    /// `max_theta E^theta` at the pixel.
    pub max_energy: f64,
    /// Local direction estimate at the pixel.
    pub direction: f64,
}

/// Centroid plus population-coded direction and energy of one cluster.
///
/// Each member's maximal energy is split along x and y using its local
/// direction; the cluster vector is the mean of those components.
pub fn cluster_readout(members: &[MemberSample], frame_index: usize) -> Detection {
    assert!(!members.is_empty(), "cluster without members");
    let n = members.len() as f64;
    let (mut sx, mut sy, mut ex, mut ey) = (0.0, 0.0, 0.0, 0.0);
    for m in members {
        sx += m.x;
        sy += m.y;
        let (s, c) = m.direction.sin_cos();
        ex += m.max_energy * c;
        ey += m.max_energy * s;
    }
    let (ex, ey) = (ex / n, ey / n);
    Detection {
        x: sx / n,
        y: sy / n,
        direction: direction_of(ex, ey),
        energy: ex.hypot(ey),
        n_points: members.len(),
        frame_index,
    }
}

/// Ground-truth record of one target in one frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruthTarget {
    pub frame: usize,
    pub target_id: usize,
    pub x: f64,
    pub y: f64,
    /// Extent used by the match rule: diameter for synthetic targets, box
    /// diagonal for annotated footage (pixels).
    pub size_px: f64,
    pub direction: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct MatchResult {
    pub true_positives: usize,
    pub false_positives: usize,
    /// Per truth target, whether it was detected.
    pub hits: Vec<bool>,
    /// `(detection, truth)` index pairs.
    pub pairs: Vec<(usize, usize)>,
}

/// One-to-one greedy matching, closest pairs first. A detection strictly
/// closer than `radius(truth)` to a still unmatched target is a true
/// positive; every other detection is a false positive.
pub fn match_detections(
    dets: &[Detection],
    truth: &[TruthTarget],
    radius: impl Fn(&TruthTarget) -> f64,
) -> MatchResult {
    let mut cand = Vec::new();
    for (i, d) in dets.iter().enumerate() {
        for (j, t) in truth.iter().enumerate() {
            let dist = (d.x - t.x).hypot(d.y - t.y);
            if dist < radius(t) {
                cand.push((dist, i, j));
            }
        }
    }
    cand.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut det_used = vec![false; dets.len()];
    let mut hits = vec![false; truth.len()];
    let mut pairs = Vec::new();
    for (_, i, j) in cand {
        if !det_used[i] && !hits[j] {
            det_used[i] = true;
            hits[j] = true;
            pairs.push((i, j));
        }
    }
    MatchResult {
        true_positives: pairs.len(),
        false_positives: dets.len() - pairs.len(),
        hits,
        pairs,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_4;

    #[test]
    fn dth_rule_parsing() {
        let p = DetectorParams::default();
        let r = p.with_dth_rule("0.5d+1").unwrap();
        assert_eq!((r.dth_size_factor, r.dth_offset_deg), (0.5, 1.0));
        let r = p.with_dth_rule(" 0.25 * d + 2° ").unwrap();
        assert_eq!((r.dth_size_factor, r.dth_offset_deg), (0.25, 2.0));
        let r = p.with_dth_rule("d").unwrap();
        assert_eq!((r.dth_size_factor, r.dth_offset_deg), (1.0, 0.0));
        let r = p.with_dth_rule("1.5").unwrap();
        assert_eq!((r.dth_size_factor, r.dth_offset_deg), (0.0, 1.5));
        assert_eq!(r.match_radius(10.0, 4.0), 6.0);
        for bad in ["", "x", "0.5d+", "-d+1", "0"] {
            assert!(p.with_dth_rule(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn minmax_cases() {
        let f = FrameBuffer::from_vec(3, 1, vec![2.0, 4.0, 6.0]).unwrap();
        assert_eq!(minmax_norm(&f).data(), &[0.0, 0.5, 1.0]);
        let c = FrameBuffer::filled(4, 4, 7.0);
        assert!(minmax_norm(&c).data().iter().all(|&v| v == 0.0));
        let u = FrameBuffer::from_vec(3, 1, vec![0.0, 0.25, 1.0]).unwrap();
        assert_eq!(minmax_norm(&u), u);
    }

    #[test]
    fn threshold_is_strict() {
        let f = FrameBuffer::from_vec(3, 1, vec![0.0, 0.5, 1.0]).unwrap();
        assert_eq!(threshold_select(&f, 0.9), vec![(2, 0)]);
        assert!(threshold_select(&f, 1.0).is_empty());
    }

    #[test]
    fn dbscan_line_is_one_cluster() {
        let pts = [[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]];
        let c = dbscan(&pts, 3.0, 1);
        assert_eq!(c, vec![vec![0, 1, 2]]);
        let far = [[0.0, 0.0], [100.0, 0.0]];
        assert_eq!(dbscan(&far, 3.0, 1).len(), 2);
    }

    #[test]
    fn dbscan_drops_noise() {
        let pts = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0], [9.0, 9.0]];
        let c = dbscan(&pts, 1.5, 3);
        assert_eq!(c, vec![vec![0, 1, 2, 3]]);
    }

    #[test]
    fn readout_degenerate_and_symmetric() {
        let m = |d: f64| MemberSample {
            x: 1.0,
            y: 2.0,
            max_energy: 3.0,
            direction: d,
        };
        let d = cluster_readout(&[m(0.0), m(0.0)], 4);
        assert_eq!((d.direction, d.energy, d.n_points, d.frame_index), (0.0, 3.0, 2, 4));
        let d = cluster_readout(&[m(FRAC_PI_4), m(-FRAC_PI_4)], 0);
        assert!(d.direction.abs() < 1e-15);
        assert!((d.energy - 3.0 * FRAC_PI_4.cos()).abs() < 1e-12);
    }

    fn det(x: f64, y: f64) -> Detection {
        Detection {
            x,
            y,
            direction: 0.0,
            energy: 1.0,
            n_points: 1,
            frame_index: 0,
        }
    }

    fn truth(x: f64, y: f64, size_px: f64) -> TruthTarget {
        TruthTarget {
            frame: 0,
            target_id: 0,
            x,
            y,
            size_px,
            direction: 0.0,
        }
    }

    #[test]
    fn match_radius_rule() {
        let p = DetectorParams::synthetic();
        assert_eq!(p.match_radius(8.0, 4.0), 8.0);
        let r = match_detections(&[det(10.0, 10.0)], &[truth(12.0, 10.0, 8.0)], |t| p.match_radius(t.size_px, 4.0));
        assert_eq!((r.true_positives, r.false_positives), (1, 0));
    }

    #[test]
    fn matching_is_one_to_one() {
        let r = match_detections(&[], &[truth(0.0, 0.0, 4.0)], |_| 5.0);
        assert_eq!((r.true_positives, r.false_positives), (0, 0));
        let r = match_detections(&[det(1.0, 0.0), det(0.5, 0.0)], &[truth(0.0, 0.0, 4.0)], |_| 5.0);
        assert_eq!((r.true_positives, r.false_positives), (1, 1));
        assert_eq!(r.pairs, vec![(1, 0)]);
        // exactly at the radius is not a hit
        let r = match_detections(&[det(5.0, 0.0)], &[truth(0.0, 0.0, 4.0)], |_| 5.0);
        assert_eq!(r.true_positives, 0);
    }
}

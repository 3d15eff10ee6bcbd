use serde::{Deserialize, Serialize};

use super::BoundaryEstimate;
use crate::error::Result;
use crate::geometry::{dist, polygonize_cavity, CavityShape, Point};

/// Boundary samples used to locate the probed arc and to measure coverage.
const ARC_SAMPLES: usize = 2048;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    /// Largest distance from an estimate vertex facing the probed arc to the true boundary.
    pub hausdorff_one_sided: f64,
    /// Fraction of the true boundary length within `band` of the estimate.
    pub coverage: f64,
    pub band: f64,
    /// Estimate vertices that entered the Hausdorff distance.
    pub n_vertices_used: usize,
    /// Fraction of the boundary length on the probed arc.
    pub probed_fraction: f64,
}

/// Minimal circular index range covering all `marks` on a ring of `n` samples.
fn covering_arc(marks: &[usize], n: usize) -> Vec<bool> {
    let mut m = marks.to_vec();
    m.sort_unstable();
    m.dedup();
    if m.is_empty() {
        return vec![true; n];
    }
    if m.len() == 1 {
        return (0..n).map(|i| i == m[0]).collect();
    }
    // Drop the largest gap between consecutive marks; the rest is the arc.
    let mut widest = (0usize, 0usize);
    for k in 0..m.len() {
        let a = m[k];
        let b = m[(k + 1) % m.len()];
        let len = (b + n - a) % n;
        if len > widest.1 {
            widest = (a, len);
        }
    }
    let (a, len) = widest;
    (0..n).map(|i| !((1..len).contains(&((i + n - a) % n)))).collect()
}

/// One-sided Hausdorff distance and coverage of an estimate against the true cavity.
///
/// Only estimate vertices whose nearest boundary point lies on the probed arc are
/// scored. The probed arc is the shortest stretch of the boundary containing the
/// point of `∂D` closest to every probe in `probes`; with no probes the whole
/// boundary counts.
pub fn evaluate(estimate: &BoundaryEstimate, truth: &CavityShape, probes: &[Point], band: f64) -> Result<Metrics> {
    let ring = polygonize_cavity(truth, ARC_SAMPLES)?.vertices;
    let n = ring.len();
    let nearest = |x: Point| -> usize {
        let mut best = (f64::INFINITY, 0usize);
        for (i, &q) in ring.iter().enumerate() {
            let d = dist(x, q);
            if d < best.0 {
                best = (d, i);
            }
        }
        best.1
    };
    let marks: Vec<usize> = probes.iter().map(|&p| nearest(p)).collect();
    let arc = covering_arc(&marks, n);
    let seg_len = |i: usize| 0.5 * (dist(ring[i], ring[(i + n - 1) % n]) + dist(ring[i], ring[(i + 1) % n]));
    let total: f64 = (0..n).map(seg_len).sum();
    let probed: f64 = (0..n).filter(|&i| arc[i]).map(seg_len).sum();

    let mut hausdorff = 0.0f64;
    let mut used = 0;
    for v in estimate.vertices() {
        if arc[nearest(v)] {
            hausdorff = hausdorff.max(truth.boundary_distance(v));
            used += 1;
        }
    }
    let covered: f64 = (0..n).filter(|&i| estimate.distance_to(ring[i]) <= band).map(seg_len).sum();
    Ok(Metrics {
        hausdorff_one_sided: hausdorff,
        coverage: covered / total,
        band,
        n_vertices_used: used,
        probed_fraction: probed / total,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn arc_covers_marks_by_shortest_route() {
        let arc = covering_arc(&[2, 5], 10);
        assert_eq!(arc.iter().filter(|&&v| v).count(), 4);
        assert!(arc[2] && arc[3] && arc[5] && !arc[6]);
        let wrap = covering_arc(&[9, 1], 10);
        assert!(wrap[9] && wrap[0] && wrap[1] && !wrap[2] && !wrap[8]);
        assert!(covering_arc(&[], 4).iter().all(|&v| v));
        assert_eq!(covering_arc(&[3], 8).iter().filter(|&&v| v).count(), 1);
    }
}

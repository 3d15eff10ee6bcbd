//! Probe sweeps, carving of the region proven free of the cavity, contour
//! extraction and comparison with the true cavity.

mod contour;
mod metrics;

use std::io::Write;

use serde::{Deserialize, Serialize};

pub use contour::{extract_boundary, BoundaryEstimate, Polyline};
pub use metrics::{evaluate, Metrics};

use crate::error::{Error, Result};
use crate::geometry::{dist, Point, SlabGeometry};
use crate::indicator::{estimate_distance, BisectionOptions, BisectionStep, IndicatorOptions, Probe};
use crate::par;
use crate::probe::HGrid;
use crate::Scene;

/// Probe points outside the closed slab.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeSet {
    pub probes: Vec<Probe>,
}

impl ProbeSet {
    pub fn explicit(points: &[Point]) -> Self {
        Self { probes: points.iter().enumerate().map(|(i, &p)| Probe::new(i, p)).collect() }
    }

    /// `count` equally spaced points from `start` to `end` inclusive.
    pub fn line(start: Point, end: Point, count: usize) -> Result<Self> {
        if count == 0 {
            return Err(Error::Invalid("probe line needs at least one point".into()));
        }
        let pts: Vec<Point> = (0..count)
            .map(|k| {
                let s = if count == 1 { 0.5 } else { k as f64 / (count - 1) as f64 };
                [start[0] + s * (end[0] - start[0]), start[1] + s * (end[1] - start[1])]
            })
            .collect();
        Ok(Self::explicit(&pts))
    }

    pub fn validate(&self, slab: &SlabGeometry) -> Result<()> {
        let errors: Vec<String> = self
            .probes
            .iter()
            .enumerate()
            .filter(|(_, pr)| !(slab.strip_distance(pr.p) > 0.0))
            .map(|(i, pr)| format!("probe {i} at {:?} lies in the closed slab strip", pr.p))
            .collect();
        if errors.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(errors))
        }
    }

    pub fn points(&self) -> Vec<Point> {
        self.probes.iter().map(|p| p.p).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ProbeStatus {
    Ok,
    NotDetected,
}

impl ProbeStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            ProbeStatus::Ok => "OK",
            ProbeStatus::NotDetected => "NOT_DETECTED",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DistanceRecord {
    pub probe: Probe,
    pub status: ProbeStatus,
    pub d_hat: Option<f64>,
    pub n_bisections: usize,
    pub trace: Vec<BisectionStep>,
    /// Reason for a NOT_DETECTED status.
    pub note: Option<String>,
    /// Largest probe magnitude seen on the lateral faces over all series.
    pub max_leak: f64,
    /// Probe evaluations clamped by the overflow guard.
    pub clamped: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DistanceMap {
    pub records: Vec<DistanceRecord>,
}

impl DistanceMap {
    pub fn ok(&self) -> impl Iterator<Item = (&Probe, f64)> {
        self.records.iter().filter_map(|r| r.d_hat.map(|d| (&r.probe, d)))
    }

    pub fn n_ok(&self) -> usize {
        self.ok().count()
    }

    /// Writes `probe_id,p_x,p_y,status,d_hat,n_bisections`, ordered by probe id.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "probe_id,p_x,p_y,status,d_hat,n_bisections")?;
        let mut recs: Vec<&DistanceRecord> = self.records.iter().collect();
        recs.sort_by_key(|r| r.probe.id);
        for r in recs {
            let d = r.d_hat.map_or(String::new(), |d| format!("{d:.16e}"));
            writeln!(
                w,
                "{},{:.16e},{:.16e},{},{},{}",
                r.probe.id,
                r.probe.p[0],
                r.probe.p[1],
                r.status.as_str(),
                d,
                r.n_bisections
            )?;
        }
        Ok(())
    }
}

impl DistanceMap {
    /// Writes `probe_id,step,t,slope,r2,class,outside` for every bisection step.
    pub fn write_trace_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "probe_id,step,t,slope,r2,class,outside")?;
        let mut recs: Vec<&DistanceRecord> = self.records.iter().collect();
        recs.sort_by_key(|r| r.probe.id);
        for r in recs {
            for (k, s) in r.trace.iter().enumerate() {
                let slope = s.slope.map_or(String::new(), |v| format!("{v:.16e}"));
                writeln!(w, "{},{k},{:.16e},{slope},{:.16e},{},{}", r.probe.id, s.t, s.r2, s.class, s.outside)?;
            }
        }
        Ok(())
    }
}

/// Runs the distance bisection for every probe. Failures become NOT_DETECTED records.
pub fn sweep(
    scene: &Scene,
    probes: &ProbeSet,
    grid: &HGrid,
    bis: &BisectionOptions,
    opts: &IndicatorOptions,
) -> DistanceMap {
    let records = par::map(&probes.probes, |probe| match estimate_distance(scene, probe, grid, bis, opts) {
        Ok(est) => {
            let entries = || est.series.iter().flat_map(|s| s.entries.iter());
            DistanceRecord {
                probe: *probe,
                status: ProbeStatus::Ok,
                d_hat: Some(est.d_hat),
                n_bisections: est.n_bisections,
                max_leak: entries().map(|e| e.lateral_leak).fold(0.0, f64::max),
                clamped: entries().map(|e| e.clamped).sum(),
                trace: est.trace,
                note: None,
            }
        }
        Err(e) => DistanceRecord {
            probe: *probe,
            status: ProbeStatus::NotDetected,
            d_hat: None,
            n_bisections: 0,
            trace: Vec::new(),
            note: Some(e.to_string()),
            max_leak: 0.0,
            clamped: 0,
        },
    });
    DistanceMap { records }
}

/// Uniform cell grid over the truncated slab; `carved[j * nx + i]` is cell `(i, j)`,
/// with `i` along `x` and `j` along `y`, both increasing.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegionMask {
    pub origin: Point,
    pub spacing: [f64; 2],
    pub shape: (usize, usize),
    pub carved: Vec<bool>,
}

impl RegionMask {
    pub fn empty(slab: &SlabGeometry, cell: f64) -> Result<Self> {
        if !(cell > 0.0) {
            return Err(Error::Invalid(format!("mask cell size must be positive, got {cell}")));
        }
        let w = 2.0 * slab.halfwidth;
        let hgt = slab.thickness();
        let nx = (w / cell).ceil().max(1.0) as usize;
        let ny = (hgt / cell).ceil().max(1.0) as usize;
        Ok(Self {
            origin: [-slab.halfwidth, slab.d1],
            spacing: [w / nx as f64, hgt / ny as f64],
            shape: (nx, ny),
            carved: vec![false; nx * ny],
        })
    }

    pub fn cell_center(&self, i: usize, j: usize) -> Point {
        [
            self.origin[0] + (i as f64 + 0.5) * self.spacing[0],
            self.origin[1] + (j as f64 + 0.5) * self.spacing[1],
        ]
    }

    pub fn is_carved(&self, i: usize, j: usize) -> bool {
        self.carved[j * self.shape.0 + i]
    }

    pub fn n_carved(&self) -> usize {
        self.carved.iter().filter(|&&c| c).count()
    }

    pub fn cell_area(&self) -> f64 {
        self.spacing[0] * self.spacing[1]
    }

    pub fn carved_area(&self) -> f64 {
        self.n_carved() as f64 * self.cell_area()
    }

    /// Marks every cell whose centre lies strictly inside `B_r(p)`.
    pub fn carve_ball(&mut self, p: Point, r: f64) {
        if !(r > 0.0) {
            return;
        }
        let (nx, ny) = self.shape;
        for j in 0..ny {
            for i in 0..nx {
                if dist(self.cell_center(i, j), p) < r {
                    self.carved[j * nx + i] = true;
                }
            }
        }
    }

    /// Cell centres of carved cells.
    pub fn carved_centers(&self) -> impl Iterator<Item = Point> + '_ {
        let (nx, ny) = self.shape;
        (0..ny).flat_map(move |j| (0..nx).filter(move |&i| self.is_carved(i, j)).map(move |i| self.cell_center(i, j)))
    }

    /// Rows of `C`/`P`, top row (largest `y`) first.
    pub fn write_ascii<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let (nx, ny) = self.shape;
        for j in (0..ny).rev() {
            let row: String = (0..nx).map(|i| if self.is_carved(i, j) { 'C' } else { 'P' }).collect();
            writeln!(w, "{row}")?;
        }
        Ok(())
    }

    pub fn header_json(&self) -> serde_json::Value {
        serde_json::json!({
            "origin": self.origin,
            "spacing": self.spacing,
            "shape": [self.shape.0, self.shape.1],
            "row_order": "top_first",
        })
    }
}

/// Union of the balls `B(p, d̂₀(p) - margin)` over detected probes.
pub fn carve(slab: &SlabGeometry, map: &DistanceMap, cell: f64, margin: f64) -> Result<RegionMask> {
    if map.n_ok() == 0 {
        return Err(Error::NothingToCarve);
    }
    let mut mask = RegionMask::empty(slab, cell)?;
    for (probe, d) in map.ok() {
        mask.carve_ball(probe.p, d - margin);
    }
    Ok(mask)
}

//! Run configuration: a single TOML file with a strict schema.
//!
//! | key | default |
//! |---|---|
//! | `workers` | 0 (all cores) |
//! | `seed` | 0 (mesh jitter only) |
//! | `out_dir` | `"out"` |
//! | `slab.halfwidth` | `"auto"`: `max|p_x| + t_hi (1 + delta_fraction) + 2 (d2 - d1)` |
//! | `gamma` | `γ ≡ 1`, `support_radius = 1` |
//! | `cavity` | none |
//! | `probes.axis` | `[1, 0]` |
//! | `h_grid` | `delta_s = 0.5`, `k_min = 2`, `k_max = 9`, `strict = true` |
//! | `cutoff.delta_fraction` | 0.1 |
//! | `sweep` | `t_lo = 0.3`, `t_hi = 0.9`, `tol = 0.005`, `max_widen = 4`, `mode = "localized"`, `cell_size = 0.01` |
//! | `sweep.margin` | `tol + 2 · mesh.target_edge` |
//! | `sweep.band` | `3 · mesh.target_edge` |
//! | `mesh` | `target_edge = 0.05`, `min_angle_deg = 20`, `cavity_segments = 128`, `grading = 0.01`, `min_edge = 0.001`, `jitter = 0` |
//! | `thresholds` | `tau = 0.10`, `floor_factor = 1e3`, `overflow_cap = 700`, `leak_warning = 1e-6` |

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::geometry::{CavityShape, MeshOptions, Point, SlabGeometry};
use crate::indicator::{BisectionOptions, IndicatorOptions, Probe};
use crate::probe::{Bump, DataMode, GammaField, HGrid, DEFAULT_OVERFLOW_CAP};
use crate::reconstruct::ProbeSet;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Auto {
    Auto,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Halfwidth {
    Value(f64),
    Auto(Auto),
}

impl Default for Halfwidth {
    fn default() -> Self {
        Halfwidth::Auto(Auto::Auto)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SlabSpec {
    pub d1: f64,
    pub d2: f64,
    #[serde(default)]
    pub halfwidth: Halfwidth,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GammaSpec {
    pub bumps: Vec<Bump>,
    pub support_radius: f64,
}

impl Default for GammaSpec {
    fn default() -> Self {
        Self { bumps: Vec::new(), support_radius: 1.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeLine {
    pub start: Point,
    pub end: Point,
    pub count: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbesSpec {
    #[serde(default)]
    pub points: Vec<Point>,
    #[serde(default)]
    pub line: Option<ProbeLine>,
    #[serde(default = "default_axis")]
    pub axis: Point,
}

fn default_axis() -> Point {
    [1.0, 0.0]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HGridSpec {
    pub delta_s: f64,
    pub k_min: u32,
    pub k_max: u32,
    /// Reject off-grid `h` passed on the command line.
    pub strict: bool,
}

impl Default for HGridSpec {
    fn default() -> Self {
        Self { delta_s: 0.5, k_min: 2, k_max: 9, strict: true }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CutoffSpec {
    pub delta_fraction: f64,
}

impl Default for CutoffSpec {
    fn default() -> Self {
        Self { delta_fraction: 0.1 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSpec {
    pub t_lo: f64,
    pub t_hi: f64,
    pub tol: f64,
    pub max_widen: usize,
    pub mode: DataMode,
    pub cell_size: f64,
    pub margin: Option<f64>,
    pub band: Option<f64>,
}

impl Default for SweepSpec {
    fn default() -> Self {
        let b = BisectionOptions::default();
        Self {
            t_lo: b.t_lo,
            t_hi: b.t_hi,
            tol: b.tol,
            max_widen: b.max_widen,
            mode: b.mode,
            cell_size: 0.01,
            margin: None,
            band: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MeshSpec {
    pub target_edge: f64,
    pub min_angle_deg: f64,
    pub cavity_segments: usize,
    pub grading: f64,
    pub min_edge: f64,
    pub max_vertices: usize,
    pub jitter: f64,
}

impl Default for MeshSpec {
    fn default() -> Self {
        let m = MeshOptions::default();
        Self {
            target_edge: m.target_edge,
            min_angle_deg: m.min_angle_deg,
            cavity_segments: m.cavity_segments,
            grading: m.grading,
            min_edge: m.min_edge,
            max_vertices: m.max_vertices,
            jitter: m.jitter,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Thresholds {
    pub tau: f64,
    pub floor_factor: f64,
    pub overflow_cap: f64,
    /// Largest tolerated probe magnitude on the lateral faces before a warning.
    pub leak_warning: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self { tau: 0.10, floor_factor: 1e3, overflow_cap: DEFAULT_OVERFLOW_CAP, leak_warning: 1e-6 }
    }
}

fn default_out_dir() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub workers: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_out_dir")]
    pub out_dir: PathBuf,
    pub slab: SlabSpec,
    #[serde(default)]
    pub gamma: GammaSpec,
    #[serde(default)]
    pub cavity: Option<CavityShape>,
    pub probes: ProbesSpec,
    #[serde(default)]
    pub h_grid: HGridSpec,
    #[serde(default)]
    pub cutoff: CutoffSpec,
    #[serde(default)]
    pub sweep: SweepSpec,
    #[serde(default)]
    pub mesh: MeshSpec,
    #[serde(default)]
    pub thresholds: Thresholds,
}

/// A validated configuration turned into library objects.
#[derive(Clone, Debug)]
pub struct Resolved {
    pub slab: SlabGeometry,
    pub cavity: Option<CavityShape>,
    pub gamma: GammaField,
    pub probes: ProbeSet,
    pub grid: HGrid,
    pub bisection: BisectionOptions,
    pub indicator: IndicatorOptions,
    pub mesh: MeshOptions,
    pub cell_size: f64,
    pub margin: f64,
    pub band: f64,
}

pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)?;
    parse_config(&text)
}

pub fn parse_config(text: &str) -> Result<RunConfig> {
    let cfg: RunConfig = toml::from_str(text)?;
    cfg.validate()?;
    Ok(cfg)
}

impl RunConfig {
    /// Probe points before validation, from the explicit list or the line generator.
    fn probe_points(&self) -> Vec<Point> {
        match &self.probes.line {
            Some(l) => ProbeSet::line(l.start, l.end, l.count).map(|s| s.points()).unwrap_or_default(),
            None => self.probes.points.clone(),
        }
    }

    fn halfwidth(&self) -> f64 {
        match self.slab.halfwidth {
            Halfwidth::Value(w) => w,
            Halfwidth::Auto(_) => {
                let t = self.sweep.t_hi;
                SlabGeometry::auto_halfwidth(
                    self.slab.d1,
                    self.slab.d2,
                    &self.probe_points(),
                    t,
                    self.cutoff.delta_fraction * t,
                )
            }
        }
    }

    /// Checks every field and cross-field constraint, reporting all failures together.
    pub fn validate(&self) -> Result<()> {
        let mut errs: Vec<String> = Vec::new();
        let mut need = |ok: bool, msg: String| {
            if !ok {
                errs.push(msg);
            }
        };
        let (d1, d2) = (self.slab.d1, self.slab.d2);
        let slab_ok = d1.is_finite() && d2.is_finite() && d1 < d2;
        need(slab_ok, format!("slab: d1 < d2 required (d1 = {d1}, d2 = {d2})"));
        if let Halfwidth::Value(w) = self.slab.halfwidth {
            need(w.is_finite() && w > 0.0, format!("slab.halfwidth must be positive (got {w})"));
        }
        let w = self.halfwidth();

        let g = &self.gamma;
        need(g.support_radius > 0.0, format!("gamma.support_radius must be positive (got {})", g.support_radius));
        if let Err(e) = GammaField::with_bumps(g.bumps.clone(), g.support_radius).validate() {
            need(false, format!("gamma: {e}"));
        }

        if let Some(c) = &self.cavity {
            match c.validate() {
                Err(e) => need(false, format!("cavity: {e}")),
                Ok(()) if slab_ok => {
                    let (lo, hi) = c.bbox();
                    need(
                        lo[1] > d1 && hi[1] < d2 && lo[0] > -w && hi[0] < w,
                        format!("cavity: bounding box {lo:?}..{hi:?} is not strictly inside the slab"),
                    );
                }
                Ok(()) => {}
            }
        }

        let p = &self.probes;
        need(
            !(p.line.is_some() && !p.points.is_empty()),
            "probes: give either points or line, not both".into(),
        );
        if let Some(l) = &p.line {
            need(l.count > 0, "probes.line.count must be at least 1".into());
        }
        let pts = self.probe_points();
        need(!pts.is_empty(), "probes: at least one probe point is required".into());
        let axis_norm = p.axis[0].hypot(p.axis[1]);
        need(axis_norm > 0.0 && axis_norm.is_finite(), "probes.axis must be a nonzero vector".into());
        if slab_ok {
            for (i, q) in pts.iter().enumerate() {
                need(
                    q[1] > d2 || q[1] < d1,
                    format!("probe {i} at {q:?} lies inside the closed slab strip {d1} <= y <= {d2}"),
                );
            }
        }

        let h = &self.h_grid;
        need(h.delta_s > 0.0, format!("h_grid.delta_s must be positive (got {})", h.delta_s));
        need(h.k_min <= h.k_max, format!("h_grid: k_min {} exceeds k_max {}", h.k_min, h.k_max));
        need(
            h.k_max - h.k_min.min(h.k_max) >= 2,
            "h_grid: at least three grid points are needed for slope fits".into(),
        );

        let df = self.cutoff.delta_fraction;
        need(df > 0.0 && df <= 1.0, format!("cutoff.delta_fraction must lie in (0, 1] (got {df})"));

        let s = &self.sweep;
        need(s.t_lo > 0.0, format!("sweep.t_lo must be positive (got {})", s.t_lo));
        need(s.t_hi > s.t_lo, format!("sweep: t_hi {} must exceed t_lo {}", s.t_hi, s.t_lo));
        need(s.tol > 0.0, format!("sweep.tol must be positive (got {})", s.tol));
        need(s.cell_size > 0.0, format!("sweep.cell_size must be positive (got {})", s.cell_size));
        if let Some(m) = s.margin {
            need(m >= 0.0, format!("sweep.margin must be nonnegative (got {m})"));
        }
        if let Some(b) = s.band {
            need(b > 0.0, format!("sweep.band must be positive (got {b})"));
        }
        if s.mode == DataMode::Localized {
            for (i, q) in pts.iter().enumerate() {
                let reach = q[0].abs() + s.t_lo * (1.0 + df);
                need(
                    reach < w,
                    format!("probe {i}: localized ball at t_lo reaches the lateral faces (increase slab.halfwidth)"),
                );
            }
        }

        let m = &self.mesh;
        need(m.target_edge > 0.0, format!("mesh.target_edge must be positive (got {})", m.target_edge));
        need(
            m.min_angle_deg > 0.0 && m.min_angle_deg <= 33.0,
            format!("mesh.min_angle_deg must lie in (0, 33] (got {})", m.min_angle_deg),
        );
        need(m.cavity_segments >= 3, format!("mesh.cavity_segments must be at least 3 (got {})", m.cavity_segments));
        need(m.grading >= 0.0, format!("mesh.grading must be nonnegative (got {})", m.grading));
        need(
            m.min_edge > 0.0 && m.min_edge <= m.target_edge,
            format!("mesh.min_edge must lie in (0, target_edge] (got {})", m.min_edge),
        );
        need((0.0..0.5).contains(&m.jitter), format!("mesh.jitter must lie in [0, 0.5) (got {})", m.jitter));

        let t = &self.thresholds;
        need(t.tau > 0.0, format!("thresholds.tau must be positive (got {})", t.tau));
        need(t.floor_factor >= 1.0, format!("thresholds.floor_factor must be at least 1 (got {})", t.floor_factor));
        need(t.overflow_cap > 0.0, format!("thresholds.overflow_cap must be positive (got {})", t.overflow_cap));
        need(t.leak_warning > 0.0, format!("thresholds.leak_warning must be positive (got {})", t.leak_warning));

        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(errs))
        }
    }

    pub fn resolve(&self) -> Result<Resolved> {
        self.validate()?;
        let slab = SlabGeometry::new(self.slab.d1, self.slab.d2, self.halfwidth())?;
        let gamma = GammaField::with_bumps(self.gamma.bumps.clone(), self.gamma.support_radius);
        let mut probes = ProbeSet::explicit(&self.probe_points());
        let norm = self.probes.axis[0].hypot(self.probes.axis[1]);
        for pr in &mut probes.probes {
            pr.axis = [self.probes.axis[0] / norm, self.probes.axis[1] / norm];
        }
        probes.validate(&slab)?;
        let grid = HGrid::range(2, self.h_grid.delta_s, self.h_grid.k_min, self.h_grid.k_max)?;
        let s = &self.sweep;
        let bisection = BisectionOptions { t_lo: s.t_lo, t_hi: s.t_hi, tol: s.tol, max_widen: s.max_widen, mode: s.mode };
        let indicator = IndicatorOptions {
            tau: self.thresholds.tau,
            floor_factor: self.thresholds.floor_factor,
            delta_fraction: self.cutoff.delta_fraction,
            overflow_cap: self.thresholds.overflow_cap,
        };
        let m = &self.mesh;
        let mesh = MeshOptions {
            target_edge: m.target_edge,
            min_angle_deg: m.min_angle_deg,
            cavity_segments: m.cavity_segments,
            grading: m.grading,
            min_edge: m.min_edge,
            grading_centers: probes.points(),
            max_vertices: m.max_vertices,
            jitter: m.jitter,
            seed: self.seed,
        };
        Ok(Resolved {
            slab,
            cavity: self.cavity.clone(),
            gamma,
            probes,
            grid,
            bisection,
            indicator,
            mesh,
            cell_size: s.cell_size,
            margin: s.margin.unwrap_or(s.tol + 2.0 * m.target_edge),
            band: s.band.unwrap_or(3.0 * m.target_edge),
        })
    }

    /// SHA-256 of the canonical JSON form of the configuration (defaults filled in).
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("configuration serializes");
        Sha256::digest(&json).iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Probe by index, checked against the configured list.
    pub fn probe(&self, resolved: &Resolved, index: usize) -> Result<Probe> {
        resolved.probes.probes.get(index).copied().ok_or_else(|| {
            Error::Config(vec![format!(
                "probe index {index} out of range ({} probes configured)",
                resolved.probes.probes.len()
            )])
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
[slab]
d1 = 0.0
d2 = 1.0

[cavity]
kind = "disc"
center = [0.0, 0.5]
radius = 0.2

[probes]
points = [[0.0, 1.2]]
"#;

    #[test]
    fn minimal_config_fills_defaults() {
        let cfg = parse_config(MINIMAL).unwrap();
        assert_eq!(cfg.h_grid.delta_s, 0.5);
        assert_eq!(cfg.thresholds.tau, 0.10);
        assert_eq!(cfg.mesh.cavity_segments, 128);
        let r = cfg.resolve().unwrap();
        assert!((r.slab.halfwidth - (0.9 + 0.09 + 2.0)).abs() < 1e-12);
        assert!((r.margin - 0.105).abs() < 1e-12);
        assert_eq!(r.grid.inv_h(), vec![5.0, 6.0, 7.0, 8.0, 9.0, 10.0, 11.0, 12.0]);
        assert_eq!(cfg.hash(), parse_config(MINIMAL).unwrap().hash());
    }

    #[test]
    fn unknown_keys_rejected() {
        let text = MINIMAL.replace("[probes]", "[probes]\ncolour = 3");
        assert!(matches!(parse_config(&text), Err(Error::Toml(_))));
    }

    #[test]
    fn probe_inside_slab_is_named() {
        let text = MINIMAL.replace("[[0.0, 1.2]]", "[[0.0, 1.2], [0.3, 0.5]]");
        match parse_config(&text) {
            Err(Error::Config(errs)) => assert!(errs.iter().any(|e| e.starts_with("probe 1"))),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn errors_are_collected() {
        let text = MINIMAL.replace("d1 = 0.0", "d1 = 2.0").replace("[probes]", "[thresholds]\ntau = -1\n\n[probes]");
        match parse_config(&text) {
            Err(Error::Config(errs)) => {
                assert!(errs.iter().any(|e| e.contains("d1 < d2")));
                assert!(errs.iter().any(|e| e.contains("tau")));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn explicit_halfwidth_and_line() {
        let text = MINIMAL
            .replace("d2 = 1.0", "d2 = 1.0\nhalfwidth = 2.5")
            .replace("points = [[0.0, 1.2]]", "line = { start = [-0.4, 1.2], end = [0.4, 1.2], count = 9 }");
        let r = parse_config(&text).unwrap().resolve().unwrap();
        assert_eq!(r.slab.halfwidth, 2.5);
        assert_eq!(r.probes.probes.len(), 9);
        assert_eq!(r.mesh.grading_centers.len(), 9);
    }
}

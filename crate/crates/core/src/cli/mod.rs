//! Configuration, run orchestration and result files.

mod config;
mod validate;

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;

pub use config::{
    load_config, parse_config, Auto, CutoffSpec, GammaSpec, HGridSpec, Halfwidth, MeshSpec, ProbeLine, ProbesSpec,
    Resolved, RunConfig, SlabSpec, SweepSpec, Thresholds,
};
pub use validate::{run_checks, slab_samples, Check};

use crate::error::{Error, Result};
use crate::geometry::MeshStats;
use crate::indicator::{classify_series, compute_series, IndicatorSeries};
use crate::probe::boundary_data;
use crate::reconstruct::{carve, evaluate, extract_boundary, sweep, DistanceMap, Metrics};
use crate::solver::FactorCache;
use crate::Scene;

/// Exit code for configuration and argument errors.
pub const EXIT_VALIDATION: i32 = 1;
/// Exit code for failures after validation.
pub const EXIT_RUNTIME: i32 = 2;

impl Error {
    /// Process exit code for this error.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Toml(_) => EXIT_VALIDATION,
            _ => EXIT_RUNTIME,
        }
    }
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct StageTiming {
    pub stage: String,
    pub seconds: f64,
}

/// Summary written once per run as `manifest.json`.
#[derive(Clone, Debug, Default, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub run_id: String,
    pub config_hash: String,
    pub mesh_full: Option<MeshStats>,
    pub mesh_holed: Option<MeshStats>,
    pub timings: Vec<StageTiming>,
    pub warnings: Vec<String>,
    pub artifacts: Vec<String>,
}

/// Collects artifacts and timings while a command runs.
struct Run {
    out: PathBuf,
    manifest: RunManifest,
    clock: Instant,
}

impl Run {
    fn start(command: &str, cfg: &RunConfig, out: &Path) -> Result<Self> {
        fs::create_dir_all(out)?;
        let hash = cfg.hash();
        Ok(Self {
            out: out.to_path_buf(),
            manifest: RunManifest {
                command: command.to_string(),
                run_id: hash[..16].to_string(),
                config_hash: hash,
                ..RunManifest::default()
            },
            clock: Instant::now(),
        })
    }

    fn lap(&mut self, stage: &str) {
        let seconds = self.clock.elapsed().as_secs_f64();
        self.manifest.timings.push(StageTiming { stage: stage.to_string(), seconds });
        self.clock = Instant::now();
    }

    fn file(&mut self, name: &str, body: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>) -> Result<PathBuf> {
        let path = self.out.join(name);
        let mut w = BufWriter::new(File::create(&path)?);
        body(&mut w)?;
        w.flush()?;
        self.manifest.artifacts.push(name.to_string());
        Ok(path)
    }

    fn scene(&mut self, r: &Resolved) -> Result<Scene> {
        let scene = Scene::build_cached(r.slab, r.cavity.clone(), r.gamma.clone(), &r.mesh, &FactorCache::new())?;
        self.manifest.mesh_full = Some(scene.pair.full.stats());
        self.manifest.mesh_holed = Some(scene.pair.holed.stats());
        self.lap("mesh+factor");
        Ok(scene)
    }

    fn warn_series(&mut self, s: &IndicatorSeries, leak_limit: f64) {
        let clamped: usize = s.entries.iter().map(|e| e.clamped).sum();
        if clamped > 0 {
            self.manifest.warnings.push(format!("t = {}: {clamped} probe values clamped by the overflow guard", s.t));
        }
        let leak = s.entries.iter().map(|e| e.lateral_leak).fold(0.0, f64::max);
        if leak > leak_limit {
            self.manifest.warnings.push(format!("t = {}: lateral leak {leak:.3e} above {leak_limit:.1e}", s.t));
        }
    }

    fn finish(mut self) -> Result<RunManifest> {
        self.manifest.artifacts.push("manifest.json".into());
        self.manifest.artifacts.sort();
        let json = serde_json::to_string_pretty(&self.manifest)?;
        fs::write(self.out.join("manifest.json"), json + "\n")?;
        Ok(self.manifest)
    }
}

fn series_csv(w: &mut impl Write, s: &IndicatorSeries) -> std::io::Result<()> {
    writeln!(w, "probe_id,t,mode,h,inv_h,E,e_full,identity_residual,lateral_leak,clamped")?;
    let mode = serde_json::to_value(s.mode).ok().and_then(|v| v.as_str().map(str::to_owned)).unwrap_or_default();
    for e in &s.entries {
        writeln!(
            w,
            "{},{:.16e},{mode},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{}",
            s.probe.id, s.t, e.h, e.inv_h, e.e, e.e_full, e.identity_residual, e.lateral_leak, e.clamped
        )?;
    }
    Ok(())
}

fn check_t(t: f64) -> Result<()> {
    if t.is_finite() && t > 0.0 {
        Ok(())
    } else {
        Err(Error::Config(vec![format!("--t must be positive (got {t})")]))
    }
}

/// Solves the two forward problems for one `(p, t, h)` and writes both fields and the energy gap.
pub fn cmd_forward(cfg: &RunConfig, probe: usize, t: f64, h: Option<f64>, out: &Path) -> Result<RunManifest> {
    let r = cfg.resolve()?;
    let pr = cfg.probe(&r, probe)?;
    check_t(t)?;
    let h = h.unwrap_or(r.grid.h_values()[0]);
    if !(h > 0.0) || (cfg.h_grid.strict && !r.grid.is_admissible(h)) {
        return Err(Error::Config(vec![format!("--h {h} is not on the admissible grid (h_grid.strict = true)")]));
    }
    let mut run = Run::start("forward", cfg, out)?;
    let scene = run.scene(&r)?;
    let params = pr.params(t, h, &r.indicator);
    params.validate(&scene.slab)?;
    let data = boundary_data(&scene.pair.full, &params, &scene.gamma, r.bisection.mode)?;
    let (gap, v0, u) = scene.system.energy_gap_fields(&data)?;
    run.lap("solve");
    v0.write_csv(&scene.pair.full, &run.out.join("field_full.csv"))?;
    run.manifest.artifacts.push("field_full.csv".into());
    u.write_csv(&scene.pair.holed, &run.out.join("field_holed.csv"))?;
    run.manifest.artifacts.push("field_holed.csv".into());
    run.file("energy.csv", |w| {
        writeln!(w, "probe_id,t,h,E,e_full,e_holed,term_d,term_diff,identity_residual")?;
        writeln!(
            w,
            "{probe},{t:.16e},{h:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
            gap.e, gap.e_full, gap.e_holed, gap.term_d, gap.term_diff, gap.identity_residual
        )
    })?;
    if data.clamped > 0 {
        run.manifest.warnings.push(format!("{} probe values clamped by the overflow guard", data.clamped));
    }
    run.finish()
}

/// Computes the indicator series at one `(p, t)` and its slope fit and classification.
pub fn cmd_indicator(cfg: &RunConfig, probe: usize, t: f64, out: &Path) -> Result<RunManifest> {
    let r = cfg.resolve()?;
    let pr = cfg.probe(&r, probe)?;
    check_t(t)?;
    let mut run = Run::start("indicator", cfg, out)?;
    let scene = run.scene(&r)?;
    let series = compute_series(&scene, &pr, t, &r.grid, r.bisection.mode, &r.indicator)?;
    let (fit, class) = classify_series(&series, &r.indicator);
    run.lap("series");
    run.warn_series(&series, cfg.thresholds.leak_warning);
    run.file("indicator.csv", |w| series_csv(w, &series))?;
    run.file("slope.csv", |w| {
        writeln!(w, "probe_id,t,slope,intercept,r2,n_points,class,confidence")?;
        let cell = |v: Option<f64>| v.map_or(String::new(), |v| format!("{v:.16e}"));
        writeln!(
            w,
            "{},{t:.16e},{},{},{},{},{},{:.16e}",
            pr.id,
            cell(fit.map(|f| f.slope)),
            cell(fit.map(|f| f.intercept)),
            cell(fit.map(|f| f.r2)),
            fit.map_or(0, |f| f.n_points),
            class.class,
            class.confidence
        )
    })?;
    println!("probe {} t = {t}: {} (r2 = {:.4})", pr.id, class.class, class.confidence);
    run.finish()
}

/// Result of a sweep, also written to disk.
#[derive(Clone, Debug)]
pub struct SweepReport {
    pub distances: DistanceMap,
    pub metrics: Option<Metrics>,
    pub carved_area: Option<f64>,
    pub manifest: RunManifest,
}

/// Sweeps every probe, carves the envelope and extracts its boundary.
pub fn cmd_sweep(cfg: &RunConfig, out: &Path) -> Result<SweepReport> {
    let r = cfg.resolve()?;
    let mut run = Run::start("sweep", cfg, out)?;
    let scene = run.scene(&r)?;
    let map = sweep(&scene, &r.probes, &r.grid, &r.bisection, &r.indicator);
    run.lap("sweep");
    run.file("distances.csv", |w| map.write_csv(w))?;
    run.file("trace.csv", |w| map.write_trace_csv(w))?;
    for rec in &map.records {
        if rec.clamped > 0 {
            run.manifest.warnings.push(format!("probe {}: {} values clamped", rec.probe.id, rec.clamped));
        }
        if rec.max_leak > cfg.thresholds.leak_warning {
            run.manifest.warnings.push(format!("probe {}: lateral leak {:.3e}", rec.probe.id, rec.max_leak));
        }
    }
    let mask = match carve(&scene.slab, &map, r.cell_size, r.margin) {
        Ok(mask) => mask,
        Err(Error::NothingToCarve) => {
            println!("no cavity detected: all {} probes NOT_DETECTED", map.records.len());
            run.manifest.warnings.push("no cavity detected".into());
            let manifest = run.finish()?;
            return Ok(SweepReport { distances: map, metrics: None, carved_area: None, manifest });
        }
        Err(e) => return Err(e),
    };
    run.file("mask.txt", |w| mask.write_ascii(w))?;
    run.file("mask.json", |w| writeln!(w, "{}", serde_json::to_string_pretty(&mask.header_json())?))?;
    let carved_area = Some(mask.carved_area());
    let mut metrics = None;
    match extract_boundary(&mask) {
        Ok(boundary) => {
            run.file("boundary.csv", |w| boundary.write_csv(w))?;
            if let Some(truth) = &r.cavity {
                let m = evaluate(&boundary, truth, &r.probes.points(), r.band)?;
                run.file("metrics.json", |w| writeln!(w, "{}", serde_json::to_string_pretty(&m)?))?;
                metrics = Some(m);
            }
        }
        Err(e @ Error::DegenerateMask(_)) => run.manifest.warnings.push(e.to_string()),
        Err(e) => return Err(e),
    }
    run.lap("carve");
    println!("{} of {} probes detected the cavity", map.n_ok(), map.records.len());
    let manifest = run.finish()?;
    Ok(SweepReport { distances: map, metrics, carved_area, manifest })
}

/// Runs the self-checks and prints a pass/fail table.
pub fn cmd_validate(cfg: &RunConfig, out: &Path) -> Result<(Vec<Check>, RunManifest)> {
    let r = cfg.resolve()?;
    let mut run = Run::start("validate", cfg, out)?;
    let scene = run.scene(&r)?;
    let checks = run_checks(&r, &scene)?;
    run.lap("checks");
    for c in &checks {
        println!("{c}");
    }
    run.file("validate.csv", |w| {
        writeln!(w, "check,passed,detail")?;
        for c in &checks {
            writeln!(w, "{},{},\"{}\"", c.name, c.passed, c.detail.replace('"', "'"))?;
        }
        Ok(())
    })?;
    let manifest = run.finish()?;
    Ok((checks, manifest))
}

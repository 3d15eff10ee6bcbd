//! Indicator series `h ↦ E_{δ,t}(h)`, log-slope fits, front classification and
//! bisection for the distance from a probe point to the cavity.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Point;
use crate::par;
use crate::probe::{boundary_data, DataMode, HGrid, ProbeParams, DEFAULT_OVERFLOW_CAP};
use crate::Scene;

/// A probe point with its phase axis.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Probe {
    pub id: usize,
    pub p: Point,
    pub axis: Point,
}

impl Probe {
    pub fn new(id: usize, p: Point) -> Self {
        Self { id, p, axis: [1.0, 0.0] }
    }

    pub fn params(&self, t: f64, h: f64, opts: &IndicatorOptions) -> ProbeParams {
        ProbeParams {
            p: self.p,
            t,
            h,
            delta: opts.delta_fraction * t,
            axis: self.axis,
            overflow_cap: opts.overflow_cap,
        }
    }
}

/// Thresholds shared by series, fits and bisection.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IndicatorOptions {
    /// Slope threshold separating the three classes.
    pub tau: f64,
    /// Entries with `E < floor_factor · ε · e_full` are ignored by fits.
    pub floor_factor: f64,
    /// Cutoff width as a fraction of `t`.
    pub delta_fraction: f64,
    pub overflow_cap: f64,
}

impl Default for IndicatorOptions {
    fn default() -> Self {
        Self { tau: 0.10, floor_factor: 1e3, delta_fraction: 0.1, overflow_cap: DEFAULT_OVERFLOW_CAP }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IndicatorEntry {
    pub h: f64,
    pub inv_h: f64,
    pub e: f64,
    pub e_full: f64,
    pub identity_residual: f64,
    pub lateral_leak: f64,
    pub clamped: usize,
}

impl IndicatorEntry {
    pub fn usable(&self, floor_factor: f64) -> bool {
        self.e.is_finite() && self.e > floor_factor * f64::EPSILON * self.e_full
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IndicatorSeries {
    pub probe: Probe,
    pub t: f64,
    pub mode: DataMode,
    /// Sorted by increasing `1/h`.
    pub entries: Vec<IndicatorEntry>,
    /// Fewer than three entries rise above the positivity floor.
    pub dead: bool,
}

impl IndicatorSeries {
    pub fn usable(&self, floor_factor: f64) -> Vec<&IndicatorEntry> {
        self.entries.iter().filter(|e| e.usable(floor_factor)).collect()
    }
}

/// Energy gaps for every `h` of the grid at a fixed probe and front radius.
pub fn compute_series(
    scene: &Scene,
    probe: &Probe,
    t: f64,
    grid: &HGrid,
    mode: DataMode,
    opts: &IndicatorOptions,
) -> Result<IndicatorSeries> {
    let hs = grid.h_values();
    let entries: Vec<Result<IndicatorEntry>> = par::map(&hs, |&h| {
        let params = probe.params(t, h, opts);
        let data = boundary_data(&scene.pair.full, &params, &scene.gamma, mode)?;
        let r = scene.system.energy_gap(&data)?;
        Ok(IndicatorEntry {
            h,
            inv_h: 1.0 / h,
            e: r.e,
            e_full: r.e_full,
            identity_residual: r.identity_residual,
            lateral_leak: data.lateral_leak,
            clamped: data.clamped,
        })
    });
    let mut entries = entries.into_iter().collect::<Result<Vec<_>>>()?;
    entries.sort_by(|a, b| a.inv_h.total_cmp(&b.inv_h));
    let dead = entries.iter().filter(|e| e.usable(opts.floor_factor)).count() < 3;
    Ok(IndicatorSeries { probe: *probe, t, mode, entries, dead })
}

/// Least-squares line through `log E` against `1/h`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    pub n_points: usize,
}

/// Ordinary least squares `y ≈ intercept + slope · x`.
pub fn ols(xs: &[f64], ys: &[f64]) -> Result<SlopeFit> {
    let n = xs.len();
    if n < 3 || ys.len() != n {
        return Err(Error::InsufficientSignal { usable: n.min(ys.len()) });
    }
    let nf = n as f64;
    let mx = xs.iter().sum::<f64>() / nf;
    let my = ys.iter().sum::<f64>() / nf;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    if sxx == 0.0 {
        return Err(Error::Invalid("slope fit needs distinct 1/h values".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = xs.iter().zip(ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
    let r2 = if syy == 0.0 { 1.0 } else { 1.0 - sse / syy };
    Ok(SlopeFit { slope, intercept, r2, n_points: n })
}

/// Slope of `log E` against `1/h` over the usable entries.
pub fn fit_slope(series: &IndicatorSeries, floor_factor: f64) -> Result<SlopeFit> {
    let usable = series.usable(floor_factor);
    let xs: Vec<f64> = usable.iter().map(|e| e.inv_h).collect();
    let ys: Vec<f64> = usable.iter().map(|e| e.e.ln()).collect();
    ols(&xs, &ys)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum FrontClass {
    /// The front misses the cavity: `E` decays exponentially in `1/h`.
    Outside,
    /// The front cuts into the cavity: `E` grows exponentially.
    Intersecting,
    /// Polynomial regime between the two.
    Touching,
}

impl FrontClass {
    pub fn as_str(self) -> &'static str {
        match self {
            FrontClass::Outside => "OUTSIDE",
            FrontClass::Intersecting => "INTERSECTING",
            FrontClass::Touching => "TOUCHING",
        }
    }
}

impl std::fmt::Display for FrontClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Classification {
    pub class: FrontClass,
    /// `r²` of the underlying fit; zero for dead series.
    pub confidence: f64,
}

/// Threshold rule on the fitted slope.
pub fn classify(fit: &SlopeFit, tau: f64) -> Classification {
    let class = if fit.slope < -tau {
        FrontClass::Outside
    } else if fit.slope > tau {
        FrontClass::Intersecting
    } else {
        FrontClass::Touching
    };
    Classification { class, confidence: fit.r2 }
}

/// Fit and classification of a series; a dead series is OUTSIDE with zero confidence.
pub fn classify_series(series: &IndicatorSeries, opts: &IndicatorOptions) -> (Option<SlopeFit>, Classification) {
    if series.dead {
        return (None, Classification { class: FrontClass::Outside, confidence: 0.0 });
    }
    match fit_slope(series, opts.floor_factor) {
        Ok(fit) => (Some(fit), classify(&fit, opts.tau)),
        Err(_) => (None, Classification { class: FrontClass::Outside, confidence: 0.0 }),
    }
}

/// Midpoint of the slope band allowed by `h^{n-2} ≲ E ≲ h^{-1}` at a touching front.
///
/// In two dimensions the band runs from slope 0 to the least-squares slope of
/// `log(1/h)` against `1/h` over the grid.
pub fn touching_split(grid: &HGrid) -> f64 {
    let xs = grid.inv_h();
    let lower: Vec<f64> = xs.iter().map(|x| (2.0 - grid.n as f64) * x.ln()).collect();
    let upper: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    match (ols(&xs, &lower), ols(&xs, &upper)) {
        (Ok(a), Ok(b)) => 0.5 * (a.slope + b.slope),
        _ => 0.0,
    }
}

/// One evaluation during bisection.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BisectionStep {
    pub t: f64,
    pub slope: Option<f64>,
    pub r2: f64,
    pub class: FrontClass,
    /// Side of the bracket this `t` was assigned to.
    pub outside: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DistanceEstimate {
    pub d_hat: f64,
    pub t_lo: f64,
    pub t_hi: f64,
    pub n_bisections: usize,
    pub trace: Vec<BisectionStep>,
    pub series: Vec<IndicatorSeries>,
}

/// Bisection settings.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BisectionOptions {
    pub t_lo: f64,
    pub t_hi: f64,
    pub tol: f64,
    /// Bracket widenings allowed on each side.
    pub max_widen: usize,
    pub mode: DataMode,
}

impl Default for BisectionOptions {
    fn default() -> Self {
        Self { t_lo: 0.3, t_hi: 0.9, tol: 0.005, max_widen: 4, mode: DataMode::Localized }
    }
}

struct Bisector<'a> {
    scene: &'a Scene,
    probe: &'a Probe,
    grid: &'a HGrid,
    opts: &'a IndicatorOptions,
    mode: DataMode,
    split: f64,
    trace: Vec<BisectionStep>,
    series: Vec<IndicatorSeries>,
}

impl Bisector<'_> {
    /// Classifies the front at `t`; a TOUCHING front is assigned by comparing its
    /// slope with the middle of the touching band.
    fn outside_at(&mut self, t: f64) -> Result<(bool, FrontClass)> {
        let s = compute_series(self.scene, self.probe, t, self.grid, self.mode, self.opts)?;
        let (fit, c) = classify_series(&s, self.opts);
        let outside = match c.class {
            FrontClass::Outside => true,
            FrontClass::Intersecting => false,
            FrontClass::Touching => fit.map_or(true, |f| f.slope < self.split),
        };
        self.trace.push(BisectionStep {
            t,
            slope: fit.map(|f| f.slope),
            r2: c.confidence,
            class: c.class,
            outside,
        });
        self.series.push(s);
        Ok((outside, c.class))
    }
}

/// Largest admissible `t` for a probe: the cutoff ball must stay within reach of
/// the slab and away from the lateral truncation.
fn t_ceiling(scene: &Scene, probe: &Probe, opts: &IndicatorOptions, mode: DataMode) -> f64 {
    let k = 1.0 + opts.delta_fraction;
    let reach = scene.slab.far_face_distance(probe.p) + scene.slab.thickness();
    let mut ceiling = reach / k;
    if mode == DataMode::Localized {
        ceiling = ceiling.min((scene.slab.halfwidth - probe.p[0].abs()) / k);
    }
    ceiling * (1.0 - 1e-9)
}

/// Estimates `dist(p, D)` as the OUTSIDE/INTERSECTING transition of the front radius.
pub fn estimate_distance(
    scene: &Scene,
    probe: &Probe,
    grid: &HGrid,
    bis: &BisectionOptions,
    opts: &IndicatorOptions,
) -> Result<DistanceEstimate> {
    if !(bis.tol > 0.0) || !(bis.t_lo > 0.0) || !(bis.t_hi > bis.t_lo) {
        return Err(Error::Invalid(format!(
            "bisection needs 0 < t_lo < t_hi and tol > 0 (got {}, {}, {})",
            bis.t_lo, bis.t_hi, bis.tol
        )));
    }
    if !scene.has_cavity() {
        return Err(Error::NotDetectable(probe.p));
    }
    let mut b = Bisector {
        scene,
        probe,
        grid,
        opts,
        mode: bis.mode,
        split: touching_split(grid),
        trace: Vec::new(),
        series: Vec::new(),
    };
    let ceiling = t_ceiling(scene, probe, opts, bis.mode);
    let mut lo = bis.t_lo;
    let mut hi = bis.t_hi.min(ceiling);
    if hi <= lo {
        return Err(Error::NotDetectable(probe.p));
    }
    let mut ok_lo = false;
    for _ in 0..=bis.max_widen {
        if b.outside_at(lo)?.1 == FrontClass::Outside {
            ok_lo = true;
            break;
        }
        lo *= 0.5;
    }
    let mut ok_hi = false;
    for _ in 0..=bis.max_widen {
        if b.outside_at(hi)?.1 == FrontClass::Intersecting {
            ok_hi = true;
            break;
        }
        if hi >= ceiling {
            break;
        }
        hi = (hi + (hi - lo)).min(ceiling);
    }
    if !ok_lo || !ok_hi {
        return Err(Error::NotDetectable(probe.p));
    }
    let mut n_bisections = 0;
    while hi - lo > bis.tol {
        let mid = 0.5 * (lo + hi);
        if b.outside_at(mid)?.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        n_bisections += 1;
    }
    Ok(DistanceEstimate {
        d_hat: 0.5 * (lo + hi),
        t_lo: lo,
        t_hi: hi,
        n_bisections,
        trace: b.trace,
        series: b.series,
    })
}

/// Energy gap for the remainder data `(1 - φ_{δ,t}) v_t`.
pub fn localization_error(scene: &Scene, probe: &Probe, t: f64, h: f64, opts: &IndicatorOptions) -> Result<f64> {
    let params = probe.params(t, h, opts);
    let data = boundary_data(&scene.pair.full, &params, &scene.gamma, DataMode::Remainder)?;
    if data.values.iter().all(|v| v.norm() == 0.0) {
        return Err(Error::Invalid(
            "remainder data vanish: the cutoff support covers the whole truncated boundary".into(),
        ));
    }
    Ok(scene.system.energy_gap(&data)?.e)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn synthetic(f: impl Fn(f64) -> f64) -> IndicatorSeries {
        let grid = HGrid::range(2, 0.5, 0, 7).unwrap();
        let entries = grid
            .inv_h()
            .into_iter()
            .map(|x| IndicatorEntry {
                h: 1.0 / x,
                inv_h: x,
                e: f(x),
                e_full: 1.0,
                identity_residual: 0.0,
                lateral_leak: 0.0,
                clamped: 0,
            })
            .collect();
        IndicatorSeries { probe: Probe::new(0, [0.0, 1.2]), t: 0.4, mode: DataMode::Localized, entries, dead: false }
    }

    #[test]
    fn planted_exponentials_are_recovered() {
        let fit = fit_slope(&synthetic(|x| 0.3f64.powf(x)), 1e3).unwrap();
        assert!((fit.slope - 0.3f64.ln()).abs() < 1e-12);
        assert!((fit.r2 - 1.0).abs() < 1e-12);
        let fit = fit_slope(&synthetic(|x| 5.0 * 2f64.powf(x)), 1e3).unwrap();
        assert!((fit.slope - 2f64.ln()).abs() < 1e-12);
        assert!((fit.intercept - 5f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn touching_envelope_slope() {
        // log(c/h) = log c + log(1/h); its least-squares slope over 1/h = 3..10 is
        // Σ(x - x̄) log x / Σ(x - x̄)², evaluated here in closed form.
        let xs: Vec<f64> = (3..=10).map(f64::from).collect();
        let mx = xs.iter().sum::<f64>() / 8.0;
        let oracle = xs.iter().map(|x| (x - mx) * x.ln()).sum::<f64>() / xs.iter().map(|x| (x - mx).powi(2)).sum::<f64>();
        let fit = fit_slope(&synthetic(|x| 0.7 * x), 1e3).unwrap();
        assert!((fit.slope - oracle).abs() < 1e-12);
        assert!((fit.slope - 0.16722).abs() < 1e-4);
        assert!((fit.intercept - (0.7f64.ln() + 0.71447)).abs() < 1e-4);
    }

    #[test]
    fn classification_rule() {
        let mk = |slope| SlopeFit { slope, intercept: 0.0, r2: 1.0, n_points: 8 };
        assert_eq!(classify(&mk(-0.69), 0.1).class, FrontClass::Outside);
        assert_eq!(classify(&mk(0.41), 0.1).class, FrontClass::Intersecting);
        assert_eq!(classify(&mk(0.03), 0.1).class, FrontClass::Touching);
    }

    #[test]
    fn floor_and_dead_series() {
        let s = synthetic(|x| if x < 5.0 { 1.0 } else { 1e-20 });
        assert!(matches!(fit_slope(&s, 1e3), Err(Error::InsufficientSignal { usable: 2 })));
        let mut s = synthetic(|_| 0.0);
        s.dead = true;
        let (fit, c) = classify_series(&s, &IndicatorOptions::default());
        assert!(fit.is_none());
        assert_eq!(c.class, FrontClass::Outside);
    }

    #[test]
    fn touching_split_sits_inside_band() {
        let grid = HGrid::range(2, 0.5, 2, 9).unwrap();
        let s = touching_split(&grid);
        assert!(s > 0.0 && s < 0.1, "{s}");
    }
}

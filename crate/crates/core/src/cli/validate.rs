//! Self-checks run by the `validate` command.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::Resolved;
use crate::error::Result;
use crate::geometry::{Point, SlabGeometry};
use crate::indicator::{classify, ols, FrontClass};
use crate::probe::{
    eikonal_defect, residual_diagnostic, stencil_resolves, transport_residual, GammaField, ProbeParams, RESIDUAL_STEP,
};
use crate::solver::{convergence_errors, harmonic_cubic};
use crate::Scene;

#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mark = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "{mark}  {:<28} {}", self.name, self.detail)
    }
}

fn check(name: &'static str, passed: bool, detail: String) -> Check {
    Check { name, passed, detail }
}

/// Uniform samples in the truncated slab, away from its boundary by `pad`.
pub fn slab_samples(slab: &SlabGeometry, count: usize, pad: f64, seed: u64) -> Vec<Point> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            [
                rng.gen_range(-slab.halfwidth + pad..slab.halfwidth - pad),
                rng.gen_range(slab.d1 + pad..slab.d2 - pad),
            ]
        })
        .collect()
}

fn eikonal(r: &Resolved) -> Result<Check> {
    let probe = r.probes.probes[0];
    let mut worst = 0.0f64;
    for x in slab_samples(&r.slab, 1000, 0.0, 1) {
        let (a, b) = eikonal_defect(&x, &probe.p, &probe.axis)?;
        worst = worst.max(a.abs()).max(b.abs());
    }
    Ok(check("eikonal identities", worst < 1e-8, format!("max defect {worst:.2e} (limit 1e-8)")))
}

fn transport(r: &Resolved) -> Result<Check> {
    let probe = r.probes.probes[0];
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst = 0.0f64;
    for n in 2..=4 {
        let mut p = vec![0.0; n];
        p[0] = probe.p[0];
        p[n - 1] = probe.p[1];
        let mut axis = vec![0.0; n];
        axis[0] = 1.0;
        for x2 in slab_samples(&r.slab, 50, 0.0, 3 + n as u64) {
            let mut x: Vec<f64> = (0..n).map(|_| rng.gen_range(-0.5..0.5)).collect();
            x[0] = x2[0];
            x[n - 1] = x2[1];
            worst = worst.max(transport_residual(&x, &p, &axis, 1e-3)?);
        }
    }
    Ok(check("transport equation n=2,3,4", worst < 1e-6, format!("max residual {worst:.2e} (limit 1e-6)")))
}

fn harmonicity(r: &Resolved) -> Result<Check> {
    let probe = r.probes.probes[0];
    let t = 0.5 * (r.bisection.t_lo + r.bisection.t_hi);
    let samples = slab_samples(&r.slab, 2000, 0.0, 4);
    let mut worst = 0.0f64;
    for h in r.grid.h_values() {
        let params = ProbeParams { axis: probe.axis, ..ProbeParams::new(probe.p, t, h) };
        let kept: Vec<Point> =
            samples.iter().copied().filter(|&x| stencil_resolves(x, &params, RESIDUAL_STEP)).collect();
        worst = worst.max(residual_diagnostic(&params, &GammaField::default(), &kept)?);
    }
    Ok(check("harmonicity at gamma = 1", worst <= 1e-6, format!("max residual {worst:.2e} (limit 1e-6)")))
}

fn convergence(r: &Resolved) -> Result<Check> {
    let th = r.slab.thickness();
    let slab = SlabGeometry::new(r.slab.d1, r.slab.d2, th)?;
    let edges = [0.1 * th, 0.05 * th, 0.025 * th];
    let shift = [0.0, 0.5 * (r.slab.d1 + r.slab.d2)];
    let exact = move |x: Point| harmonic_cubic([(x[0] - shift[0]) / th, (x[1] - shift[1]) / th]);
    let errs = convergence_errors(&slab, &edges, &exact)?;
    let ratios: Vec<f64> = errs.windows(2).map(|w| w[0] / w[1]).collect();
    let ok = ratios.iter().all(|q| (3.2..=4.8).contains(q));
    Ok(check("manufactured convergence", ok, format!("L2 error ratios {ratios:.3?} (band 3.2..4.8)")))
}

fn identity(r: &Resolved, scene: &Scene) -> Result<Check> {
    let probe = r.probes.probes[0];
    let t = 0.5 * (r.bisection.t_lo + r.bisection.t_hi);
    let mut worst = 0.0f64;
    let mut min_e = f64::INFINITY;
    for h in r.grid.h_values() {
        let params = probe.params(t, h, &r.indicator);
        let data = crate::probe::boundary_data(&scene.pair.full, &params, &scene.gamma, r.bisection.mode)?;
        let g = scene.system.energy_gap(&data)?;
        worst = worst.max(g.identity_residual);
        min_e = min_e.min(g.e);
    }
    Ok(check(
        "energy-gap identity",
        worst <= 1e-10 && min_e >= 0.0,
        format!("max relative residual {worst:.2e}, min E {min_e:.3e}"),
    ))
}

fn synthetic_fits(r: &Resolved) -> Result<Check> {
    let xs = r.grid.inv_h();
    let tau = r.indicator.tau;
    let mut worst = 0.0f64;
    let mut classes_ok = true;
    for (s, want) in [(-0.5, FrontClass::Outside), (0.0, FrontClass::Touching), (0.5, FrontClass::Intersecting)] {
        let ys: Vec<f64> = xs.iter().map(|x| (3.0f64).ln() + s * x).collect();
        let fit = ols(&xs, &ys)?;
        worst = worst.max((fit.slope - s).abs());
        classes_ok &= classify(&fit, tau).class == want;
    }
    Ok(check(
        "synthetic slope fits",
        worst < 1e-10 && classes_ok,
        format!("max slope error {worst:.2e}, classes {}", if classes_ok { "ok" } else { "wrong" }),
    ))
}

/// Runs every check; the scene is only needed for the energy-gap identity.
pub fn run_checks(r: &Resolved, scene: &Scene) -> Result<Vec<Check>> {
    Ok(vec![
        eikonal(r)?,
        transport(r)?,
        harmonicity(r)?,
        convergence(r)?,
        identity(r, scene)?,
        synthetic_fits(r)?,
    ])
}

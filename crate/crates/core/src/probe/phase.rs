//! Phase pair and amplitude of the complex spherical wave in any dimension.
//!
//! With `d = x - p`, `e` the unit axis, `c = d·e` and `s = |d - c e|`:
//! `φ = log|d|`, `ψ = atan2(s, c)` (the angle between `d` and `e`) and
//! `a = (2 i s)^{(2-n)/2}` on the principal branch.

use std::f64::consts::FRAC_PI_2;

use super::LogComplex;
use crate::error::{Error, Result};

fn split(x: &[f64], p: &[f64], axis: &[f64]) -> (Vec<f64>, f64, f64, f64) {
    let d: Vec<f64> = x.iter().zip(p).map(|(a, b)| a - b).collect();
    let r2: f64 = d.iter().map(|v| v * v).sum();
    let c: f64 = d.iter().zip(axis).map(|(a, b)| a * b).sum();
    let s = d.iter().zip(axis).map(|(di, ei)| (di - c * ei).powi(2)).sum::<f64>().sqrt();
    (d, r2, c, s)
}

fn to_point(v: &[f64]) -> [f64; 2] {
    [v[0], v.get(1).copied().unwrap_or(0.0)]
}

/// `(φ, ψ)` at `x` for a probe at `p` with unit `axis`.
pub fn phase_nd(x: &[f64], p: &[f64], axis: &[f64]) -> Result<(f64, f64)> {
    let (_, r2, c, s) = split(x, p, axis);
    if r2 == 0.0 {
        return Err(Error::SingularPoint(to_point(p)));
    }
    Ok((0.5 * r2.ln(), s.atan2(c)))
}

/// Analytic gradients `(∇φ, ∇ψ)`.
pub fn phase_gradients_nd(x: &[f64], p: &[f64], axis: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    let (d, r2, c, s) = split(x, p, axis);
    if r2 == 0.0 {
        return Err(Error::SingularPoint(to_point(p)));
    }
    if s == 0.0 {
        return Err(Error::Invalid("ψ is not differentiable on the axis line".into()));
    }
    let grad_phi: Vec<f64> = d.iter().map(|v| v / r2).collect();
    let grad_psi: Vec<f64> = d
        .iter()
        .zip(axis)
        .map(|(di, ei)| (c * (di - c * ei) / s - s * ei) / r2)
        .collect();
    Ok((grad_phi, grad_psi))
}

/// `(2 i |x' - p'|)^{(2-n)/2}` where `'` removes the axis component. Identically 1 for `n = 2`.
pub fn amplitude_nd(x: &[f64], p: &[f64], axis: &[f64]) -> Result<LogComplex> {
    let n = x.len();
    if n == 2 {
        return Ok(LogComplex::ONE);
    }
    let (_, _, _, s) = split(x, p, axis);
    if s == 0.0 {
        return Err(Error::Invalid(format!("amplitude undefined: x' = p' in dimension {n}")));
    }
    let k = (2.0 - n as f64) / 2.0;
    Ok(LogComplex { logmag: k * (2.0 * s).ln(), phase: k * FRAC_PI_2 })
}

/// Two-dimensional `(φ, ψ)`; `ψ ∈ [0, π]`.
pub fn phase(x: [f64; 2], p: [f64; 2], axis: [f64; 2]) -> Result<(f64, f64)> {
    phase_nd(&x, &p, &axis)
}

/// Amplitude in dimension `n` at a point whose first two coordinates are `x` and the rest zero.
pub fn amplitude(x: &[f64], p: &[f64], n: usize) -> Result<LogComplex> {
    if x.len() != p.len() || x.len() > n {
        return Err(Error::Invalid("amplitude: point dimensions disagree".into()));
    }
    let mut xs = x.to_vec();
    let mut ps = p.to_vec();
    xs.resize(n, 0.0);
    ps.resize(n, 0.0);
    let mut axis = vec![0.0; n];
    axis[0] = 1.0;
    amplitude_nd(&xs, &ps, &axis)
}

/// `(|∇φ|² - |∇ψ|², ∇φ·∇ψ)` from analytic gradients; both vanish identically.
pub fn eikonal_defect(x: &[f64], p: &[f64], axis: &[f64]) -> Result<(f64, f64)> {
    let (gp, gs) = phase_gradients_nd(x, p, axis)?;
    let np: f64 = gp.iter().map(|v| v * v).sum();
    let ns: f64 = gs.iter().map(|v| v * v).sum();
    let cross: f64 = gp.iter().zip(&gs).map(|(a, b)| a * b).sum();
    Ok((np - ns, cross))
}

/// Fourth-order central differences of a complex scalar function: `(∇f, Δf)`.
fn fd_grad_lap(
    f: &dyn Fn(&[f64]) -> Result<(f64, f64)>,
    x: &[f64],
    step: f64,
) -> Result<(Vec<(f64, f64)>, (f64, f64))> {
    let n = x.len();
    let f0 = f(x)?;
    let mut grad = Vec::with_capacity(n);
    let mut lap = (0.0, 0.0);
    for k in 0..n {
        let at = |m: f64| {
            let mut y = x.to_vec();
            y[k] += m * step;
            f(&y)
        };
        let (p1, m1, p2, m2) = (at(1.0)?, at(-1.0)?, at(2.0)?, at(-2.0)?);
        let d1 = |i: fn(&(f64, f64)) -> f64| (-i(&p2) + 8.0 * i(&p1) - 8.0 * i(&m1) + i(&m2)) / (12.0 * step);
        let d2 = |i: fn(&(f64, f64)) -> f64| {
            (-i(&p2) + 16.0 * i(&p1) - 30.0 * i(&f0) + 16.0 * i(&m1) - i(&m2)) / (12.0 * step * step)
        };
        grad.push((d1(|v| v.0), d1(|v| v.1)));
        lap.0 += d2(|v| v.0);
        lap.1 += d2(|v| v.1);
    }
    Ok((grad, lap))
}

/// `|(∇ρ·∇ + ½Δρ) a|` with `ρ = φ + iψ`, all derivatives by fourth-order differences.
pub fn transport_residual(x: &[f64], p: &[f64], axis: &[f64], step: f64) -> Result<f64> {
    let rho = |y: &[f64]| phase_nd(y, p, axis);
    let amp = |y: &[f64]| amplitude_nd(y, p, axis).map(|a| a.to_complex()).map(|z| (z.re, z.im));
    let (grho, lrho) = fd_grad_lap(&rho, x, step)?;
    let (gamp, _) = fd_grad_lap(&amp, x, step)?;
    let a = amplitude_nd(x, p, axis)?.to_complex();
    let mut acc = num_complex::Complex64::new(0.0, 0.0);
    for (gr, ga) in grho.iter().zip(&gamp) {
        acc += num_complex::Complex64::new(gr.0, gr.1) * num_complex::Complex64::new(ga.0, ga.1);
    }
    acc += 0.5 * num_complex::Complex64::new(lrho.0, lrho.1) * a;
    Ok(acc.norm())
}

#[cfg(test)]
mod tests {
    use std::f64::consts::{E, FRAC_PI_4, PI};

    use num_complex::Complex64;

    use super::*;

    #[test]
    fn phase_examples() {
        let p = [0.0, 0.0];
        let axis = [1.0, 0.0];
        let (phi, psi) = phase([1.0, 0.0], p, axis).unwrap();
        assert_eq!((phi, psi), (0.0, 0.0));
        let (_, psi) = phase([-2.0, 0.0], p, axis).unwrap();
        assert_eq!(psi, PI);
        let (phi, psi) = phase([0.0, E], p, axis).unwrap();
        assert!((phi - 1.0).abs() < 1e-15);
        assert!((psi - FRAC_PI_2).abs() < 1e-15);
        assert!(matches!(phase(p, p, axis), Err(Error::SingularPoint(_))));
    }

    #[test]
    fn amplitude_against_principal_branch() {
        let a2 = amplitude(&[0.3, 0.7], &[0.0, 1.2], 2).unwrap();
        assert_eq!((a2.logmag, a2.phase), (0.0, 0.0));

        // |x' - p'| = 1/2 in 3-D: (2i · ½)^{-1/2} = i^{-1/2}
        let a3 = amplitude(&[0.4, 0.5], &[0.0, 0.0], 3).unwrap().to_complex();
        let oracle = Complex64::new(0.0, 1.0).powf(-0.5);
        assert!((a3 - oracle).norm() < 1e-15);
        assert!((a3.norm() - 1.0).abs() < 1e-15);
        assert!((a3.arg() + FRAC_PI_4).abs() < 1e-15);

        // |x' - p'| = 1 in 4-D: (2i)^{-1} = -i/2
        let a4 = amplitude(&[0.0, 1.0], &[0.0, 0.0], 4).unwrap().to_complex();
        let oracle = Complex64::new(1.0, 0.0) / Complex64::new(0.0, 2.0);
        assert!((a4 - oracle).norm() < 1e-15);
        assert!((a4.arg() + FRAC_PI_2).abs() < 1e-15);

        assert!(amplitude(&[0.3, 0.0], &[0.0, 0.0], 3).is_err());
    }

    #[test]
    fn gradients_match_central_differences() {
        let p = [0.1, 1.2, -0.3];
        let axis = [1.0, 0.0, 0.0];
        let x = [0.4, 0.3, 0.2];
        let (gp, gs) = phase_gradients_nd(&x, &p, &axis).unwrap();
        let e = 1e-6;
        for k in 0..3 {
            let mut a = x;
            let mut b = x;
            a[k] += e;
            b[k] -= e;
            let (pa, sa) = phase_nd(&a, &p, &axis).unwrap();
            let (pb, sb) = phase_nd(&b, &p, &axis).unwrap();
            assert!(((pa - pb) / (2.0 * e) - gp[k]).abs() < 1e-6);
            assert!(((sa - sb) / (2.0 * e) - gs[k]).abs() < 1e-6);
        }
    }

    #[test]
    fn transport_holds_in_three_and_four_dimensions() {
        for n in 2..=4 {
            let mut x = vec![0.3; n];
            x[n - 1] = 0.4;
            let mut p = vec![0.0; n];
            p[n - 1] = 1.2;
            let mut axis = vec![0.0; n];
            axis[0] = 1.0;
            let r = transport_residual(&x, &p, &axis, 1e-3).unwrap();
            assert!(r < 1e-6, "n = {n}: {r}");
        }
    }
}

//! Manufactured solutions for convergence checks of the forward solver.

use num_complex::Complex64;

use super::{assemble, FieldSolution};
use crate::error::Result;
use crate::geometry::{build_nested_meshes, MeshOptions, Point, SlabGeometry, TriMesh};
use crate::probe::{BoundaryData, GammaField};

/// Degree-5 Dunavant rule: barycentric points and weights summing to 1.
const QUAD: [([f64; 3], f64); 7] = [
    ([1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0], 0.225),
    ([0.059_715_871_789_770, 0.470_142_064_105_115, 0.470_142_064_105_115], 0.132_394_152_788_506),
    ([0.470_142_064_105_115, 0.059_715_871_789_770, 0.470_142_064_105_115], 0.132_394_152_788_506),
    ([0.470_142_064_105_115, 0.470_142_064_105_115, 0.059_715_871_789_770], 0.132_394_152_788_506),
    ([0.797_426_985_353_087, 0.101_286_507_323_456, 0.101_286_507_323_456], 0.125_939_180_544_827),
    ([0.101_286_507_323_456, 0.797_426_985_353_087, 0.101_286_507_323_456], 0.125_939_180_544_827),
    ([0.101_286_507_323_456, 0.101_286_507_323_456, 0.797_426_985_353_087], 0.125_939_180_544_827),
];

/// `‖u_h − u‖_{L²}` for a nodal P1 field against an exact function.
pub fn l2_error(mesh: &TriMesh, values: &[f64], exact: impl Fn(Point) -> f64) -> f64 {
    let mut sum = 0.0;
    for (t, tri) in mesh.triangles.iter().enumerate() {
        let area = mesh.signed_area(t).abs();
        let [a, b, c] = tri.map(|i| mesh.vertices[i]);
        for (l, w) in QUAD {
            let x = [l[0] * a[0] + l[1] * b[0] + l[2] * c[0], l[0] * a[1] + l[1] * b[1] + l[2] * c[1]];
            let uh = l[0] * values[tri[0]] + l[1] * values[tri[1]] + l[2] * values[tri[2]];
            let e = uh - exact(x);
            sum += w * area * e * e;
        }
    }
    sum.sqrt()
}

/// Solves `Δu = 0` on a uniform mesh with Dirichlet data taken from `exact`.
pub fn solve_manufactured(
    slab: &SlabGeometry,
    edge: f64,
    exact: &dyn Fn(Point) -> f64,
) -> Result<(TriMesh, FieldSolution)> {
    let pair = build_nested_meshes(slab, None, &MeshOptions::uniform(edge))?;
    let mesh = pair.full;
    let system = assemble(&mesh, &GammaField::default())?;
    let nodes = mesh.dirichlet_nodes();
    let values = nodes.iter().map(|&i| Complex64::new(exact(mesh.vertices[i]), 0.0)).collect();
    let data = BoundaryData { nodes, values, lateral_leak: 0.0, clamped: 0 };
    let field = system.solve_dirichlet(&data)?;
    Ok((mesh, field))
}

/// L² errors of the manufactured solution on the successive edge lengths.
pub fn convergence_errors(slab: &SlabGeometry, edges: &[f64], exact: &dyn Fn(Point) -> f64) -> Result<Vec<f64>> {
    edges
        .iter()
        .map(|&h| {
            let (mesh, field) = solve_manufactured(slab, h, exact)?;
            Ok(l2_error(&mesh, &field.re, exact))
        })
        .collect()
}

/// `Re((x + iy)³)`, harmonic.
pub fn harmonic_cubic(x: Point) -> f64 {
    x[0] * x[0] * x[0] - 3.0 * x[0] * x[1] * x[1]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadrature_integrates_quartics() {
        let w: f64 = QUAD.iter().map(|q| q.1).sum();
        assert!((w - 1.0).abs() < 1e-12);
        // ∫_T x⁴ over the unit right triangle is 1/30
        let mesh = TriMesh {
            vertices: vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]],
            triangles: vec![[0, 1, 2]],
            boundary_edges: Vec::new(),
            target_edge: 1.0,
        };
        let e = l2_error(&mesh, &[0.0; 3], |x| x[0] * x[0]);
        assert!((e * e - 1.0 / 30.0).abs() < 1e-12);
    }

    #[test]
    fn linear_data_is_reproduced() {
        let slab = SlabGeometry::new(0.0, 1.0, 1.0).unwrap();
        let f = |x: Point| 2.0 * x[0] - x[1] + 0.5;
        let (mesh, field) = solve_manufactured(&slab, 0.2, &f).unwrap();
        assert!(l2_error(&mesh, &field.re, f) < 1e-10);
    }
}

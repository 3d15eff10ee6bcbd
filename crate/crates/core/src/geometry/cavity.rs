use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::{
    dist, find_self_intersection, point_in_polygon, point_segment_distance, polygon_area,
    polygon_boundary_distance, Point,
};
use crate::error::{Error, Result};

/// Samples used when a smooth boundary must be resolved numerically.
const DENSE_SAMPLES: usize = 4096;

/// Shape of the insulating cavity `D`.
///
/// The radial star boundary is `c + r(θ) (cos θ, sin θ)` with
/// `r(θ) = mean + Σ_k cos[k-1] cos(kθ) + sin[k-1] sin(kθ)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum CavityShape {
    Disc {
        center: Point,
        radius: f64,
    },
    Ellipse {
        center: Point,
        semi_axes: [f64; 2],
        #[serde(default)]
        rotation: f64,
    },
    Polygon {
        vertices: Vec<Point>,
    },
    RadialStar {
        center: Point,
        mean: f64,
        #[serde(default)]
        cos: Vec<f64>,
        #[serde(default)]
        sin: Vec<f64>,
    },
}

/// Polygonized cavity boundary, counterclockwise.
#[derive(Clone, Debug, PartialEq)]
pub struct CavityPolygon {
    pub vertices: Vec<Point>,
    /// Largest distance between the exact boundary and its chord, over all edges.
    pub max_chord_deviation: f64,
}

impl CavityPolygon {
    pub fn area(&self) -> f64 {
        polygon_area(&self.vertices)
    }

    pub fn contains(&self, p: Point) -> bool {
        point_in_polygon(p, &self.vertices)
    }

    pub fn bbox(&self) -> (Point, Point) {
        bbox(&self.vertices)
    }

    pub fn perimeter(&self) -> f64 {
        let n = self.vertices.len();
        (0..n)
            .map(|i| dist(self.vertices[i], self.vertices[(i + 1) % n]))
            .sum()
    }
}

fn bbox(vertices: &[Point]) -> (Point, Point) {
    let mut lo = [f64::INFINITY; 2];
    let mut hi = [f64::NEG_INFINITY; 2];
    for v in vertices {
        for k in 0..2 {
            lo[k] = lo[k].min(v[k]);
            hi[k] = hi[k].max(v[k]);
        }
    }
    (lo, hi)
}

impl CavityShape {
    pub fn validate(&self) -> Result<()> {
        match self {
            CavityShape::Disc { radius, .. } => {
                if !(*radius > 0.0) {
                    return Err(Error::Invalid(format!("disc radius must be positive, got {radius}")));
                }
            }
            CavityShape::Ellipse { semi_axes, .. } => {
                if !(semi_axes[0] > 0.0 && semi_axes[1] > 0.0) {
                    return Err(Error::Invalid(format!(
                        "ellipse semi-axes must be positive, got {semi_axes:?}"
                    )));
                }
            }
            CavityShape::Polygon { vertices } => {
                if vertices.len() < 3 {
                    return Err(Error::Invalid("polygon cavity needs at least 3 vertices".into()));
                }
                if let Some((i, j)) = find_self_intersection(vertices) {
                    return Err(Error::SelfIntersecting(i, j));
                }
                if polygon_area(vertices).abs() == 0.0 {
                    return Err(Error::Invalid("polygon cavity has zero area".into()));
                }
            }
            CavityShape::RadialStar { .. } => {
                let min_r = (0..DENSE_SAMPLES)
                    .map(|k| self.star_radius(2.0 * PI * k as f64 / DENSE_SAMPLES as f64))
                    .fold(f64::INFINITY, f64::min);
                if !(min_r > 0.0) {
                    return Err(Error::Invalid(format!(
                        "radial-star radius function must stay positive (min sampled {min_r})"
                    )));
                }
            }
        }
        Ok(())
    }

    fn star_radius(&self, theta: f64) -> f64 {
        match self {
            CavityShape::RadialStar { mean, cos, sin, .. } => {
                let mut r = *mean;
                for (k, c) in cos.iter().enumerate() {
                    r += c * ((k + 1) as f64 * theta).cos();
                }
                for (k, s) in sin.iter().enumerate() {
                    r += s * ((k + 1) as f64 * theta).sin();
                }
                r
            }
            _ => unreachable!("star_radius on a non-star cavity"),
        }
    }

    /// Boundary point at parameter `s ∈ [0, 2π)` for the smooth variants.
    fn curve_point(&self, s: f64) -> Point {
        match self {
            CavityShape::Disc { center, radius } => {
                [center[0] + radius * s.cos(), center[1] + radius * s.sin()]
            }
            CavityShape::Ellipse { center, semi_axes, rotation } => {
                let (x, y) = (semi_axes[0] * s.cos(), semi_axes[1] * s.sin());
                let (c, sn) = (rotation.cos(), rotation.sin());
                [center[0] + c * x - sn * y, center[1] + sn * x + c * y]
            }
            CavityShape::RadialStar { center, .. } => {
                let r = self.star_radius(s);
                [center[0] + r * s.cos(), center[1] + r * s.sin()]
            }
            CavityShape::Polygon { .. } => unreachable!("polygon has no smooth parametrization"),
        }
    }

    /// Whether `p` lies strictly inside the exact cavity.
    pub fn contains(&self, p: Point) -> bool {
        match self {
            CavityShape::Disc { center, radius } => dist(p, *center) < *radius,
            CavityShape::Ellipse { center, semi_axes, rotation } => {
                let [x, y] = to_ellipse_frame(p, *center, *rotation);
                (x / semi_axes[0]).powi(2) + (y / semi_axes[1]).powi(2) < 1.0
            }
            CavityShape::Polygon { vertices } => {
                point_in_polygon(p, vertices) && polygon_boundary_distance(p, vertices) > 0.0
            }
            CavityShape::RadialStar { center, .. } => {
                let d = [p[0] - center[0], p[1] - center[1]];
                let rho = d[0].hypot(d[1]);
                rho < self.star_radius(d[1].atan2(d[0]))
            }
        }
    }

    /// Distance from `p` to the exact boundary curve, whether `p` is inside or outside.
    pub fn boundary_distance(&self, p: Point) -> f64 {
        match self {
            CavityShape::Disc { center, radius } => (dist(p, *center) - radius).abs(),
            CavityShape::Ellipse { center, semi_axes, rotation } => {
                let [x, y] = to_ellipse_frame(p, *center, *rotation);
                ellipse_distance(semi_axes[0], semi_axes[1], x, y)
            }
            CavityShape::Polygon { vertices } => polygon_boundary_distance(p, vertices),
            CavityShape::RadialStar { .. } => self.smooth_boundary_distance(p),
        }
    }

    /// Dense sampling followed by golden-section refinement of the closest parameter.
    fn smooth_boundary_distance(&self, p: Point) -> f64 {
        let n = DENSE_SAMPLES;
        let step = 2.0 * PI / n as f64;
        let pts: Vec<Point> = (0..n).map(|k| self.curve_point(k as f64 * step)).collect();
        let mut best = (f64::INFINITY, 0usize);
        for i in 0..n {
            let d = point_segment_distance(p, pts[i], pts[(i + 1) % n]);
            if d < best.0 {
                best = (d, i);
            }
        }
        let f = |s: f64| dist(p, self.curve_point(s));
        let (mut a, mut b) = ((best.1 as f64 - 1.0) * step, (best.1 as f64 + 2.0) * step);
        let g = 0.5 * (5f64.sqrt() - 1.0);
        let mut c = b - g * (b - a);
        let mut d = a + g * (b - a);
        for _ in 0..100 {
            if f(c) < f(d) {
                b = d;
            } else {
                a = c;
            }
            c = b - g * (b - a);
            d = a + g * (b - a);
        }
        f(0.5 * (a + b)).min(best.0)
    }

    /// Bounding box of the exact shape (sampled for the star).
    pub fn bbox(&self) -> (Point, Point) {
        match self {
            CavityShape::Polygon { vertices } => bbox(vertices),
            _ => {
                let pts: Vec<Point> = (0..DENSE_SAMPLES)
                    .map(|k| self.curve_point(2.0 * PI * k as f64 / DENSE_SAMPLES as f64))
                    .collect();
                bbox(&pts)
            }
        }
    }
}

fn to_ellipse_frame(p: Point, center: Point, rotation: f64) -> Point {
    let (dx, dy) = (p[0] - center[0], p[1] - center[1]);
    let (c, s) = (rotation.cos(), rotation.sin());
    [c * dx + s * dy, -s * dx + c * dy]
}

/// Distance from `(y0, y1)` to the axis-aligned ellipse with semi-axes `(a, b)`.
///
/// Robust bisection on the Lagrange parameter after reflecting into the first
/// quadrant and ordering the axes.
fn ellipse_distance(a: f64, b: f64, y0: f64, y1: f64) -> f64 {
    let (e0, e1, y0, y1) = if a >= b {
        (a, b, y0.abs(), y1.abs())
    } else {
        (b, a, y1.abs(), y0.abs())
    };
    if y1 > 0.0 {
        if y0 > 0.0 {
            let z0 = y0 / e0;
            let z1 = y1 / e1;
            let g = z0 * z0 + z1 * z1 - 1.0;
            if g == 0.0 {
                return 0.0;
            }
            let r0 = (e0 / e1).powi(2);
            let n0 = r0 * z0;
            let mut s0 = z1 - 1.0;
            let mut s1 = if g < 0.0 { 0.0 } else { n0.hypot(z1) - 1.0 };
            let mut s = 0.0;
            for _ in 0..256 {
                s = 0.5 * (s0 + s1);
                if s == s0 || s == s1 {
                    break;
                }
                let ratio0 = n0 / (s + r0);
                let ratio1 = z1 / (s + 1.0);
                let gs = ratio0 * ratio0 + ratio1 * ratio1 - 1.0;
                if gs > 0.0 {
                    s0 = s;
                } else if gs < 0.0 {
                    s1 = s;
                } else {
                    break;
                }
            }
            let x0 = r0 * y0 / (s + r0);
            let x1 = y1 / (s + 1.0);
            (x0 - y0).hypot(x1 - y1)
        } else {
            (y1 - e1).abs()
        }
    } else {
        let numer0 = e0 * y0;
        let denom0 = e0 * e0 - e1 * e1;
        if numer0 < denom0 {
            let xde0 = numer0 / denom0;
            let x0 = e0 * xde0;
            let x1 = e1 * (1.0 - xde0 * xde0).max(0.0).sqrt();
            (x0 - y0).hypot(x1)
        } else {
            (y0 - e0).abs()
        }
    }
}

/// Approximates `∂D` by a counterclockwise polygon whose vertices lie on the exact boundary.
///
/// Smooth shapes are sampled at `segments` uniformly spaced parameters; polygon
/// cavities are returned as given (reoriented if clockwise).
pub fn polygonize_cavity(shape: &CavityShape, segments: usize) -> Result<CavityPolygon> {
    shape.validate()?;
    if segments < 3 {
        return Err(Error::Invalid(format!(
            "cavity polygonization needs at least 3 segments, got {segments}"
        )));
    }
    let (mut vertices, deviation) = match shape {
        CavityShape::Polygon { vertices } => (vertices.clone(), 0.0),
        _ => {
            let step = 2.0 * PI / segments as f64;
            let vertices: Vec<Point> = (0..segments).map(|k| shape.curve_point(k as f64 * step)).collect();
            let mut deviation: f64 = 0.0;
            for k in 0..segments {
                let a = vertices[k];
                let b = vertices[(k + 1) % segments];
                for sub in 1..8 {
                    let mid = shape.curve_point((k as f64 + sub as f64 / 8.0) * step);
                    deviation = deviation.max(point_segment_distance(mid, a, b));
                }
            }
            (vertices, deviation)
        }
    };
    if polygon_area(&vertices) < 0.0 {
        vertices.reverse();
    }
    if let Some((i, j)) = find_self_intersection(&vertices) {
        return Err(Error::SelfIntersecting(i, j));
    }
    Ok(CavityPolygon { vertices, max_chord_deviation: deviation })
}

/// Euclidean distance from an exterior point `p` to the cavity `D`.
pub fn cavity_distance(p: Point, shape: &CavityShape) -> Result<f64> {
    shape.validate()?;
    if shape.contains(p) {
        return Err(Error::InsideCavity(p));
    }
    Ok(shape.boundary_distance(p))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn disc() -> CavityShape {
        CavityShape::Disc { center: [0.0, 0.5], radius: 0.2 }
    }

    #[test]
    fn square_from_disc() {
        let poly = polygonize_cavity(&disc(), 4).unwrap();
        assert_eq!(poly.vertices.len(), 4);
        for v in &poly.vertices {
            assert!((dist(*v, [0.0, 0.5]) - 0.2).abs() < 1e-15);
        }
        // chord sagitta r (1 - cos(π/4))
        let sagitta = 0.2 * (1.0 - (PI / 4.0).cos());
        assert!((poly.max_chord_deviation - sagitta).abs() < 1e-12);
    }

    #[test]
    fn constant_star_matches_disc() {
        let star = CavityShape::RadialStar { center: [0.0, 0.5], mean: 0.2, cos: vec![], sin: vec![] };
        let a = polygonize_cavity(&star, 32).unwrap();
        let b = polygonize_cavity(&disc(), 32).unwrap();
        for (u, v) in a.vertices.iter().zip(&b.vertices) {
            assert!(dist(*u, *v) < 1e-15);
        }
    }

    #[test]
    fn ellipse_area_close_to_closed_form() {
        let e = CavityShape::Ellipse { center: [0.1, 0.4], semi_axes: [0.3, 0.1], rotation: 0.3 };
        let poly = polygonize_cavity(&e, 64).unwrap();
        let exact = PI * 0.3 * 0.1;
        assert!(((poly.area() - exact) / exact).abs() < 0.005);
    }

    #[test]
    fn clockwise_polygon_is_reoriented() {
        let cw = CavityShape::Polygon { vertices: vec![[0.0, 0.0], [0.0, 1.0], [1.0, 1.0], [1.0, 0.0]] };
        let poly = polygonize_cavity(&cw, 8).unwrap();
        assert!(poly.area() > 0.0);
    }

    #[test]
    fn self_intersecting_polygon_rejected() {
        let bowtie = CavityShape::Polygon { vertices: vec![[0.0, 0.0], [1.0, 1.0], [1.0, 0.0], [0.0, 1.0]] };
        assert!(matches!(polygonize_cavity(&bowtie, 8), Err(Error::SelfIntersecting(..))));
    }

    #[test]
    fn nonpositive_star_rejected() {
        let star = CavityShape::RadialStar { center: [0.0, 0.5], mean: 0.1, cos: vec![0.2], sin: vec![] };
        assert!(polygonize_cavity(&star, 64).is_err());
    }

    #[test]
    fn disc_distance_examples() {
        assert!((cavity_distance([0.0, 1.2], &disc()).unwrap() - 0.5).abs() < 1e-15);
        let on = [0.2 * 0.6, 0.5 + 0.2 * 0.8];
        assert!(cavity_distance(on, &disc()).unwrap() < 1e-15);
        assert!(matches!(cavity_distance([0.0, 0.5], &disc()), Err(Error::InsideCavity(_))));
    }

    #[test]
    fn ellipse_distance_against_axis_points() {
        let e = CavityShape::Ellipse { center: [0.0, 0.0], semi_axes: [0.3, 0.1], rotation: 0.0 };
        assert!((cavity_distance([0.0, 0.5], &e).unwrap() - 0.4).abs() < 1e-14);
        assert!((cavity_distance([1.0, 0.0], &e).unwrap() - 0.7).abs() < 1e-14);
        let r = CavityShape::Ellipse { center: [0.0, 0.0], semi_axes: [0.3, 0.1], rotation: PI / 2.0 };
        assert!((cavity_distance([0.0, 1.0], &r).unwrap() - 0.7).abs() < 1e-12);
    }

    fn brute_force_distance(p: Point, shape: &CavityShape, samples: usize) -> f64 {
        match shape {
            CavityShape::Polygon { vertices } => {
                let n = vertices.len();
                let per_edge = samples / n;
                let mut best = f64::INFINITY;
                for i in 0..n {
                    let (a, b) = (vertices[i], vertices[(i + 1) % n]);
                    for k in 0..=per_edge {
                        let s = k as f64 / per_edge as f64;
                        let q = [a[0] + s * (b[0] - a[0]), a[1] + s * (b[1] - a[1])];
                        best = best.min(dist(p, q));
                    }
                }
                best
            }
            _ => (0..samples)
                .map(|k| dist(p, shape.curve_point(2.0 * PI * k as f64 / samples as f64)))
                .fold(f64::INFINITY, f64::min),
        }
    }

    #[test]
    fn random_polygon_distance_matches_dense_sampling() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..5 {
            // star-shaped random polygon around (0, 0.5)
            let n = 9;
            let vertices: Vec<Point> = (0..n)
                .map(|k| {
                    let th = 2.0 * PI * k as f64 / n as f64;
                    let r = rng.gen_range(0.1..0.3);
                    [r * th.cos(), 0.5 + r * th.sin()]
                })
                .collect();
            let shape = CavityShape::Polygon { vertices };
            let p = [rng.gen_range(-1.0..1.0), 1.2];
            let exact = cavity_distance(p, &shape).unwrap();
            let sampled = brute_force_distance(p, &shape, 1_000_000);
            assert!((exact - sampled).abs() < 1e-4, "{exact} vs {sampled}");
            assert!(exact <= sampled + 1e-15);
        }
    }

    #[test]
    fn ellipse_and_star_distance_match_dense_sampling() {
        let shapes = [
            CavityShape::Ellipse { center: [0.1, 0.5], semi_axes: [0.3, 0.12], rotation: 0.4 },
            CavityShape::RadialStar { center: [0.0, 0.5], mean: 0.2, cos: vec![0.0, 0.1], sin: vec![0.02] },
        ];
        for shape in &shapes {
            for p in [[0.0, 1.2], [0.7, 1.1], [-0.5, -0.3], [0.0, 0.5 + 0.05]] {
                if shape.contains(p) {
                    continue;
                }
                let exact = cavity_distance(p, shape).unwrap();
                let sampled = brute_force_distance(p, shape, 200_000);
                assert!((exact - sampled).abs() < 1e-6, "{shape:?} {p:?}: {exact} vs {sampled}");
            }
        }
    }
}

//! Slab, cavity shapes and the nested triangulations the solver runs on.

mod cavity;
mod delaunay;
mod mesh;

pub use cavity::{cavity_distance, polygonize_cavity, CavityPolygon, CavityShape};
pub use mesh::{
    build_nested_meshes, BoundaryEdge, BoundaryTag, MeshOptions, MeshStats, NestedMeshPair,
    TriMesh,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Point = [f64; 2];

#[inline]
pub fn sub(a: Point, b: Point) -> Point {
    [a[0] - b[0], a[1] - b[1]]
}

#[inline]
pub fn dot(a: Point, b: Point) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

#[inline]
pub fn cross(a: Point, b: Point) -> f64 {
    a[0] * b[1] - a[1] * b[0]
}

#[inline]
pub fn norm(a: Point) -> f64 {
    a[0].hypot(a[1])
}

#[inline]
pub fn dist(a: Point, b: Point) -> f64 {
    norm(sub(a, b))
}

/// Distance from `p` to the closed segment `[a, b]`.
pub fn point_segment_distance(p: Point, a: Point, b: Point) -> f64 {
    let ab = sub(b, a);
    let len2 = dot(ab, ab);
    if len2 == 0.0 {
        return dist(p, a);
    }
    let s = (dot(sub(p, a), ab) / len2).clamp(0.0, 1.0);
    dist(p, [a[0] + s * ab[0], a[1] + s * ab[1]])
}

/// Signed shoelace area; positive for counterclockwise vertex order.
pub fn polygon_area(vertices: &[Point]) -> f64 {
    let n = vertices.len();
    let mut twice = 0.0;
    for i in 0..n {
        twice += cross(vertices[i], vertices[(i + 1) % n]);
    }
    0.5 * twice
}

/// Even-odd point-in-polygon test. Points on the boundary may go either way.
pub fn point_in_polygon(p: Point, vertices: &[Point]) -> bool {
    let n = vertices.len();
    let mut inside = false;
    let mut j = n.wrapping_sub(1);
    for i in 0..n {
        let (a, b) = (vertices[i], vertices[j]);
        if (a[1] > p[1]) != (b[1] > p[1]) {
            let x = a[0] + (p[1] - a[1]) * (b[0] - a[0]) / (b[1] - a[1]);
            if p[0] < x {
                inside = !inside;
            }
        }
        j = i;
    }
    inside
}

/// Distance from `p` to the boundary of a closed polygon.
pub fn polygon_boundary_distance(p: Point, vertices: &[Point]) -> f64 {
    let n = vertices.len();
    (0..n)
        .map(|i| point_segment_distance(p, vertices[i], vertices[(i + 1) % n]))
        .fold(f64::INFINITY, f64::min)
}

fn orient(a: Point, b: Point, c: Point) -> f64 {
    robust::orient2d(
        robust::Coord { x: a[0], y: a[1] },
        robust::Coord { x: b[0], y: b[1] },
        robust::Coord { x: c[0], y: c[1] },
    )
}

/// Whether closed segments `[a, b]` and `[c, d]` share a point.
pub fn segments_intersect(a: Point, b: Point, c: Point, d: Point) -> bool {
    let d1 = orient(c, d, a);
    let d2 = orient(c, d, b);
    let d3 = orient(a, b, c);
    let d4 = orient(a, b, d);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
    {
        return true;
    }
    let on = |p: Point, q: Point, r: Point| {
        p[0].min(q[0]) <= r[0] && r[0] <= p[0].max(q[0]) && p[1].min(q[1]) <= r[1] && r[1] <= p[1].max(q[1])
    };
    (d1 == 0.0 && on(c, d, a))
        || (d2 == 0.0 && on(c, d, b))
        || (d3 == 0.0 && on(a, b, c))
        || (d4 == 0.0 && on(a, b, d))
}

/// Returns the first pair of non-adjacent crossing edges, if any.
pub fn find_self_intersection(vertices: &[Point]) -> Option<(usize, usize)> {
    let n = vertices.len();
    for i in 0..n {
        let (a, b) = (vertices[i], vertices[(i + 1) % n]);
        for j in i + 1..n {
            if j == i + 1 || (i == 0 && j == n - 1) {
                continue;
            }
            let (c, d) = (vertices[j], vertices[(j + 1) % n]);
            if segments_intersect(a, b, c, d) {
                return Some((i, j));
            }
        }
    }
    None
}

/// Counterclockwise convex hull (Andrew's monotone chain).
pub fn convex_hull(points: &[Point]) -> Vec<Point> {
    let mut pts = points.to_vec();
    pts.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let mut hull: Vec<Point> = Vec::with_capacity(2 * pts.len());
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &Point>> = if pass == 0 {
            Box::new(pts.iter())
        } else {
            Box::new(pts.iter().rev())
        };
        for &p in iter {
            while hull.len() >= start + 2
                && orient(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0
            {
                hull.pop();
            }
            hull.push(p);
        }
        hull.pop();
    }
    hull
}

/// The truncated slab `(-W, W) × (d1, d2)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlabGeometry {
    pub d1: f64,
    pub d2: f64,
    pub halfwidth: f64,
}

impl SlabGeometry {
    pub fn new(d1: f64, d2: f64, halfwidth: f64) -> Result<Self> {
        let slab = Self { d1, d2, halfwidth };
        slab.validate()?;
        Ok(slab)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.d1.is_finite() && self.d2.is_finite() && self.halfwidth.is_finite()) {
            return Err(Error::Invalid("slab bounds must be finite".into()));
        }
        if self.d1 >= self.d2 {
            return Err(Error::Invalid(format!(
                "slab requires d1 < d2 (got d1 = {}, d2 = {})",
                self.d1, self.d2
            )));
        }
        if self.halfwidth <= 0.0 {
            return Err(Error::Invalid(format!(
                "slab halfwidth must be positive (got {})",
                self.halfwidth
            )));
        }
        Ok(())
    }

    /// Meshing is two-dimensional only.
    pub fn dim(&self) -> usize {
        2
    }

    pub fn thickness(&self) -> f64 {
        self.d2 - self.d1
    }

    pub fn area(&self) -> f64 {
        2.0 * self.halfwidth * self.thickness()
    }

    /// Distance from `p` to the infinite strip `d1 <= y <= d2`; zero inside.
    pub fn strip_distance(&self, p: Point) -> f64 {
        if p[1] > self.d2 {
            p[1] - self.d2
        } else if p[1] < self.d1 {
            self.d1 - p[1]
        } else {
            0.0
        }
    }

    /// Distance from `p` to the face farther away from it.
    pub fn far_face_distance(&self, p: Point) -> f64 {
        (p[1] - self.d1).abs().max((p[1] - self.d2).abs())
    }

    /// Whether `p` is strictly inside the truncated rectangle, at least `margin` from its boundary.
    pub fn contains_with_margin(&self, p: Point, margin: f64) -> bool {
        p[0] > -self.halfwidth + margin
            && p[0] < self.halfwidth - margin
            && p[1] > self.d1 + margin
            && p[1] < self.d2 - margin
    }

    /// Automatic lateral truncation `|p_x| + t + δ + 2 (d2 - d1)` maximized over the probes.
    pub fn auto_halfwidth(d1: f64, d2: f64, probes: &[Point], t_max: f64, delta_max: f64) -> f64 {
        let px = probes.iter().map(|p| p[0].abs()).fold(0.0, f64::max);
        px + t_max + delta_max + 2.0 * (d2 - d1)
    }

    pub fn corners(&self) -> [Point; 4] {
        let w = self.halfwidth;
        [[-w, self.d1], [w, self.d1], [w, self.d2], [-w, self.d2]]
    }
}

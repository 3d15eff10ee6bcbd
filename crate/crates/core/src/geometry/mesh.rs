use std::collections::BTreeMap;
use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::cavity::CavityPolygon;
use super::delaunay::{RefineParams, Triangulation};
use super::{dist, polygon_area, Point, SlabGeometry};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum BoundaryTag {
    SlabTop,
    SlabBottom,
    Lateral,
    Cavity,
}

impl BoundaryTag {
    pub fn as_str(self) -> &'static str {
        match self {
            BoundaryTag::SlabTop => "SLAB_TOP",
            BoundaryTag::SlabBottom => "SLAB_BOTTOM",
            BoundaryTag::Lateral => "LATERAL",
            BoundaryTag::Cavity => "CAVITY",
        }
    }

    /// Faces of the truncated rectangle carry Dirichlet data; the cavity is insulating.
    pub fn is_dirichlet(self) -> bool {
        !matches!(self, BoundaryTag::Cavity)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BoundaryEdge {
    pub a: usize,
    pub b: usize,
    pub tag: BoundaryTag,
}

/// Conforming P1 triangulation with tagged boundary edges.
#[derive(Clone, Debug, PartialEq)]
pub struct TriMesh {
    pub vertices: Vec<Point>,
    /// Counterclockwise vertex triples.
    pub triangles: Vec<[usize; 3]>,
    pub boundary_edges: Vec<BoundaryEdge>,
    pub target_edge: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MeshStats {
    pub n_vertices: usize,
    pub n_triangles: usize,
    pub n_boundary_edges: usize,
    pub min_angle_deg: f64,
    pub min_edge: f64,
    pub max_edge: f64,
    pub area: f64,
}

impl TriMesh {
    pub fn signed_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangles[t].map(|i| self.vertices[i]);
        0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]))
    }

    pub fn area(&self) -> f64 {
        (0..self.triangles.len()).map(|t| self.signed_area(t)).sum()
    }

    pub fn centroid(&self, t: usize) -> Point {
        let [a, b, c] = self.triangles[t].map(|i| self.vertices[i]);
        [(a[0] + b[0] + c[0]) / 3.0, (a[1] + b[1] + c[1]) / 3.0]
    }

    /// Sorted nodes lying on edges with the given tag.
    pub fn nodes_with_tag(&self, tag: BoundaryTag) -> Vec<usize> {
        let mut nodes: Vec<usize> = self
            .boundary_edges
            .iter()
            .filter(|e| e.tag == tag)
            .flat_map(|e| [e.a, e.b])
            .collect();
        nodes.sort_unstable();
        nodes.dedup();
        nodes
    }

    /// Sorted nodes carrying Dirichlet data (slab faces and lateral truncation).
    pub fn dirichlet_nodes(&self) -> Vec<usize> {
        let mut nodes: Vec<usize> = self
            .boundary_edges
            .iter()
            .filter(|e| e.tag.is_dirichlet())
            .flat_map(|e| [e.a, e.b])
            .collect();
        nodes.sort_unstable();
        nodes.dedup();
        nodes
    }

    fn triangle_angles(&self, t: usize) -> [f64; 3] {
        let p = self.triangles[t].map(|i| self.vertices[i]);
        let mut out = [0.0; 3];
        for k in 0..3 {
            let (o, a, b) = (p[k], p[(k + 1) % 3], p[(k + 2) % 3]);
            let u = [a[0] - o[0], a[1] - o[1]];
            let v = [b[0] - o[0], b[1] - o[1]];
            out[k] = (u[0] * v[1] - u[1] * v[0]).atan2(u[0] * v[0] + u[1] * v[1]).abs();
        }
        out
    }

    pub fn stats(&self) -> MeshStats {
        let mut min_angle = f64::INFINITY;
        let mut min_edge = f64::INFINITY;
        let mut max_edge: f64 = 0.0;
        for (t, tri) in self.triangles.iter().enumerate() {
            for a in self.triangle_angles(t) {
                min_angle = min_angle.min(a);
            }
            for k in 0..3 {
                let l = dist(self.vertices[tri[k]], self.vertices[tri[(k + 1) % 3]]);
                min_edge = min_edge.min(l);
                max_edge = max_edge.max(l);
            }
        }
        MeshStats {
            n_vertices: self.vertices.len(),
            n_triangles: self.triangles.len(),
            n_boundary_edges: self.boundary_edges.len(),
            min_angle_deg: min_angle.to_degrees(),
            min_edge,
            max_edge,
            area: self.area(),
        }
    }

    /// Checks orientation, conformity and the boundary-tag partition.
    pub fn validate(&self) -> Result<()> {
        let mut edge_count: BTreeMap<(usize, usize), usize> = BTreeMap::new();
        for (t, tri) in self.triangles.iter().enumerate() {
            if tri.iter().any(|&i| i >= self.vertices.len()) {
                return Err(Error::Meshing(format!("triangle {t} references a missing vertex")));
            }
            if self.signed_area(t) <= 0.0 {
                return Err(Error::Meshing(format!("triangle {t} is not positively oriented")));
            }
            for k in 0..3 {
                let (a, b) = (tri[k], tri[(k + 1) % 3]);
                *edge_count.entry((a.min(b), a.max(b))).or_default() += 1;
            }
        }
        let mut tagged: BTreeMap<(usize, usize), usize> = BTreeMap::new();
        for e in &self.boundary_edges {
            *tagged.entry((e.a.min(e.b), e.a.max(e.b))).or_default() += 1;
        }
        for (edge, count) in &edge_count {
            match (*count, tagged.get(edge).copied().unwrap_or(0)) {
                (1, 1) | (2, 0) => {}
                (1, 0) => return Err(Error::Meshing(format!("boundary edge {edge:?} has no tag"))),
                (c, n) => {
                    return Err(Error::Meshing(format!(
                        "edge {edge:?} shared by {c} triangles carries {n} tags"
                    )))
                }
            }
        }
        for edge in tagged.keys() {
            if !edge_count.contains_key(edge) {
                return Err(Error::Meshing(format!("tagged edge {edge:?} is not a mesh edge")));
            }
        }
        Ok(())
    }

    /// Stable content hash of vertices, triangles and tags.
    pub fn content_hash(&self) -> u64 {
        let mut h = Sha256::new();
        for v in &self.vertices {
            h.update(v[0].to_le_bytes());
            h.update(v[1].to_le_bytes());
        }
        for t in &self.triangles {
            for &i in t {
                h.update((i as u64).to_le_bytes());
            }
        }
        for e in &self.boundary_edges {
            h.update((e.a as u64).to_le_bytes());
            h.update((e.b as u64).to_le_bytes());
            h.update([e.tag as u8]);
        }
        let digest = h.finalize();
        u64::from_le_bytes(digest[..8].try_into().unwrap())
    }

    /// ASCII export with 0-based offsets:
    ///
    /// ```text
    /// <n_vertices>
    /// x y                 (one line per vertex)
    /// <n_triangles>
    /// i j k               (counterclockwise)
    /// <n_boundary_edges>
    /// i j TAG             (TAG in SLAB_TOP, SLAB_BOTTOM, LATERAL, CAVITY)
    /// ```
    pub fn write_ascii<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "{}", self.vertices.len())?;
        for v in &self.vertices {
            writeln!(w, "{:.16e} {:.16e}", v[0], v[1])?;
        }
        writeln!(w, "{}", self.triangles.len())?;
        for t in &self.triangles {
            writeln!(w, "{} {} {}", t[0], t[1], t[2])?;
        }
        writeln!(w, "{}", self.boundary_edges.len())?;
        for e in &self.boundary_edges {
            writeln!(w, "{} {} {}", e.a, e.b, e.tag.as_str())?;
        }
        Ok(())
    }
}

/// Triangulations of `Ω∖D̄` and `Ω` sharing every node and triangle outside `D`.
///
/// `holed.vertices` is a prefix of `full.vertices` and `holed.triangles` a prefix
/// of `full.triangles`; the remaining full-mesh triangles cover the cavity.
#[derive(Clone, Debug)]
pub struct NestedMeshPair {
    pub holed: TriMesh,
    pub full: TriMesh,
    pub hole_triangles: Vec<usize>,
}

impl NestedMeshPair {
    pub fn has_cavity(&self) -> bool {
        !self.hole_triangles.is_empty()
    }

    pub fn hole_area(&self) -> f64 {
        self.hole_triangles.iter().map(|&t| self.full.signed_area(t)).sum()
    }

    /// Verifies the prefix nesting exactly (index and bitwise coordinate equality).
    pub fn validate_nesting(&self) -> Result<()> {
        let nv = self.holed.vertices.len();
        let nt = self.holed.triangles.len();
        if self.full.vertices.len() < nv || self.full.vertices[..nv] != self.holed.vertices[..] {
            return Err(Error::NotNested("holed vertices are not a prefix of the full mesh".into()));
        }
        if self.full.triangles.len() < nt || self.full.triangles[..nt] != self.holed.triangles[..] {
            return Err(Error::NotNested("holed triangles are not a prefix of the full mesh".into()));
        }
        if self.hole_triangles != (nt..self.full.triangles.len()).collect::<Vec<_>>() {
            return Err(Error::NotNested("hole triangle set must be the full-mesh suffix".into()));
        }
        let dirichlet_h: Vec<usize> = self.holed.dirichlet_nodes();
        let dirichlet_f: Vec<usize> = self.full.dirichlet_nodes();
        if dirichlet_h != dirichlet_f {
            return Err(Error::NotNested("Dirichlet nodes differ between the meshes".into()));
        }
        Ok(())
    }

    pub fn content_hash(&self) -> u64 {
        self.full.content_hash() ^ self.holed.content_hash().rotate_left(17)
    }
}

/// Meshing controls. The size field is `min(target_edge, max(min_edge, grading · dist(x, G)))`
/// where `G` are the grading centers (usually the probe points); `grading = 0` keeps it uniform.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MeshOptions {
    pub target_edge: f64,
    pub min_angle_deg: f64,
    pub cavity_segments: usize,
    pub grading: f64,
    pub min_edge: f64,
    #[serde(skip)]
    pub grading_centers: Vec<Point>,
    pub max_vertices: usize,
    pub jitter: f64,
    pub seed: u64,
}

impl Default for MeshOptions {
    fn default() -> Self {
        Self {
            target_edge: 0.05,
            min_angle_deg: 20.0,
            cavity_segments: 128,
            grading: 0.01,
            min_edge: 0.001,
            grading_centers: Vec::new(),
            max_vertices: 2_000_000,
            jitter: 0.0,
            seed: 0,
        }
    }
}

impl MeshOptions {
    pub fn uniform(target_edge: f64) -> Self {
        Self { target_edge, grading: 0.0, ..Self::default() }
    }

    pub fn size_at(&self, x: Point) -> f64 {
        if self.grading <= 0.0 || self.grading_centers.is_empty() {
            return self.target_edge;
        }
        let d = self.grading_centers.iter().map(|&c| dist(x, c)).fold(f64::INFINITY, f64::min);
        self.target_edge.min(self.min_edge.max(self.grading * d))
    }
}

/// Subdivides `[a, b]` by bisection until every piece fits the size field; returns interior points.
fn subdivide(a: Point, b: Point, size: &dyn Fn(Point) -> f64, out: &mut Vec<Point>) {
    let m = [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])];
    if dist(a, b) > size(m) {
        subdivide(a, m, size, out);
        out.push(m);
        subdivide(m, b, size, out);
    }
}

/// Builds conforming nested triangulations of the truncated slab with and without the cavity.
///
/// The cavity polygon is inserted as a constraint curve and the whole rectangle is
/// refined; triangles whose centroid lies inside the polygon form the hole set.
pub fn build_nested_meshes(
    slab: &SlabGeometry,
    cavity: Option<&CavityPolygon>,
    opts: &MeshOptions,
) -> Result<NestedMeshPair> {
    slab.validate()?;
    if !(opts.target_edge > 0.0) || !(opts.min_angle_deg > 0.0 && opts.min_angle_deg <= 30.0) {
        return Err(Error::Invalid(format!(
            "mesh needs target_edge > 0 and min angle in (0, 30] degrees (got {}, {})",
            opts.target_edge, opts.min_angle_deg
        )));
    }
    let cavity = cavity.filter(|c| !c.vertices.is_empty());
    if let Some(poly) = cavity {
        if poly.vertices.len() < 3 {
            return Err(Error::Invalid("cavity polygon needs at least 3 vertices".into()));
        }
        let margin = 1e-9 * slab.thickness();
        if let Some(v) = poly.vertices.iter().find(|&&v| !slab.contains_with_margin(v, margin)) {
            return Err(Error::Invalid(format!(
                "cavity vertex {v:?} is not strictly inside the truncated slab"
            )));
        }
        let (lo, hi) = poly.bbox();
        let feature = (hi[0] - lo[0]).min(hi[1] - lo[1]);
        if opts.target_edge > 0.5 * feature {
            return Err(Error::MeshTooCoarse { target_edge: opts.target_edge, feature_size: feature });
        }
    }

    let corners = slab.corners();
    let size = |x: Point| opts.size_at(x);
    let mut tri = Triangulation::new(corners[0], corners[2]);

    let add_curve = |tri: &mut Triangulation, pts: &[Point], closed: bool, tags: &dyn Fn(usize) -> BoundaryTag| {
        let n = pts.len();
        let edges = if closed { n } else { n - 1 };
        let first = tri.add_vertex(pts[0]);
        let mut prev = first;
        for k in 0..edges {
            let (a, b) = (pts[k], pts[(k + 1) % n]);
            let mut inner = Vec::new();
            subdivide(a, b, &size, &mut inner);
            for p in inner {
                let v = tri.add_vertex(p);
                tri.add_segment(prev, v, tags(k));
                prev = v;
            }
            let end = if closed && k + 1 == n { first } else { tri.add_vertex(b) };
            tri.add_segment(prev, end, tags(k));
            prev = end;
        }
    };
    // bottom, right, top, left
    let rect_tags = |k: usize| match k {
        0 => BoundaryTag::SlabBottom,
        2 => BoundaryTag::SlabTop,
        _ => BoundaryTag::Lateral,
    };
    add_curve(&mut tri, &corners, true, &rect_tags);
    if let Some(poly) = cavity {
        add_curve(&mut tri, &poly.vertices, true, &|_| BoundaryTag::Cavity);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let jitter = if opts.jitter > 0.0 { Some((opts.jitter, &mut rng)) } else { None };
    tri.refine(RefineParams {
        min_angle_deg: opts.min_angle_deg,
        size: &size,
        max_vertices: opts.max_vertices,
        jitter,
    })?;
    let refined = tri.finish();

    let inside: Vec<bool> = refined
        .triangles
        .iter()
        .map(|t| match cavity {
            Some(poly) => {
                let c = [
                    (refined.points[t[0]][0] + refined.points[t[1]][0] + refined.points[t[2]][0]) / 3.0,
                    (refined.points[t[0]][1] + refined.points[t[1]][1] + refined.points[t[2]][1]) / 3.0,
                ];
                poly.contains(c)
            }
            None => false,
        })
        .collect();

    // vertices touched by holed triangles first, in original order
    let n = refined.points.len();
    let mut used_outside = vec![false; n];
    for (t, tri) in refined.triangles.iter().enumerate() {
        if !inside[t] {
            tri.iter().for_each(|&i| used_outside[i] = true);
        }
    }
    let mut order: Vec<usize> = (0..n).filter(|&i| used_outside[i]).collect();
    let n_holed_vertices = order.len();
    order.extend((0..n).filter(|&i| !used_outside[i]));
    let mut new_index = vec![0usize; n];
    for (new, &old) in order.iter().enumerate() {
        new_index[old] = new;
    }
    let vertices: Vec<Point> = order.iter().map(|&i| refined.points[i]).collect();
    let remap = |t: &[usize; 3]| t.map(|i| new_index[i]);
    let mut triangles: Vec<[usize; 3]> = Vec::with_capacity(refined.triangles.len());
    triangles.extend(refined.triangles.iter().zip(&inside).filter(|(_, &ins)| !ins).map(|(t, _)| remap(t)));
    let n_holed_triangles = triangles.len();
    triangles.extend(refined.triangles.iter().zip(&inside).filter(|(_, &ins)| ins).map(|(t, _)| remap(t)));

    let mut rect_edges = Vec::new();
    let mut cavity_edges = Vec::new();
    for &(a, b, tag) in &refined.segments {
        let edge = BoundaryEdge { a: new_index[a], b: new_index[b], tag };
        if tag == BoundaryTag::Cavity {
            cavity_edges.push(edge);
        } else {
            rect_edges.push(edge);
        }
    }
    let sort_edges = |edges: &mut Vec<BoundaryEdge>| edges.sort_by_key(|e| (e.tag, e.a.min(e.b), e.a.max(e.b)));
    sort_edges(&mut rect_edges);
    sort_edges(&mut cavity_edges);

    let full = TriMesh {
        vertices: vertices.clone(),
        triangles: triangles.clone(),
        boundary_edges: rect_edges.clone(),
        target_edge: opts.target_edge,
    };
    let mut holed_edges = rect_edges;
    holed_edges.extend(cavity_edges);
    let holed = TriMesh {
        vertices: vertices[..n_holed_vertices].to_vec(),
        triangles: triangles[..n_holed_triangles].to_vec(),
        boundary_edges: holed_edges,
        target_edge: opts.target_edge,
    };
    let pair = NestedMeshPair {
        holed,
        full,
        hole_triangles: (n_holed_triangles..triangles.len()).collect(),
    };
    pair.full.validate()?;
    pair.holed.validate()?;
    pair.validate_nesting()?;
    if let Some(poly) = cavity {
        let expected = polygon_area(&poly.vertices);
        let got = pair.hole_area();
        if ((got - expected) / expected).abs() > 1e-9 {
            return Err(Error::Meshing(format!(
                "hole triangles cover area {got}, cavity polygon has {expected}"
            )));
        }
    }
    Ok(pair)
}

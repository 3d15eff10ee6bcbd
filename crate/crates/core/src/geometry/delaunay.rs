//! Conforming Delaunay refinement.
//!
//! Points are inserted with Bowyer-Watson on top of a large super triangle.
//! Input segments are recovered and kept Delaunay by midpoint splitting of any
//! missing or encroached subsegment; triangles that are too large for the size
//! field or have an angle below the floor get their circumcenter inserted unless
//! that circumcenter encroaches a subsegment, in which case the subsegment is
//! split instead. Because every subsegment ends up as a Delaunay edge, each final
//! triangle lies entirely on one side of every input curve.

use std::collections::{BTreeMap, VecDeque};

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use robust::Coord;

use super::mesh::BoundaryTag;
use super::Point;
use crate::error::{Error, Result};

const NONE: u32 = u32::MAX;

#[derive(Clone, Copy, Debug)]
struct Tri {
    v: [u32; 3],
    /// `n[i]` is the neighbor across the edge opposite `v[i]`.
    n: [u32; 3],
}

pub(crate) struct RefineParams<'a> {
    pub min_angle_deg: f64,
    pub size: &'a dyn Fn(Point) -> f64,
    pub max_vertices: usize,
    pub jitter: Option<(f64, &'a mut ChaCha8Rng)>,
}

pub(crate) struct Refined {
    pub points: Vec<Point>,
    pub triangles: Vec<[usize; 3]>,
    pub segments: Vec<(usize, usize, BoundaryTag)>,
}

pub(crate) struct Triangulation {
    pts: Vec<Point>,
    tris: Vec<Tri>,
    alive: Vec<bool>,
    free: Vec<u32>,
    vert_tri: Vec<u32>,
    segments: BTreeMap<(u32, u32), BoundaryTag>,
    /// Vertices where two input segments meet at less than 60 degrees.
    sharp: Vec<bool>,
    stamp: Vec<u32>,
    cur_stamp: u32,
    lo: Point,
    hi: Point,
}

#[inline]
fn key(a: u32, b: u32) -> (u32, u32) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

#[inline]
fn coord(p: Point) -> Coord<f64> {
    Coord { x: p[0], y: p[1] }
}

fn circumcenter(a: Point, b: Point, c: Point) -> Point {
    let (bx, by) = (b[0] - a[0], b[1] - a[1]);
    let (cx, cy) = (c[0] - a[0], c[1] - a[1]);
    let d = 2.0 * (bx * cy - by * cx);
    let b2 = bx * bx + by * by;
    let c2 = cx * cx + cy * cy;
    [a[0] + (cy * b2 - by * c2) / d, a[1] + (bx * c2 - cx * b2) / d]
}

#[inline]
fn encroaches(p: Point, a: Point, b: Point) -> bool {
    (a[0] - p[0]) * (b[0] - p[0]) + (a[1] - p[1]) * (b[1] - p[1]) < 0.0
}

impl Triangulation {
    /// Empty triangulation whose super triangle comfortably contains the box `[lo, hi]`.
    pub fn new(lo: Point, hi: Point) -> Self {
        let c = [0.5 * (lo[0] + hi[0]), 0.5 * (lo[1] + hi[1])];
        let l = (hi[0] - lo[0]).max(hi[1] - lo[1]).max(1e-12) * 100.0;
        let pts = vec![
            [c[0] - 2.0 * l, c[1] - l],
            [c[0] + 2.0 * l, c[1] - l],
            [c[0], c[1] + 2.0 * l],
        ];
        Self {
            pts,
            tris: vec![Tri { v: [0, 1, 2], n: [NONE; 3] }],
            alive: vec![true],
            free: Vec::new(),
            vert_tri: vec![0, 0, 0],
            segments: BTreeMap::new(),
            sharp: vec![false; 3],
            stamp: vec![0],
            cur_stamp: 0,
            lo,
            hi,
        }
    }

    fn is_super(&self, v: u32) -> bool {
        v < 3
    }

    fn orient(&self, a: u32, b: u32, p: Point) -> f64 {
        robust::orient2d(coord(self.pts[a as usize]), coord(self.pts[b as usize]), coord(p))
    }

    fn in_circle(&self, t: u32, p: Point) -> bool {
        let v = self.tris[t as usize].v;
        robust::incircle(
            coord(self.pts[v[0] as usize]),
            coord(self.pts[v[1] as usize]),
            coord(self.pts[v[2] as usize]),
            coord(p),
        ) > 0.0
    }

    fn any_alive(&self) -> u32 {
        self.alive.iter().position(|&a| a).expect("triangulation has a live triangle") as u32
    }

    /// Visibility walk to the triangle containing `p`.
    fn locate(&self, p: Point, hint: u32) -> u32 {
        let mut t = if hint != NONE && self.alive[hint as usize] { hint } else { self.any_alive() };
        let mut steps = 0usize;
        'walk: loop {
            steps += 1;
            if steps > 4 * self.tris.len() + 16 {
                // Fall back to an exhaustive search; never expected on a Delaunay mesh.
                for (i, tri) in self.tris.iter().enumerate() {
                    if self.alive[i]
                        && (0..3).all(|k| self.orient(tri.v[(k + 1) % 3], tri.v[(k + 2) % 3], p) >= 0.0)
                    {
                        return i as u32;
                    }
                }
                return t;
            }
            let tri = self.tris[t as usize];
            // rotate the starting edge to avoid cycling on degenerate configurations
            let off = steps % 3;
            for j in 0..3 {
                let k = (j + off) % 3;
                let (a, b) = (tri.v[(k + 1) % 3], tri.v[(k + 2) % 3]);
                if self.orient(a, b, p) < 0.0 && tri.n[k] != NONE {
                    t = tri.n[k];
                    continue 'walk;
                }
            }
            return t;
        }
    }

    fn next_stamp(&mut self) -> u32 {
        self.cur_stamp = self.cur_stamp.wrapping_add(1);
        if self.cur_stamp == 0 {
            self.stamp.iter_mut().for_each(|s| *s = 0);
            self.cur_stamp = 1;
        }
        self.cur_stamp
    }

    /// Triangles whose circumcircle strictly contains `p`, grown from the triangle containing it.
    fn cavity(&mut self, p: Point, start: u32) -> (Vec<u32>, u32) {
        let stamp = self.next_stamp();
        let mut cav = vec![start];
        self.stamp[start as usize] = stamp;
        let mut i = 0;
        while i < cav.len() {
            let t = cav[i];
            i += 1;
            for k in 0..3 {
                let nb = self.tris[t as usize].n[k];
                if nb != NONE && self.stamp[nb as usize] != stamp && self.in_circle(nb, p) {
                    self.stamp[nb as usize] = stamp;
                    cav.push(nb);
                }
            }
        }
        (cav, stamp)
    }

    fn alloc(&mut self, tri: Tri) -> u32 {
        if let Some(t) = self.free.pop() {
            self.tris[t as usize] = tri;
            self.alive[t as usize] = true;
            t
        } else {
            self.tris.push(tri);
            self.alive.push(true);
            self.stamp.push(0);
            (self.tris.len() - 1) as u32
        }
    }

    /// Inserts `p`, returning the new vertex and the triangles created.
    /// Segments whose edge was swallowed by the cavity are appended to `lost`.
    fn insert(&mut self, p: Point, hint: u32, lost: &mut Vec<(u32, u32)>) -> (u32, Vec<u32>) {
        let start = self.locate(p, hint);
        for &v in &self.tris[start as usize].v {
            if self.pts[v as usize] == p {
                return (v, Vec::new());
            }
        }
        let (cav, stamp) = self.cavity(p, start);
        let vid = self.pts.len() as u32;
        self.pts.push(p);
        self.vert_tri.push(NONE);
        self.sharp.push(false);

        // boundary edges (a, b) oriented counterclockwise around the cavity
        let mut boundary: Vec<(u32, u32, u32)> = Vec::new();
        for &t in &cav {
            let tri = self.tris[t as usize];
            for k in 0..3 {
                let (a, b) = (tri.v[(k + 1) % 3], tri.v[(k + 2) % 3]);
                let nb = tri.n[k];
                if nb == NONE || self.stamp[nb as usize] != stamp {
                    boundary.push((a, b, nb));
                } else if a < b && self.segments.contains_key(&key(a, b)) {
                    lost.push(key(a, b));
                }
            }
        }
        for &t in &cav {
            self.alive[t as usize] = false;
            self.free.push(t);
        }
        let mut created = Vec::with_capacity(boundary.len());
        for &(a, b, nb) in &boundary {
            let t = self.alloc(Tri { v: [a, b, vid], n: [NONE, NONE, nb] });
            if nb != NONE {
                let ntri = &mut self.tris[nb as usize];
                for j in 0..3 {
                    let (x, y) = (ntri.v[(j + 1) % 3], ntri.v[(j + 2) % 3]);
                    if x == b && y == a {
                        ntri.n[j] = t;
                    }
                }
            }
            created.push(t);
        }
        // link the fan around the new vertex
        for (i, &(a, b, _)) in boundary.iter().enumerate() {
            let t = created[i];
            for (j, &(c, d, _)) in boundary.iter().enumerate() {
                if d == a {
                    // (c, a, p) shares edge (p, a) with (a, b, p)
                    self.tris[t as usize].n[1] = created[j];
                }
                if c == b {
                    // (b, d, p) shares edge (b, p)
                    self.tris[t as usize].n[0] = created[j];
                }
            }
        }
        for &t in &created {
            for &v in &self.tris[t as usize].v {
                self.vert_tri[v as usize] = t;
            }
        }
        (vid, created)
    }

    /// Triangles incident to vertex `a` (which must not be a super vertex).
    fn around(&self, a: u32) -> Vec<u32> {
        let start = self.vert_tri[a as usize];
        let mut out = Vec::with_capacity(8);
        let mut t = start;
        loop {
            out.push(t);
            let tri = self.tris[t as usize];
            let k = tri.v.iter().position(|&v| v == a).expect("vertex in its triangle");
            // cross the edge (a, v[k+1]), opposite v[k+2]
            let next = tri.n[(k + 2) % 3];
            if next == NONE || next == start || out.len() > 1024 {
                break;
            }
            t = next;
        }
        out
    }

    /// Apex vertices of the (at most two) triangles sharing edge `a-b`; empty if the edge is missing.
    fn edge_apexes(&self, a: u32, b: u32) -> Vec<u32> {
        let mut apexes = Vec::with_capacity(2);
        for t in self.around(a) {
            let v = self.tris[t as usize].v;
            if v.contains(&b) {
                apexes.push(*v.iter().find(|&&x| x != a && x != b).unwrap());
            }
        }
        apexes
    }

    fn segment_needs_split(&self, a: u32, b: u32) -> bool {
        let apexes = self.edge_apexes(a, b);
        if apexes.is_empty() {
            return true;
        }
        let (pa, pb) = (self.pts[a as usize], self.pts[b as usize]);
        apexes.iter().any(|&c| !self.is_super(c) && encroaches(self.pts[c as usize], pa, pb))
    }

    pub fn add_vertex(&mut self, p: Point) -> u32 {
        let hint = self.vert_tri.last().copied().unwrap_or(NONE);
        let mut lost = Vec::new();
        self.insert(p, hint, &mut lost).0
    }

    pub fn add_segment(&mut self, a: u32, b: u32, tag: BoundaryTag) {
        self.segments.insert(key(a, b), tag);
    }

    fn mark_sharp_vertices(&mut self) {
        let mut incident: BTreeMap<u32, Vec<u32>> = BTreeMap::new();
        for &(a, b) in self.segments.keys() {
            incident.entry(a).or_default().push(b);
            incident.entry(b).or_default().push(a);
        }
        for (v, nbrs) in incident {
            let p = self.pts[v as usize];
            for i in 0..nbrs.len() {
                for j in i + 1..nbrs.len() {
                    let (a, b) = (self.pts[nbrs[i] as usize], self.pts[nbrs[j] as usize]);
                    let u = [a[0] - p[0], a[1] - p[1]];
                    let w = [b[0] - p[0], b[1] - p[1]];
                    let cosang = (u[0] * w[0] + u[1] * w[1]) / (u[0].hypot(u[1]) * w[0].hypot(w[1]));
                    if cosang > 0.5 {
                        self.sharp[v as usize] = true;
                    }
                }
            }
        }
    }

    fn split_segment(
        &mut self,
        a: u32,
        b: u32,
        seg_queue: &mut VecDeque<(u32, u32)>,
        tri_queue: &mut VecDeque<(u32, [u32; 3])>,
        min_len: f64,
    ) -> Result<()> {
        let tag = match self.segments.remove(&key(a, b)) {
            Some(tag) => tag,
            None => return Ok(()),
        };
        let (pa, pb) = (self.pts[a as usize], self.pts[b as usize]);
        if (pa[0] - pb[0]).hypot(pa[1] - pb[1]) < min_len {
            return Err(Error::Meshing(format!(
                "segment splitting below minimum length near {pa:?}; input angles too sharp"
            )));
        }
        let m = [0.5 * (pa[0] + pb[0]), 0.5 * (pa[1] + pb[1])];
        let mut lost = Vec::new();
        let (vid, created) = self.insert(m, self.vert_tri[a as usize], &mut lost);
        self.segments.insert(key(a, vid), tag);
        self.segments.insert(key(vid, b), tag);
        seg_queue.push_back(key(a, vid));
        seg_queue.push_back(key(vid, b));
        self.after_insert(&created, &lost, seg_queue, tri_queue);
        Ok(())
    }

    fn after_insert(
        &self,
        created: &[u32],
        lost: &[(u32, u32)],
        seg_queue: &mut VecDeque<(u32, u32)>,
        tri_queue: &mut VecDeque<(u32, [u32; 3])>,
    ) {
        seg_queue.extend(lost.iter().copied());
        for &t in created {
            let v = self.tris[t as usize].v;
            tri_queue.push_back((t, v));
            for k in 0..3 {
                let e = key(v[(k + 1) % 3], v[(k + 2) % 3]);
                if self.segments.contains_key(&e) {
                    seg_queue.push_back(e);
                }
            }
        }
    }

    fn is_bad(&self, v: [u32; 3], min_sin: f64, size: &dyn Fn(Point) -> f64) -> bool {
        let p = [self.pts[v[0] as usize], self.pts[v[1] as usize], self.pts[v[2] as usize]];
        let l = [
            (p[1][0] - p[2][0]).hypot(p[1][1] - p[2][1]),
            (p[2][0] - p[0][0]).hypot(p[2][1] - p[0][1]),
            (p[0][0] - p[1][0]).hypot(p[0][1] - p[1][1]),
        ];
        let centroid = [(p[0][0] + p[1][0] + p[2][0]) / 3.0, (p[0][1] + p[1][1] + p[2][1]) / 3.0];
        let lmax = l[0].max(l[1]).max(l[2]);
        if lmax > size(centroid) {
            return true;
        }
        // smallest angle sits opposite the shortest edge
        let (kmin, lmin) = l
            .iter()
            .enumerate()
            .fold((0, f64::INFINITY), |acc, (k, &x)| if x < acc.1 { (k, x) } else { acc });
        if self.sharp[v[kmin] as usize] {
            return false;
        }
        let area2 = ((p[1][0] - p[0][0]) * (p[2][1] - p[0][1]) - (p[1][1] - p[0][1]) * (p[2][0] - p[0][0])).abs();
        // sin(θ_min) = l_min / (2R) with R = l0 l1 l2 / (2 |cross|)
        let sin_min = lmin * area2 / (l[0] * l[1] * l[2]);
        sin_min < min_sin
    }

    /// Runs segment recovery and quality refinement to completion.
    pub fn refine(&mut self, params: RefineParams<'_>) -> Result<()> {
        let RefineParams { min_angle_deg, size, max_vertices, mut jitter } = params;
        self.mark_sharp_vertices();
        let min_sin = min_angle_deg.to_radians().sin();
        let span = (self.hi[0] - self.lo[0]).max(self.hi[1] - self.lo[1]);
        let min_len = 1e-10 * span;
        let mut seg_queue: VecDeque<(u32, u32)> = self.segments.keys().copied().collect();
        let mut tri_queue: VecDeque<(u32, [u32; 3])> = (0..self.tris.len() as u32)
            .filter(|&t| self.alive[t as usize])
            .map(|t| (t, self.tris[t as usize].v))
            .collect();
        let inside_box = |p: Point, lo: Point, hi: Point| {
            p[0] >= lo[0] && p[0] <= hi[0] && p[1] >= lo[1] && p[1] <= hi[1]
        };
        loop {
            if self.pts.len() > max_vertices {
                return Err(Error::Meshing(format!(
                    "vertex budget of {max_vertices} exhausted; coarsen the size field"
                )));
            }
            if let Some((a, b)) = seg_queue.pop_front() {
                if self.segments.contains_key(&(a, b)) && self.segment_needs_split(a, b) {
                    self.split_segment(a, b, &mut seg_queue, &mut tri_queue, min_len)?;
                }
                continue;
            }
            let Some((t, v)) = tri_queue.pop_front() else { break };
            if !self.alive[t as usize] || self.tris[t as usize].v != v {
                continue;
            }
            if v.iter().any(|&x| self.is_super(x)) || !self.is_bad(v, min_sin, size) {
                continue;
            }
            let (pa, pb, pc) = (self.pts[v[0] as usize], self.pts[v[1] as usize], self.pts[v[2] as usize]);
            let mut c = circumcenter(pa, pb, pc);
            if let Some((amount, rng)) = jitter.as_mut() {
                let lmin = (pa[0] - pb[0]).hypot(pa[1] - pb[1]).min((pb[0] - pc[0]).hypot(pb[1] - pc[1]));
                let shifted = [
                    c[0] + *amount * lmin * rng.gen_range(-0.5..0.5),
                    c[1] + *amount * lmin * rng.gen_range(-0.5..0.5),
                ];
                if self.locate(shifted, t) == self.locate(c, t) {
                    c = shifted;
                }
            }
            if !c[0].is_finite() || !c[1].is_finite() || !inside_box(c, self.lo, self.hi) {
                continue;
            }
            let start = self.locate(c, t);
            let (cav, _) = self.cavity(c, start);
            let mut encroached = Vec::new();
            for &ct in &cav {
                let tv = self.tris[ct as usize].v;
                for k in 0..3 {
                    let e = key(tv[(k + 1) % 3], tv[(k + 2) % 3]);
                    if self.segments.contains_key(&e)
                        && encroaches(c, self.pts[e.0 as usize], self.pts[e.1 as usize])
                        && !encroached.contains(&e)
                    {
                        encroached.push(e);
                    }
                }
            }
            if !encroached.is_empty() {
                for (a, b) in encroached {
                    self.split_segment(a, b, &mut seg_queue, &mut tri_queue, min_len)?;
                }
                tri_queue.push_back((t, v));
                continue;
            }
            let mut lost = Vec::new();
            let (_, created) = self.insert(c, start, &mut lost);
            self.after_insert(&created, &lost, &mut seg_queue, &mut tri_queue);
        }
        Ok(())
    }

    /// Drops the super triangle and returns the triangulation of the input box.
    pub fn finish(self) -> Refined {
        let mut remap = vec![usize::MAX; self.pts.len()];
        let mut points = Vec::with_capacity(self.pts.len() - 3);
        for (i, p) in self.pts.iter().enumerate().skip(3) {
            remap[i] = points.len();
            points.push(*p);
        }
        let mut triangles = Vec::new();
        for (t, tri) in self.tris.iter().enumerate() {
            if self.alive[t] && tri.v.iter().all(|&v| v >= 3) {
                triangles.push([remap[tri.v[0] as usize], remap[tri.v[1] as usize], remap[tri.v[2] as usize]]);
            }
        }
        let segments = self
            .segments
            .iter()
            .map(|(&(a, b), &tag)| (remap[a as usize], remap[b as usize], tag))
            .collect();
        Refined { points, triangles, segments }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_square(size: f64) -> Refined {
        let mut tri = Triangulation::new([0.0, 0.0], [1.0, 1.0]);
        let corners = [[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]];
        let ids: Vec<u32> = corners.iter().map(|&p| tri.add_vertex(p)).collect();
        for k in 0..4 {
            tri.add_segment(ids[k], ids[(k + 1) % 4], BoundaryTag::Lateral);
        }
        let f = move |_: Point| size;
        tri.refine(RefineParams { min_angle_deg: 20.0, size: &f, max_vertices: 100_000, jitter: None })
            .unwrap();
        tri.finish()
    }

    #[test]
    fn square_refinement_covers_area_with_good_angles() {
        let r = unit_square(0.1);
        let mut area = 0.0;
        for t in &r.triangles {
            let (a, b, c) = (r.points[t[0]], r.points[t[1]], r.points[t[2]]);
            let cr = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]);
            assert!(cr > 0.0);
            area += 0.5 * cr;
        }
        assert!((area - 1.0).abs() < 1e-12);
        assert!(r.triangles.len() > 150);
        // every subsegment lies on the square boundary
        for &(a, b, _) in &r.segments {
            for p in [r.points[a], r.points[b]] {
                let on = p[0] == 0.0 || p[0] == 1.0 || p[1] == 0.0 || p[1] == 1.0;
                assert!(on, "{p:?}");
            }
        }
    }
}

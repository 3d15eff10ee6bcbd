//! Marching squares on the cell-centre lattice of a [`RegionMask`].

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::RegionMask;
use crate::error::{Error, Result};
use crate::geometry::Point;

/// Polyline separating CARVED from POSSIBLE cells.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Polyline {
    pub points: Vec<Point>,
    pub closed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundaryEstimate {
    pub curves: Vec<Polyline>,
}

impl BoundaryEstimate {
    pub fn n_vertices(&self) -> usize {
        self.curves.iter().map(|c| c.points.len()).sum()
    }

    pub fn vertices(&self) -> impl Iterator<Item = Point> + '_ {
        self.curves.iter().flat_map(|c| c.points.iter().copied())
    }

    /// Distance from `x` to the nearest polyline segment.
    pub fn distance_to(&self, x: Point) -> f64 {
        let mut best = f64::INFINITY;
        for c in &self.curves {
            let n = c.points.len();
            let segs = if c.closed { n } else { n.saturating_sub(1) };
            if n == 1 {
                best = best.min(crate::geometry::dist(x, c.points[0]));
            }
            for i in 0..segs {
                best = best.min(crate::geometry::point_segment_distance(x, c.points[i], c.points[(i + 1) % n]));
            }
        }
        best
    }

    /// Writes `curve_id,vertex_index,x,y`.
    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "curve_id,vertex_index,x,y")?;
        for (k, c) in self.curves.iter().enumerate() {
            for (i, p) in c.points.iter().enumerate() {
                writeln!(w, "{k},{i},{:.16e},{:.16e}", p[0], p[1])?;
            }
        }
        Ok(())
    }
}

/// Lattice edge between two adjacent cell centres: `(dir, i, j)` with `dir = 0`
/// joining `(i, j)`–`(i+1, j)` and `dir = 1` joining `(i, j)`–`(i, j+1)`.
type EdgeKey = (u8, usize, usize);

/// Contours between carved and possible cells; vertices sit at the midpoints of
/// lattice edges whose two cells carry different flags.
pub fn extract_boundary(mask: &RegionMask) -> Result<BoundaryEstimate> {
    let carved = mask.n_carved();
    if carved == 0 {
        return Err(Error::DegenerateMask("POSSIBLE"));
    }
    if carved == mask.carved.len() {
        return Err(Error::DegenerateMask("CARVED"));
    }
    let (nx, ny) = mask.shape;
    let midpoint = |k: EdgeKey| -> Point {
        let a = mask.cell_center(k.1, k.2);
        let b = if k.0 == 0 { mask.cell_center(k.1 + 1, k.2) } else { mask.cell_center(k.1, k.2 + 1) };
        [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])]
    };
    let mut adj: BTreeMap<EdgeKey, Vec<EdgeKey>> = BTreeMap::new();
    let mut link = |a: EdgeKey, b: EdgeKey| {
        adj.entry(a).or_default().push(b);
        adj.entry(b).or_default().push(a);
    };
    for j in 0..ny.saturating_sub(1) {
        for i in 0..nx.saturating_sub(1) {
            let fa = mask.is_carved(i, j);
            let fb = mask.is_carved(i + 1, j);
            let fc = mask.is_carved(i + 1, j + 1);
            let fd = mask.is_carved(i, j + 1);
            let bottom = (0u8, i, j);
            let right = (1u8, i + 1, j);
            let top = (0u8, i, j + 1);
            let left = (1u8, i, j);
            let mut cut = Vec::with_capacity(4);
            if fa != fb {
                cut.push(bottom);
            }
            if fb != fc {
                cut.push(right);
            }
            if fc != fd {
                cut.push(top);
            }
            if fd != fa {
                cut.push(left);
            }
            match cut.len() {
                0 => {}
                2 => link(cut[0], cut[1]),
                4 => {
                    if fa {
                        link(bottom, right);
                        link(top, left);
                    } else {
                        link(bottom, left);
                        link(right, top);
                    }
                }
                _ => unreachable!("a square has an even number of sign changes"),
            }
        }
    }
    let mut visited: BTreeMap<EdgeKey, bool> = adj.keys().map(|&k| (k, false)).collect();
    let mut curves = Vec::new();
    let walk = |start: EdgeKey, visited: &mut BTreeMap<EdgeKey, bool>| -> (Vec<EdgeKey>, bool) {
        let mut chain = vec![start];
        visited.insert(start, true);
        let mut prev: Option<EdgeKey> = None;
        let mut cur = start;
        loop {
            let next = adj[&cur].iter().copied().find(|&n| Some(n) != prev && !visited[&n]);
            match next {
                Some(n) => {
                    visited.insert(n, true);
                    chain.push(n);
                    prev = Some(cur);
                    cur = n;
                }
                None => {
                    let closed = chain.len() > 2 && adj[&cur].contains(&start);
                    return (chain, closed);
                }
            }
        }
    };
    let ends: Vec<EdgeKey> = adj.iter().filter(|(_, v)| v.len() == 1).map(|(&k, _)| k).collect();
    for k in ends {
        if !visited[&k] {
            let (chain, _) = walk(k, &mut visited);
            curves.push(Polyline { points: chain.into_iter().map(midpoint).collect(), closed: false });
        }
    }
    let keys: Vec<EdgeKey> = adj.keys().copied().collect();
    for k in keys {
        if !visited[&k] {
            let (chain, closed) = walk(k, &mut visited);
            curves.push(Polyline { points: chain.into_iter().map(midpoint).collect(), closed });
        }
    }
    Ok(BoundaryEstimate { curves })
}

//! Enclosure-type cavity reconstruction in a conductive slab.
//!
//! Complex spherical waves `γ^{-1/2} (t/|x-p|)^{1/h} e^{-iψ/h} a` are used as
//! Dirichlet data on the faces of a truncated slab. The energy gap between the
//! cavity-free and the cavity Dirichlet-to-Neumann maps decays or grows
//! exponentially in `1/h` depending on whether the probing front `|x-p| = t`
//! misses or cuts the cavity. Bisection on `t` recovers `dist(p, D)` and a sweep
//! over probe points carves the visible envelope of the cavity.
//!
//! Module map:
//! - [`geometry`]: slab, cavity shapes, nested conforming triangulations
//! - [`probe`]: phases, amplitude, cutoff, semiclassical grid, boundary data
//! - [`solver`]: P1 finite elements, Dirichlet energies, energy gap
//! - [`indicator`]: indicator series, slope fits, classification, distance bisection
//! - [`reconstruct`]: probe sweeps, carving, contour extraction, metrics
//! - [`cli`]: configuration, orchestration and file output

pub mod cli;
pub mod error;
pub mod geometry;
pub mod indicator;
pub mod par;
pub mod probe;
pub mod reconstruct;
pub mod scene;
pub mod solver;

pub use error::{Error, Result};
pub use scene::Scene;

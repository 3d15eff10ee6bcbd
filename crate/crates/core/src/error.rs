use thiserror::Error;

use crate::geometry::Point;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("singular point: x coincides with the probe center {0:?}")]
    SingularPoint(Point),
    #[error("self-intersecting polygon (edges {0} and {1} cross)")]
    SelfIntersecting(usize, usize),
    #[error("point {0:?} lies inside the cavity")]
    InsideCavity(Point),
    #[error("mesh too coarse for cavity: target edge {target_edge} exceeds feature size {feature_size}")]
    MeshTooCoarse { target_edge: f64, feature_size: f64 },
    #[error("mesh generation failed: {0}")]
    Meshing(String),
    #[error("mesh or gamma invalid: {0}")]
    NotSpd(String),
    #[error("mesh mismatch: field has {field} nodes, mesh has {mesh}")]
    MeshMismatch { field: usize, mesh: usize },
    #[error("meshes not nested: {0}")]
    NotNested(String),
    #[error("increase halfwidth: probing ball of radius {radius} around {center:?} reaches the lateral faces at x = ±{halfwidth}")]
    IncreaseHalfwidth { center: Point, radius: f64, halfwidth: f64 },
    #[error("insufficient signal: {usable} usable entries, need at least 3")]
    InsufficientSignal { usable: usize },
    #[error("cavity not detectable from p = {0:?}")]
    NotDetectable(Point),
    #[error("nothing to carve: no probe has a detected distance")]
    NothingToCarve,
    #[error("degenerate mask: every cell is {0}")]
    DegenerateMask(&'static str),
    #[error("invalid configuration:\n  {}", .0.join("\n  "))]
    Config(Vec<String>),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Toml(#[from] toml::de::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

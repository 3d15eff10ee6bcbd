//! A meshed and factorized forward problem: slab, optional cavity and conductivity.

use crate::error::{Error, Result};
use crate::geometry::{
    build_nested_meshes, polygonize_cavity, CavityPolygon, CavityShape, MeshOptions, NestedMeshPair,
    SlabGeometry,
};
use crate::probe::GammaField;
use crate::solver::{FactorCache, PairSystem};

/// Everything needed to evaluate energy gaps for arbitrary probe data.
///
/// Meshes and factorizations are built once; the scene is immutable afterwards
/// and can be shared across threads.
pub struct Scene {
    pub slab: SlabGeometry,
    pub cavity: Option<CavityShape>,
    pub polygon: Option<CavityPolygon>,
    pub gamma: GammaField,
    pub mesh_options: MeshOptions,
    pub pair: NestedMeshPair,
    pub system: PairSystem,
}

impl Scene {
    pub fn build(
        slab: SlabGeometry,
        cavity: Option<CavityShape>,
        gamma: GammaField,
        mesh_options: &MeshOptions,
    ) -> Result<Self> {
        Self::build_cached(slab, cavity, gamma, mesh_options, &FactorCache::new())
    }

    pub fn build_cached(
        slab: SlabGeometry,
        cavity: Option<CavityShape>,
        gamma: GammaField,
        mesh_options: &MeshOptions,
        cache: &FactorCache,
    ) -> Result<Self> {
        slab.validate()?;
        gamma.validate()?;
        let polygon = match &cavity {
            Some(shape) => {
                shape.validate()?;
                let (lo, hi) = shape.bbox();
                if !(lo[1] > slab.d1 && hi[1] < slab.d2 && lo[0] > -slab.halfwidth && hi[0] < slab.halfwidth) {
                    return Err(Error::Invalid(format!(
                        "cavity bounding box {lo:?}..{hi:?} is not strictly inside the truncated slab"
                    )));
                }
                Some(polygonize_cavity(shape, mesh_options.cavity_segments)?)
            }
            None => None,
        };
        let pair = build_nested_meshes(&slab, polygon.as_ref(), mesh_options)?;
        let system = cache.pair(&pair, &gamma)?;
        Ok(Self { slab, cavity, polygon, gamma, mesh_options: mesh_options.clone(), pair, system })
    }

    pub fn has_cavity(&self) -> bool {
        self.polygon.is_some()
    }

    /// Nominal mesh edge length used in tolerances.
    pub fn mesh_edge(&self) -> f64 {
        self.mesh_options.target_edge
    }
}

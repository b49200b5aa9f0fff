//! Footprint normal-distribution evaluation on high-resolution normal maps.
//!
//! A normal map is treated as a triangulated 2D manifold in position-normal
//! space. Evaluating the normal distribution of a footprint then reduces to
//! point-in-triangle tests over the triangles covered by the footprint
//! kernel, each contributing its kernel weight divided by the interpolation
//! Jacobian. A min-max quadtree prunes triangles that cannot contain the
//! queried normal and a least-squares cluster quadtree coarsens the mesh for
//! large footprints. The same machinery yields an analytic projected-area
//! integral (boundary line/arc integrals of the visible clipped normal
//! triangles), Smith shadow-masking, a fitted GGX surrogate, and an
//! aggregated diffuse BRDF used by the bundled direct-lighting renderer.
//!
//! Core math is generic over the scalar type; `f64` is the precision used by
//! the CLI and the validation suite.

pub mod area;
pub mod field;
pub mod ggx;
pub mod hierarchy;
pub mod imgio;
pub mod kernel;
pub mod math;
pub mod pndf;
pub mod render;
pub mod rng;
pub mod synth;

use std::fmt;

/// Scalar type the core math is generic over: `f32` or `f64`.
pub trait Float:
    num_traits::Float
    + num_traits::FloatConst
    + num_traits::FromPrimitive
    + fmt::Debug
    + fmt::Display
    + std::iter::Sum
    + Default
    + Send
    + Sync
    + 'static
{
}

impl Float for f32 {}
impl Float for f64 {}

/// Errors surfaced by loaders, query domain checks and file formats.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("normal lies outside the unit disk (|n| = {len})")]
    InvalidNormal { len: f64 },
    #[error("queried normal lies outside the unit disk")]
    QueryOutsideDisk,
    #[error("direction must lie in the upper hemisphere (omega_z > 0)")]
    LowerHemisphere,
    #[error("normal map resolution must be a power of two >= 2, got {width}x{height}")]
    NonPowerOfTwo { width: usize, height: usize },
    #[error("image error: {0}")]
    Image(String),
    #[error("{0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub use area::{
    arc_integral, build_clipped_boundary, canonical_rotate, clip_edge_to_ellipse, diffuse_brdf,
    line_segment_integral, projected_area, projected_area_mc, smith_g, smith_lambda,
    BoundarySegment, SegmentKind, SmithVariant,
};
pub use field::{CellId, Half, NormalField, NormalTriangle, ProjNormal};
pub use ggx::{fit_ggx, ggx_projected_area, GgxFit, GgxTable};
pub use hierarchy::{
    build_minmax, entry_level, select_cut, BuildParams, ClusterHierarchy, Cut, Hierarchy, HierRef,
    MinMaxHierarchy,
};
pub use kernel::{FootprintQuery, KernelKind};
pub use math::{Vec2, Vec3};
pub use pndf::{
    eqtri_warp, eval_pndf, intersect_normal_triangle, effective_triangle, pndf_bin_oracle,
    sample_pndf, ClampPolicy, PndfValue,
};

/// Concrete aliases for the two supported precisions.
pub type NormalField32 = field::NormalField<f32>;
pub type NormalField64 = field::NormalField<f64>;
pub type Hierarchy32 = hierarchy::Hierarchy<f32>;
pub type Hierarchy64 = hierarchy::Hierarchy<f64>;
pub type FootprintQuery32 = kernel::FootprintQuery<f32>;
pub type FootprintQuery64 = kernel::FootprintQuery<f64>;
pub type Vec2f = math::Vec2<f32>;
pub type Vec2d = math::Vec2<f64>;
pub type Vec3f = math::Vec3<f32>;
pub type Vec3d = math::Vec3<f64>;

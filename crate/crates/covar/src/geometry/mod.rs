//! Exact finite-dimensional polyhedral geometry.
//!
//! Sets and cones carry their inequality representation as canonical data;
//! generator forms, face lattices, and polars are derived through double
//! description and cached. All operations are pure functions of immutable
//! inputs and safe to evaluate concurrently.

pub mod cone;
pub mod dd;
pub mod homogeneous;
pub mod normal;
pub mod set;

pub use cone::{ConeFace, PolyhedralCone};
pub use dd::{lex_cmp, ConeGenerators};
pub use homogeneous::{
    lift_cone, smallest_singular_value, spectral_norm, sphere_feasibility, HomogeneousMap,
    OuterNorm,
};
pub use normal::{
    coderivative_normal_cone_map, critical_cone, critical_face_pairs,
    limiting_normal_cone_union, normal_cone, normal_cone_map_coderivative_graph, prune_inclusions,
    tangent_cone, FacePair,
};
pub use set::{set_excess, PolyhedralSet, SetFace, VRep};

use crate::error::Result;
use nalgebra::DVector;

/// Euclidean distance from a point to a polyhedron.
pub fn dist(z: &DVector<f64>, c: &PolyhedralSet) -> Result<f64> {
    c.distance(z)
}

//! Certification engine for well-posedness of stochastic constraint and
//! variational systems over finite scenario models.
//!
//! The engine decides Lipschitz-like stability and metric regularity of
//! set-valued solution maps by computing limiting coderivatives of structured
//! multifunctions, assembling polyhedral upper estimates with their
//! qualification conditions, and cross-validating every certificate against
//! brute-force definitional oracles.
//!
//! Module layout:
//! - [`geometry`]: exact polyhedral geometry (cones, faces, polars, normal
//!   cones, distances, outer norms of positively homogeneous maps).
//! - [`multifunction`]: expression trees over a closed catalog of structured
//!   multifunctions with exact per-node coderivative rules.
//! - [`stochastic`]: finite scenario models, expected maps, selection sets,
//!   and integrable Lipschitz property checkers.
//! - [`wellposedness`]: the certification core (coderivative and kernel
//!   criteria, qualification checks, adjoint equation solving).
//! - [`systems`]: assembled constraint, variational, stationary-point, and
//!   MPEC pipelines.
//! - [`oracle`]: brute-force definitional reference implementations used to
//!   validate every analytic computation on small instances.
//! - [`cli`]: problem-file ingestion, command dispatch, and report emission.

pub mod cli;
pub mod error;
pub mod geometry;
pub mod multifunction;
pub mod oracle;
pub mod stochastic;
pub mod systems;
pub mod wellposedness;

pub use error::{Error, Result};

/// Shared numeric tolerances.
///
/// A single absolute membership tolerance keeps set-membership checks
/// composable across modules; the remaining constants are documented
/// defaults surfaced as CLI flags.
pub mod tol {
    /// Absolute tolerance on constraint residuals for membership checks.
    pub const TAU_MEM: f64 = 1e-9;
    /// Distance below which a point counts as `0 ∈ S` in kernel checks.
    pub const TAU_KERNEL: f64 = 1e-8;
    /// Acceptance threshold for MPEC stationarity residuals.
    pub const TAU_OPT: f64 = 1e-6;
    /// Dimension cap for face-lattice enumeration.
    pub const FACE_DIM_CAP: usize = 8;
    /// Discretized limsup threshold used by the empirical normal-cone test.
    pub const LIMSUP_THRESHOLD: f64 = 0.02;
    /// Hard cap on oracle grid sizes.
    pub const GRID_BUDGET: usize = 1_000_000;
}

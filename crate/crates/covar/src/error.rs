//! Crate-wide error type.
//!
//! Every failure mode carries enough context to name the offending object;
//! report-producing operations prefer returning an evidence object over an
//! error, so the variants here are genuine contract violations.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    // -- geometry --
    #[error("point is not in the set (distance {dist:.3e} exceeds tolerance {tol:.1e})")]
    PointNotInSet { dist: f64, tol: f64 },
    #[error("polyhedral set is empty: {0}")]
    EmptySet(String),
    #[error("dimension {dim} exceeds the face-enumeration cap {cap}")]
    DimensionCapExceeded { dim: usize, cap: usize },
    #[error("(z, v) is not a normal pair: v is not in the normal cone at z (residual {0:.3e})")]
    NotANormalPair(f64),
    #[error("set is unbounded where a bounded set is required: {0}")]
    Unbounded(String),

    // -- multifunction --
    #[error("point outside the node's domain: {0}")]
    DomainError(String),
    #[error("base point is not on the graph of the multifunction (residual {0:.3e})")]
    OffGraph(f64),
    #[error("node is not single-valued at the query point")]
    NotSingleValued,
    #[error("subgradient is not in the subdifferential at the base point (distance {0:.3e})")]
    SubgradientMismatch(f64),
    #[error("function is not convex in z near the query point: {0}")]
    NotConvexInZ(String),

    // -- stochastic --
    #[error("standing assumptions violated: {0}")]
    StandingAssumptionViolation(String),
    #[error("selection is infeasible: {0}")]
    SelectionInfeasible(String),
    #[error("y is not in the expected value set (distance {0:.3e})")]
    NotInExpectedValue(f64),

    // -- systems --
    #[error("qualification condition failed with witness {witness:?}")]
    QualificationFailed { witness: Vec<f64> },
    #[error("hypothesis cannot be verified: {0}")]
    AssumptionUnverifiable(String),
    #[error("adjoint generalized equation has a nontrivial solution {witness:?}")]
    AdjointNontrivial { witness: Vec<f64> },
    #[error("structural hypotheses for this pathway fail: {0}")]
    PathUnavailable(String),
    #[error("required Lipschitz evidence is missing: {0}")]
    EvidenceMissing(String),
    #[error("localized conditions failed: {0}")]
    LocalizationFailed(String),

    // -- oracle --
    #[error("grid budget exceeded: {requested} points requested, cap {cap}")]
    GridBudgetExceeded { requested: usize, cap: usize },

    // -- cli --
    #[error("problem file error at line {line}: {message}")]
    SchemaError { line: usize, message: String },
    #[error("dimension mismatch in field `{field}`: {message}")]
    DimensionError { field: String, message: String },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

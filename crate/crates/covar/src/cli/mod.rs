//! Problem-file ingestion, command dispatch, report emission, and the
//! exit-code contract.
//!
//! Commands: `analyze` (coderivative estimates), `certify --property
//! lipschitz|metric-regularity`, `estimate` (empirical oracles), and
//! `check-mpec`. Exit codes: 0 certified/clean, 2 refuted, 3 inconclusive,
//! 1 error. JSON reports are byte-identical across reruns for a fixed file
//! and seed.

pub mod build;
pub mod parse;
pub mod report;
pub mod run;

pub use build::{build, Built, BuiltProblem};
pub use parse::{parse, serialize, ProblemFile, SystemKind};
pub use report::{Report, REPORT_SCHEMA_VERSION};
pub use run::{run, Command, RunOptions};

/// Configure the global thread pool from `COVAR_THREADS`; call once at
/// startup. Sampling loops use deterministic indexed reductions, so the
/// thread count never changes any output.
pub fn configure_threads() {
    if let Ok(raw) = std::env::var("COVAR_THREADS") {
        if let Ok(n) = raw.trim().parse::<usize>() {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
        }
    }
}

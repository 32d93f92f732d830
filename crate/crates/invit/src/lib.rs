//! Config-driven experiment runner on top of `invit-core`.

// Negated float comparisons are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bundled;
pub mod config;
pub mod error;
pub mod output;
pub mod runner;

pub use config::{ExperimentConfig, ExperimentKind};
pub use error::{CliError, CliResult};
pub use runner::{run, ResultTable};

/// Environment variable overriding the worker thread count.
pub const THREADS_ENV: &str = "INVIT_THREADS";

/// Sizes the global rayon pool from [`THREADS_ENV`], if set.
pub fn init_threads() -> CliResult<()> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Validation(format!("{THREADS_ENV} must be a positive integer, got {raw:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Runtime(e.to_string()))
}

//! Command-line front end for the waa-core engine: TOML experiment
//! configuration, run/verify/sweep commands, and flat-file reports.
//!
//! Exit codes: 0 success, 2 configuration error, 3 invariant violation
//! (a verified inequality failed), 4 resource limit (pool or output
//! capacity).

// `!(x > 0.0)`-style guards are deliberate: the negation also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod report;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_INVARIANT: i32 = 3;
pub const EXIT_RESOURCE: i32 = 4;

/// A terminal failure carrying its process exit code.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn config(message: impl Into<String>) -> Self {
        Self { code: EXIT_CONFIG, message: message.into() }
    }

    pub fn invariant(message: impl Into<String>) -> Self {
        Self { code: EXIT_INVARIANT, message: message.into() }
    }

    pub fn resource(message: impl Into<String>) -> Self {
        Self { code: EXIT_RESOURCE, message: message.into() }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.message)
    }
}

impl std::error::Error for CliError {}

/// Maps a core error that arose while materializing config-declared
/// objects: pool blowups are resource limits, everything else is a bad
/// configuration.
pub(crate) fn build_error(context: &str, e: waa_core::Error) -> CliError {
    match e {
        waa_core::Error::PoolSizeExceeded { .. } => {
            CliError::resource(format!("{context}: {e}"))
        }
        _ => CliError::config(format!("{context}: {e}")),
    }
}

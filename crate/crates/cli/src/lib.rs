//! Experiment drivers and output formatting behind the `polyconsensus`
//! command. The binary only parses arguments and routes output; everything
//! that produces numbers lives here so tests can call it directly.

// `!(x < y)` is used on purpose so that NaN fails validation
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod args;
pub mod figures;
pub mod output;
pub mod sweep;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] polyconsensus::Error),

    #[error("{0}")]
    Usage(String),

    /// A computed record broke one of the ordering guarantees.
    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl CliError {
    /// 2 for numerical failures, 1 for everything the caller can fix.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(e) if e.is_numerical() => 2,
            CliError::Invariant(_) => 2,
            _ => 1,
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

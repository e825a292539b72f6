//! Error type shared by the whole crate.
//!
//! Variants map one-to-one onto the failure categories surfaced by the CLI:
//! configuration problems, I/O, and data problems (parse/schema/input/domain/
//! training/lookup).

use thiserror::Error;

#[derive(Debug, Error)]
pub enum UwError {
    /// Invalid configuration value or an inconsistent parameter combination.
    #[error("config error: {0}")]
    Config(String),

    /// Malformed text input; `line` is 1-based and counts the header.
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    /// Structurally valid input that contradicts the declared schema or panel.
    #[error("schema error: {0}")]
    Schema(String),

    /// Arguments inconsistent with each other or with the model they are fed to.
    #[error("input error: {0}")]
    Input(String),

    /// Mathematically undefined request (empty mean, out-of-range probability...).
    #[error("domain error: {0}")]
    Domain(String),

    /// Model fitting could not proceed (degenerate or insufficient data).
    #[error("training error: {0}")]
    Training(String),

    /// A keyed lookup (external prediction table, wrapper reference) missed.
    #[error("lookup error: {0}")]
    Lookup(String),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, UwError>;

impl From<csv::Error> for UwError {
    fn from(e: csv::Error) -> Self {
        if e.is_io_error() {
            match e.into_kind() {
                csv::ErrorKind::Io(io) => UwError::Io(io),
                _ => unreachable!("is_io_error guarantees an Io kind"),
            }
        } else {
            UwError::Schema(e.to_string())
        }
    }
}

impl UwError {
    /// Process exit code the CLI maps this error onto.
    /// 1 = usage/config, 2 = I/O, 3 = malformed or inconsistent data.
    pub fn exit_code(&self) -> i32 {
        match self {
            UwError::Config(_) => 1,
            UwError::Io(_) => 2,
            _ => 3,
        }
    }
}

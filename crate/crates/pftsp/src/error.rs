//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by instance loading, codecs, simulation and solver runs.
#[derive(Debug, Error)]
pub enum Error {
    #[error("io error reading {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error at line {line} of {path}: {msg}")]
    Parse { path: String, line: usize, msg: String },

    #[error("instance too small: got {n} locations, need at least 3")]
    InstanceTooSmall { n: usize },

    #[error("invalid cycle: {0}")]
    InvalidCycle(String),

    #[error("brute force enumeration refused for n={n}: exact search is limited to n <= {limit}")]
    BruteForceLimit { n: usize, limit: usize },

    #[error("bit string length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("unknown circuit id {0}, expected 1-5")]
    UnknownCircuit(u8),

    #[error("{q} qubits exceed the dense statevector budget of {limit} qubits")]
    ResourceLimit { q: usize, limit: usize },

    #[error("warm start loading is only defined for circuit 2, got circuit {0}")]
    WarmStartUnsupported(u8),

    #[error("configuration error: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit code for the CLI: 2 config, 3 resource, 4 data.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::ResourceLimit { .. } | Error::BruteForceLimit { .. } => 3,
            Error::Config(_) | Error::UnknownCircuit(_) | Error::WarmStartUnsupported(_) => 2,
            _ => 4,
        }
    }
}

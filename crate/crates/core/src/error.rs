//! Error type shared across the crate.

use thiserror::Error;

/// Errors produced by tensor, graph, policy, and engine operations.
#[derive(Debug, Error)]
pub enum Error {
    /// Tensor shape or index problem (mismatched extents, out-of-range index).
    #[error("shape error: {0}")]
    Shape(String),

    /// Structural graph problem (cycle, dangling input, wrong node count).
    #[error("graph error: {0}")]
    Graph(String),

    /// Document does not conform to the graph schema.
    #[error("schema error: {0}")]
    Schema(String),

    /// A delta packet was sent to a layer it does not belong to.
    #[error("routing error: {0}")]
    Routing(String),

    /// A delta operation was applied to a nonlinear layer or vice versa.
    #[error("classification error: {0}")]
    Classification(String),

    /// Network could not be converted to event form.
    #[error("conversion error: {0}")]
    Conversion(String),

    /// Invalid policy or run configuration.
    #[error("config error: {0}")]
    Config(String),

    /// Event state is missing, uninitialized, or inconsistent with the run.
    #[error("state error: {0}")]
    State(String),

    /// Report inputs are incomplete or mismatched.
    #[error("report error: {0}")]
    Report(String),

    /// Invalid synthetic scene specification.
    #[error("scene error: {0}")]
    Scene(String),

    /// Malformed binary tensor or video file.
    #[error("format error: {0}")]
    Format(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

//! Crate-wide error type.
//!
//! Every fallible operation returns [`Error`]; verification routines that can
//! legitimately answer "no" return verdict types instead and reserve `Error`
//! for inputs that are malformed or outside an operation's domain.

use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    /// Matrix or tensor dimensions do not match the operation's requirements.
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// An operation required a Hermitian input and the residual was too large.
    #[error("matrix is not Hermitian (residual {residual:.3e} > tol {tol:.3e})")]
    NotHermitian { residual: f64, tol: f64 },

    /// A positive-semidefinite input was required; carries the most negative
    /// eigenvalue found.
    #[error("matrix is not positive semidefinite (min eigenvalue {min_eigenvalue:.3e})")]
    NotPsd { min_eigenvalue: f64 },

    /// A measurement family or model failed validation.
    #[error("validation failed: {description} (residual {magnitude:.3e})")]
    Violation { description: String, magnitude: f64 },

    /// Word-algebra generation did not stabilize within the word-length cap.
    #[error("word algebra not closed at word length {max_word_len} (span still growing: {detail})")]
    NotConverged { max_word_len: usize, detail: String },

    /// A CHSH routine required an optimal model and the bias fell short.
    #[error("model is not optimal: |bias - 2*sqrt(2)| = {gap:.3e} exceeds gate {gate:.3e}")]
    NotOptimal { gap: f64, gate: f64 },

    /// No unitary intertwiner exists between the two models.
    #[error("models are not unitarily equivalent: {0}")]
    NotEquivalent(String),

    /// A moment-matrix entry was requested for a word with no supplied value.
    #[error("moment matrix is missing a value for word {word}")]
    MissingWord { word: String },

    /// Two completion entries (or a completion entry and a correlation-
    /// determined entry) reduce to the same word with different values.
    #[error("inconsistent completion: word {word} has conflicting values {left} vs {right}")]
    InconsistentCompletion { word: String, left: String, right: String },

    /// Input document does not match the expected JSON schema.
    #[error("schema error at {path}: {message}")]
    Schema { path: String, message: String },

    /// Underlying I/O failure (file access).
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    /// Underlying JSON syntax failure.
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    /// Catch-all for domain violations with context.
    #[error("{0}")]
    Invalid(String),
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

//! Numerical toolkit for quantum self-testing at desk scale.
//!
//! The crate builds correlations from finite-dimensional measurement models,
//! verifies claimed local dilations (self-testing relations) by explicitly
//! constructed isometries, and reproduces the classical worked examples of
//! the subject end to end:
//!
//! - the CHSH game: ideal model, bias operator, swap-isometry self-test,
//!   projective extraction, and a stochastic-operator-matrix counterexample
//!   ([`chsh`]);
//! - Clifford-algebra correlations, the entanglement witness
//!   `n·I − Σ u_x ⊗ u_x`, and NPA-style moment matrices ([`clifford`]);
//! - the quantum graph-coloring game Hom(K₄, Q₂) with constructive
//!   extraction of the Pauli form, plus contextuality-scenario checks
//!   ([`games`]);
//! - Schur-multiplier channels from pairs of group representations and the
//!   S₃ worked example ([`schur`]);
//! - stochastic operator matrices, their Gram-isometry factorizations, and
//!   Halmos-style unistochastic dilations ([`dilation`]).
//!
//! Everything rests on a small self-contained dense complex linear-algebra
//! kernel ([`matcore`]) and a model/correlation layer ([`models`]). The
//! [`cli`] module exposes the same capabilities as a batch command-line
//! front end with JSON input and output.
//!
//! All types are immutable values and all operations are pure functions;
//! concurrent use requires no synchronization. Randomized routines take
//! explicit seeds and are reproducible bit for bit.

pub mod chsh;
pub mod cli;
pub mod clifford;
pub mod dilation;
pub mod error;
pub mod games;
pub mod matcore;
pub mod models;
pub mod schur;

pub use error::{Error, Result};

/// Default relative tolerance used by every verification routine that does
/// not receive an explicit override. Double precision leaves roughly six
/// digits of headroom at the matrix sizes this crate works with.
pub const DEFAULT_TOL: f64 = 1e-9;

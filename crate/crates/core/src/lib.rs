//! Privacy mechanisms with exact leakage budgets, and closed-form bounds on
//! the privacy-utility trade-off for finite discrete sources.
//!
//! The setting: private data `X` and useful data `Y` are finite discrete
//! random variables with a known joint distribution. A mechanism discloses
//! `U`, generated either from `Y` alone (the *hidden* scenario, where the
//! Markov chain `X - Y - U` holds) or from the pair `(X, Y)` (the *observed*
//! scenario). Leakage is measured by `I(X;U)`, utility by `I(Y;U)`, both in
//! bits. Given a leakage budget `eps`, the trade-off functions are
//!
//! * `g_eps`: max utility over hidden mechanisms with `I(X;U) <= eps`,
//! * `h_eps`: max utility over observed mechanisms with `I(X;U) <= eps`,
//!
//! and `g_eps <= h_eps <= H(Y|X) + eps` on the budget range
//! `0 <= eps < I(X;Y)`.
//!
//! What the crate provides:
//!
//! * [`distribution`]: joint distributions, mechanisms, Shannon measures,
//!   text file formats, and the standard test families (binary symmetric,
//!   binary erasure, uniform functional pairs).
//! * [`representation`]: constructions with certified properties, built on
//!   functional-representation couplings: `U` independent of `X` with `Y` a
//!   deterministic function of `(U, X)`, plus leakage-injection mixtures that
//!   hit a prescribed `I(X;U) = eps` exactly, a search that minimizes the
//!   conditional leakage `I(X;U|Y)`, a residual-randomness eliminator, and a
//!   leakage saturator that reaches the `H(Y|X) + eps` ceiling.
//! * [`bounds`]: closed-form lower and upper bounds on `g_eps` and `h_eps`,
//!   including the zero-leakage upper bounds built from a layered integral of
//!   the channel's upper cumulative distribution.
//! * [`perfect_privacy`]: exact `g_0` (utility at zero leakage) via vertex
//!   enumeration of the perfect-privacy polytope and a small dense simplex
//!   solver.
//! * [`oracle`]: brute-force numerical maximizers for `g_eps` and `h_eps` at
//!   desk scale, and a sandwich checker that verifies every bound against
//!   them.
//!
//! Conventions used throughout: all logarithms are base 2 and every
//! information quantity is in bits; `0 * log 0 = 0`; conditioning events of
//! probability zero contribute zero; probabilities are `f64`.

pub mod bounds;
pub mod cli;
pub mod distribution;
pub mod oracle;
pub mod perfect_privacy;
pub mod representation;
mod simplex;

pub use bounds::{bound_report, BoundOptions, BoundReport};
pub use distribution::{
    binary_entropy, entropy, family_bsc, family_erasure, family_function, report,
    JointDistribution, Mechanism, MechanismReport, Scenario, TripleDistribution,
};
pub use oracle::{sandwich_check, search_g, search_h, OracleResult, SandwichReport};
pub use perfect_privacy::{g0, polytope_vertices, PerfectPrivacy};
pub use representation::{
    efrl, esfrl, frl, improve, mix_with_x, saturate_leakage, sfrl_search, FunctionAtomSpace,
    SearchConfig, SfrlOutcome,
};

use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// A text input could not be parsed; `line` is 1-based.
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    /// A probability table failed validation.
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    /// A mechanism kernel failed validation.
    #[error("invalid mechanism: {0}")]
    InvalidMechanism(String),

    /// Mechanism and distribution alphabets do not match.
    #[error("alphabet mismatch: mechanism is {mech_nx}x{mech_ny}, distribution is {dist_nx}x{dist_ny}")]
    AlphabetMismatch {
        mech_nx: usize,
        mech_ny: usize,
        dist_nx: usize,
        dist_ny: usize,
    },

    /// A scalar argument fell outside its admissible range.
    #[error("domain error: {0}")]
    Domain(String),

    /// The leakage budget is not inside `[0, I(X;Y))`.
    #[error("leakage budget eps = {eps} is outside [0, I(X;Y)) with I(X;Y) = {mutual_information}")]
    EpsOutOfRange { eps: f64, mutual_information: f64 },

    /// A precondition of an operation does not hold for the given input.
    #[error("precondition failed: {0}")]
    Precondition(String),

    /// The linear-programming layer could not solve a subproblem.
    #[error("linear program failed: {0}")]
    LinearProgram(String),

    /// An I/O failure while reading or writing files.
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

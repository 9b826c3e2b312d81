//! Simulation and consistency auditing for multi-agent quantum measurement
//! protocols in which every agent keeps its own wave function.
//!
//! The crate is organised bottom-up:
//!
//! * [`hilbert`]: dense state vectors and operators over ordered tensor
//!   products of small named subsystems.
//! * [`measurement`]: Born probabilities, Lüders collapse, sampling and
//!   time-ordered chain operators.
//! * [`protocol`]: the protocol document model, its JSON text format,
//!   validation and the built-in scenarios.
//! * [`ledger`]: per-agent state histories driven by own outcomes,
//!   received broadcasts and unobserved (unitary-only) measurements.
//! * [`audit`]: inference chains checked against the two information
//!   rules (use only what you have; use the latest you have).
//! * [`runner`]: exact outcome trees, seeded sampling, mode comparison and
//!   report generation used by the `qledger` binary.

pub mod audit;
pub mod error;
pub mod hilbert;
pub mod ledger;
pub mod measurement;
pub mod protocol;
pub mod runner;
pub mod time;

pub use error::{Error, Result};
pub use time::TimeStamp;

/// Tolerance for structural checks (unitarity, idempotence, completeness).
pub const STRUCT_TOL: f64 = 1e-10;
/// Tolerance for amplitude equality.
pub const EQ_TOL: f64 = 1e-12;
/// Born weights at or below this are treated as vanishing branches.
pub const IMPOSSIBLE_TOL: f64 = 1e-12;

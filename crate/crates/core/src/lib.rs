//! Optimal multiple testing for two hypotheses under strong family-wise
//! error control.
//!
//! The crate builds the decision rule that maximises a chosen power objective
//! among marginally nominal (equivalently, weakly monotone) procedures,
//! evaluates it against the usual off-the-shelf procedures, and answers
//! trial-design questions such as how to split a sample between two groups.

pub mod error;
pub mod gauss;
pub mod numerics;
pub mod objective;

pub use error::{OmtError, Result};
pub mod fmt;
pub mod procedures;
pub mod power_design;

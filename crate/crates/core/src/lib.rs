//! Extremal analysis for a simplified Goddard problem: maximise the height
//! reached by a point mass under thrust, gravity and nonlinear drag with a
//! fixed fuel budget.

// `!(x > 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod classify;
pub mod cli;
pub mod dynamics;
pub mod error;
pub mod exclusion;
pub mod extremal;
pub mod friction;
pub mod oracle;
pub mod parallel;
pub mod solve;

pub use error::{Error, Result};

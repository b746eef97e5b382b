//! Simulation library for a membrane-in-the-middle optomechanical filter
//! cavity operated in the OMIT (optomechanically induced transparency)
//! regime.
//!
//! Units are SI throughout. Frequencies crossing module boundaries are
//! angular (rad/s) unless a name ends in `_hz`. OMIT rates (`gamma`,
//! `gamma_m`, `Gamma_opt`) are amplitude half-widths, so a full power
//! linewidth in Hz is `rate / pi`.

// `!(a > b)` guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod apparatus;
pub mod cavity;
pub mod detection;
pub mod error;
mod linalg;
pub mod lineshape;
pub mod membrane;
pub mod omit;
pub mod oracle;
pub mod phase;
pub mod rng;
pub mod units;

pub use error::{OmitError, Result};

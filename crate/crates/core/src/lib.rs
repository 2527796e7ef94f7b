//! Forward models and fitting pipeline for microwave resonators coupled to
//! paramagnetic spin ensembles.
//!
//! All frequencies are ordinary frequencies in Hz. Conversion to angular
//! units happens only inside the formulas that need it.

// negated comparisons reject NaN on purpose
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cavity;
pub mod dataio;
pub mod error;
pub mod fit;
pub mod pipeline;
pub mod simulate;
pub mod spinphys;

pub use error::{Error, Result};

/// Crate version recorded in report provenance.
pub const CODE_VERSION: &str = env!("CARGO_PKG_VERSION");

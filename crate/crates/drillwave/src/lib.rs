//! Torsional drill-string model: transfer functions, spectra, discretized
//! state-space plants, norm computations, certificates, nonlinear
//! simulation and controller synthesis.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod linalg;
pub mod scenario;
pub mod xfer;
pub mod spectra;
pub mod ssmodel;
pub mod norms;
pub mod certify;
pub mod simulate;
pub mod synth;
pub mod cli;

pub use error::{Error, Result};

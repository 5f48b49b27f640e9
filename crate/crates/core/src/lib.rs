//! Simulation core for coherent polarization transfer between a driven spin S
//! and a spin (or pseudo-spin) I.
//!
//! The crate is `no_std` and only needs `alloc`. IO, file formats and the
//! command-line front end live in the `spinseq` crate.
#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod analysis;
pub mod linalg;
pub mod propagate;
pub mod scan;
pub mod sequence;
pub mod spin;

pub use linalg::{ComplexMatrix, DensityMatrix, LinalgError, Operator, Tolerances};
pub use spin::{Advisory, DnpParams, DriveSample, ErrorModel, PhipParams};

/// Crate version recorded in run metadata.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

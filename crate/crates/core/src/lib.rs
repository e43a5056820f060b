//! Coherence-enhanced Raman generation in a three-level Λ vapor.
//!
//! * [`atom`]: density-matrix dynamics of one atom and the RK4 integrator.
//! * [`checks`]: analytic single-atom oracles (Rabi flopping, decay, STIRAP).
//! * [`pulses`]: pulse shapes, sampled envelopes, STIRAP and fractional-STIRAP
//!   sequences.
//! * [`propagation`]: Maxwell–Bloch march of both channels through the cell.
//! * [`experiments`]: delay, density and power scans of the generated signal.
//! * [`config`] and [`output`]: JSON run configuration and CSV/JSON results.

pub mod atom;
pub mod checks;
pub mod config;
pub mod error;
pub mod experiments;
pub mod output;
pub mod propagation;
pub mod pulses;

pub use error::{Error, ErrorKind, Result};

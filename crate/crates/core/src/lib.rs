//! Numerical toolkit for the relativistic Hopfield network with cyclically
//! correlated patterns in the low-load regime.
//!
//! The crate is organised around the thermodynamic quantities of the model:
//!
//! - [`model`]: finite-size patterns, spin configurations with cached Mattis
//!   overlaps, the classical and relativistic Hamiltonians and the exact
//!   (enumerated) intensive pressure.
//! - [`correlation`]: the cyclic correlation matrix `X`, its spectrum, the
//!   closed-form characteristic polynomial and the pattern rotation.
//! - [`meanfield`]: quenched averages over the pattern bits, the mean-field
//!   pressure, the self-consistency maps and the damped fixed-point solver.
//! - [`phases`]: phase classification, multi-start selection, `(T, a)` sweeps
//!   and extraction of the ergodicity line.
//! - [`montecarlo`]: single-spin-flip dynamics and exact-enumeration
//!   experiments used as an independent finite-`N` oracle.
//! - [`output`]: CSV, JSON and PPM writers shared by the command-line tool.
//! - [`checks`]: the verification suites behind `hopcorr check`.

pub mod checks;
pub mod correlation;
pub mod error;
pub mod meanfield;
pub mod model;
pub mod montecarlo;
pub mod output;
pub mod phases;
pub mod rng;

pub use correlation::{CorrelationMatrix, Spectrum};
pub use error::{Error, Result};
pub use meanfield::{FixedPointResult, Magnetization, Model, SolverConfig};
pub use model::{ModelParams, PatternSet, SpinSystem};
pub use phases::{PhaseLabel, PhasePoint, RetrievalKind};

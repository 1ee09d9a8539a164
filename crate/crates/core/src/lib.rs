//! Twinbeam: a one-dimensional transverse simulator of coincidence imaging
//! with photon pairs whose joint spectrum is inherited from a structured
//! pump beam.
//!
//! An object mask placed in the pump imprints its angular spectrum on the
//! pair; a lens in the detection arms then forms the object's image in the
//! coincidence counts, with a scan-mode-dependent magnification. The crate
//! provides the calibrated transforms, optical elements, arm transfer
//! kernels, the coincidence engine (direct quadrature plus an FFT fast
//! path), independent closed-form oracles, and a deterministic CLI that
//! reproduces the two reference experiments.

pub mod config;
pub mod elements;
pub mod engine;
pub mod error;
pub mod grid;
pub mod kernel;
pub mod layout;
pub mod oracles;
pub mod pump;
pub mod scan;
pub mod scanfile;
pub mod tolerances;

pub mod cli;

pub use error::{Result, SimError};

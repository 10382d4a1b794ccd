//! Two-stage spatial sampling designs for epidemic surveillance.
//!
//! The crate covers the full evaluation pipeline:
//!
//! * [`population`]: spatially autocorrelated resident counts on a lattice
//!   and Moran's I;
//! * [`epidemic`]: an agent-based SEIARD simulator producing daily survey
//!   frames;
//! * [`sampling`]: PPS inclusion probabilities, the cube method, the local
//!   pivotal and local cube methods, and second-stage SRSWOR;
//! * [`estimation`]: Horvitz-Thompson estimation and the anticipated
//!   variance under a spatially correlated working model;
//! * [`harness`]: Monte Carlo evaluation of designs on simulated frames.

pub mod epidemic;
pub mod error;
pub mod estimation;
pub mod frame;
pub mod harness;
pub mod population;
pub mod sampling;
pub mod seeds;

pub use error::{Error, Result};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

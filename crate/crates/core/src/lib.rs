//! Core library for geomodel history matching of CO2-storage twin experiments.
//!
//! The pipeline runs: Gaussian random fields with a PCA parameterization
//! ([`grf`]), geomodel assembly from scenario metaparameters ([`geomodel`]),
//! a two-phase flow reference simulator ([`flowsim`]), interpreted-seismic
//! filtering ([`seisproc`]), convolutional surrogate models trained from
//! scratch ([`nets`]), hierarchical MCMC history matching ([`hm`]), and
//! posterior diagnostics ([`analysis`]).

pub mod analysis;
pub mod config;
pub mod error;
pub mod flowsim;
pub mod geomodel;
pub mod grf;
pub mod grid;
pub mod hm;
pub mod io;
pub mod nets;
pub mod seisproc;

pub use error::{GhmError, Result};
pub use grid::{Grid3, GridDims};

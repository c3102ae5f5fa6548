//! p-torsion functions, torsional Hardy inequalities and Poincaré constants
//! on masked Cartesian grids.

pub mod cli;
pub mod config;
pub mod error;
pub mod fields;
pub mod geometry;
pub mod inequalities;
pub mod optim;
pub mod spectral;
pub mod torsion;

pub use error::{Error, Result};

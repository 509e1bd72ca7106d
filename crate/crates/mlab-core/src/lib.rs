//! Numerical laboratory for an axially confined elastic cylinder resting on
//! a rigid mandrel.
//!
//! The crate evaluates the geometrically linear (von Kármán–Donnell),
//! nonlinear and free-shear energies on periodic spectral grids, builds the
//! explicit wrinkling patterns that realize the optimal energy scalings,
//! predicts those scalings in closed form, checks lower-bound certificates
//! on arbitrary fields and minimizes the discrete energies under the
//! obstacle, slope and orientation constraints.
//!
//! It is `no_std` with `alloc`; file formats and the command line live in
//! the companion `mlab` crate.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod certificates;
pub mod energy;
pub mod error;
pub mod fft;
pub mod grid;
pub mod minimize;
pub mod oracle;
pub mod pattern;
pub mod profile;
pub mod quad;

pub use energy::{Configuration, EnergyReport, Model};
pub use error::{Error, Result};
pub use grid::{Domain, Exponent, GridField, ModelParams};

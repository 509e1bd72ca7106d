//! Batch front end for the `mlab-core` numerics: field IO, sweeps, fits
//! and the `mlab` command line.

pub mod cli;
pub mod config;
pub mod error;
pub mod fit;
pub mod gfld;
pub mod sweep;

pub use error::{CliError, CliResult};
pub use fit::{fit_exponent, FitResult};
pub use sweep::{run_sweep, SweepMode, SweepRow, SweepSpec, Varying};

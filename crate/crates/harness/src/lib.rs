//! Monte Carlo engine, sweeps, code-size search and second-order fits for
//! the `sparsync` schemes.

pub mod bisect;
pub mod config;
pub mod error;
pub mod fit;
pub mod montecarlo;
pub mod output;
pub mod stats;
pub mod sweep;

pub use error::{HarnessError, Result};

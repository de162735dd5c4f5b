//! Finite-blocklength asynchronous communication with sparse output sampling.
//!
//! The crate covers the information measures of a discrete memoryless
//! channel with an idle input, the divergence-constrained capacity problem,
//! the multiphase achievability schemes, a lazily sampled channel simulator,
//! the corresponding sequential decoders, and closed-form rate predictions.

pub mod capacity;
pub mod dmc;
pub mod error;
pub mod rng;
pub mod scheme;
pub mod sim;
pub mod decoders;
pub mod expansion;

pub use dmc::{Dist, Dmc, LlrState};
pub use error::{Error, Result};

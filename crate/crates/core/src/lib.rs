//! Simulation of quasiperiodically driven quantum systems and measurement of
//! their approach to Haar-random moments.

pub mod bigmat;
pub mod cli;
pub mod drive;
pub mod error;
pub mod fit;
pub mod haar;
pub mod manybody;
pub mod precision;
pub mod stationary;
pub mod sweep;
pub mod words;

pub use error::{Error, Result};
pub use precision::{BigReal, PrecisionPolicy, Real};

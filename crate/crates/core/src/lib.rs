pub mod classical;
pub mod ergodic;
pub mod error;
pub mod harness;
pub mod orbits;
pub mod potts;
pub mod quantum;
pub mod semiclassics;
pub mod torus;

pub use error::{Error, Result};

//! Least-squares approximation on irregular domains with samples drawn
//! from the discrete Christoffel function of a random grid.

pub mod diagnostics;
pub mod domain;
pub mod error;
pub mod experiment;
pub mod functions;
pub mod legendre;
pub mod measure;
pub mod multiindex;
pub mod rng;
pub mod sampler;
pub mod solver;

pub use error::{Error, Result};

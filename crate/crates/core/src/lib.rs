pub mod diagnostics;
pub mod error;
pub mod feec;
pub mod geometry;
pub mod markers;
pub mod propagators;
pub mod runner;

pub use error::{Error, Result};

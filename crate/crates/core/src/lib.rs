pub mod cloud;
pub mod dynamics;
pub mod error;
pub mod fit;
pub mod functionals;
pub mod grid1d;
pub mod harness;
pub mod measure;
pub mod metrics;
pub mod rng;

pub use error::{Error, Result};

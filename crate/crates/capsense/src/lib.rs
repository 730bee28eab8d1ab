pub mod cli;
pub mod density;
pub mod error;
pub mod geometry;
pub mod jet;
pub mod oracle;
pub mod potential;
pub mod rules;
pub mod sensitivity;
pub mod solver;

pub use density::DensityVector;
pub use error::{Error, Result};

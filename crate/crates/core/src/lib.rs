pub mod error;
pub mod error_transform;
pub mod gains;
pub mod graph;
pub mod scenario;
pub mod signed;
pub mod simulator;
pub mod spectral;
pub mod switching;
pub mod tol;

pub use error::{CoordError, Result};

//! Gradient descent on quadratically parameterized linear regression.

pub mod cli_io;
pub mod error;
pub mod fixed_point;
pub mod model;
pub mod regime;
pub mod reparam;
pub mod sharpness;

pub use error::{EosError, Result};

pub mod error;
pub mod export;
pub mod field;
pub mod kernel_oracle;
pub mod multiplier;
mod quadrature;
pub mod specfun;
pub mod solver;
pub mod spectral;

pub use error::{Error, Result};

//! Survival rate, quasi-stationary distributions and exact simulation of
//! the M/M/∞ queue absorbed at zero.

mod dd;
mod quad;

pub mod cli;
pub mod error;
pub mod laplace;
pub mod model;
pub mod qsd;
pub mod sim;
pub mod solver;
pub mod special;

pub use error::{Error, Result};
pub use model::ModelParams;

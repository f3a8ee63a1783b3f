//! Simulation and learned state estimation for a fluid-driven soft bending
//! actuator with an internal electrode array.

pub mod actuator;
pub mod config;
pub mod dataset;
pub mod eit;
pub mod error;
pub mod estimator;
pub mod experiments;
pub mod protocol;
pub mod trajectory;

pub use error::{Error, Result};

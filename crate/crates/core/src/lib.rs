//! Newton solvers for nonlinear elliptic PDEs on uniform grids, Newton-step
//! datasets, and DeepONet-style operators trained to predict the step.

mod codec;

pub mod banded;
pub mod datagen;
pub mod error;
pub mod grid;
pub mod neural;
pub mod newton;
pub mod problems;
pub mod rng;
pub mod surrogate;
pub mod training;

pub use error::{Error, Result};

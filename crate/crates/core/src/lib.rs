//! Yield estimation and optimization for a dispersive waveguide benchmark.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod distributions;
pub mod error;
pub mod estimator;
pub mod linalg;
pub mod model;
pub mod optimizer;
pub mod surrogate;
pub mod waveguide;

pub use error::{Error, Result};

//! Adaptive Galerkin discretizations on hierarchical B-spline spaces.

pub mod adaptivity;
pub mod assembly;
pub mod bench;
pub mod error;
pub mod estimator;
pub mod geometry;
pub mod hierarchy;
pub mod quadrature;
pub mod registry;
pub mod sparse;
pub mod splines;
pub mod tensor;
pub mod verification;

pub use error::{Error, Result};

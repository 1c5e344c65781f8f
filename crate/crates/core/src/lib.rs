//! Parametric finite elements for Willmore flow of curves and surfaces with
//! spontaneous curvature and Navier or clamped boundary conditions.

pub mod bench;
pub mod error;
pub mod fem;
pub mod flow;
pub mod mesh;
pub mod output;

pub use error::{Error, Result};

#[cfg(test)]
mod properties;

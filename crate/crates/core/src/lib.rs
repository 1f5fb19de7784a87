//! Schwarzschild black hole rendering with precomputed geodesic tables.

pub mod camera;
pub mod disc;
pub mod error;
pub mod geodesic;
pub mod math;
pub mod oracle;
pub mod render;
pub mod shading;
pub mod starfield;
pub mod tables;
pub mod tracer;

pub use error::{Error, Result};

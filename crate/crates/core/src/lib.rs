pub mod engine;
pub mod error;
pub mod geometry;
pub mod index;
pub mod kernels;
pub mod measure;
pub mod point;
pub mod pipeline;
pub mod potential;
pub mod quadrature;
pub mod rng;
pub mod shrink;

pub use error::{Error, Result};
pub use point::Point;

pub mod cli;
pub mod config;
pub mod error;
pub mod geometry;
pub mod gmls;
pub mod jet;
pub mod manufactured;
pub mod output;
pub mod point_cloud;
pub mod sparse;
pub mod stokes;
pub mod study;
pub mod surface_ops;

pub use error::{Error, Result};

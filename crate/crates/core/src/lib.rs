//! Detector-agnostic multi-object tracking with littering event detection.

pub mod assignment;
pub mod association;
pub mod config;
pub mod embedding;
pub mod error;
pub mod events;
pub mod geometry;
pub mod identity;
pub mod io;
pub mod linalg;
pub mod metrics;
pub mod motion;
pub mod pipeline;
pub mod postprocess;
pub mod sim;
pub mod tracker;

pub use error::{Error, ErrorKind, Result};

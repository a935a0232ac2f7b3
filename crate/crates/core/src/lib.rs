pub mod bench;
pub mod cost;
pub mod error;
pub mod executor;
pub mod geometry;
pub mod graph;
pub mod metrics;
pub mod optimizer;
pub mod parallel;
pub mod scenes;
pub mod world;

pub use error::{Error, Result};

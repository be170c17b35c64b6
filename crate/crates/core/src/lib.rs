pub mod atlas;
pub mod classifier;
pub mod datasets;
pub mod engine;
pub mod experiments;
pub mod export;
pub mod introspector;
pub mod persist;
mod error;

pub use error::{Error, Result};

//! File formats, run configuration and stage orchestration around
//! `hgmae-core`.

pub mod artifacts;
pub mod checkpoint;
pub mod config;
pub mod dataset;
pub mod error;
pub mod pipeline;
pub mod sweep;

pub use error::{Failure, Kind, Result};

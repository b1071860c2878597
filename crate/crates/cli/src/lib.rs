//! Command-line pipeline around `adequacy-core`: configuration, artifact
//! layout, the run manifest and the individual steps.

pub mod config;
pub mod manifest;
pub mod pipeline;

pub use config::Config;
pub use pipeline::{Pipeline, Step};

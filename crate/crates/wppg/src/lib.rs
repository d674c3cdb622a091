//! File formats, the staged pipeline and the `wppg` command line built on
//! `wppg-core`.

pub mod checkpoint;
pub mod config;
pub mod error;
pub mod ingest;
pub mod pipeline;
pub mod report;
pub mod segstore;
pub mod synthetic;

pub use config::PipelineConfig;
pub use error::{CliError, CliResult};
pub use pipeline::{Pipeline, Stage};

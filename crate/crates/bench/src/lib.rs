//! Benchmark runner for `aquaseg-core`: configuration, parallel evaluation
//! over a dataset manifest, and report files.

pub mod cli;
pub mod config;
pub mod error;
pub mod report;
pub mod runner;
pub mod sentences;

pub use config::RunConfig;
pub use error::{BenchError, EXIT_CONFIG, EXIT_DATA};
pub use report::emit_report;
pub use runner::{run, Pipeline};

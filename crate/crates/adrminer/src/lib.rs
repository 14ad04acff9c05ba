//! File formats, configuration and the pipeline driver for `adrminer-core`.
//!
//! The `adrminer` binary exposes three subcommands: `synth` writes a
//! synthetic cohort, `mine` writes the contrast candidates, `run` writes the
//! ranked report.

pub mod config;
pub mod ingest;
pub mod pipeline;

pub use config::RunConfig;
pub use ingest::{load_cohort, write_fixture, RawTables};
pub use pipeline::{cmd_mine, cmd_run, cmd_synth, PipelineError, Summary};

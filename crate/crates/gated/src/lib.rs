//! Configuration, file formats and the end-to-end pipeline around
//! [`gated_core`].

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod csv_io;
pub mod pipeline;
pub mod report;
pub mod trace_io;

pub use config::{load_config, save_config, ConfigError, RunConfig};
pub use pipeline::{run_pipeline, PipelineError, PipelineOutput};
pub use report::Report;
pub use trace_io::{load_traces, save_traces, TraceFileError};

//! IO, file formats, storage and orchestration around `chainsight-core`.
//!
//! This crate owns everything that touches the outside world: JSONL and CSV
//! ingestion, the JSON-RPC block fetcher, the chunked time-series store, the
//! dataset and checkpoint file formats, PGM frame export, the synthetic
//! fixture generator, and the staged pipeline the `chainsight` binary
//! drives.

pub mod checkpoint;
pub mod config;
pub mod dataset_file;
pub mod fixture;
pub mod formats;
pub mod frames;
pub mod jsonl;
pub mod pipeline;
pub mod rpc;
pub mod store;
pub mod ticks;

pub use pipeline::{Pipeline, PipelineError};

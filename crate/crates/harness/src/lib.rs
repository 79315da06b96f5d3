//! Toy-scale training harness for adaptive NS step allocation: a small
//! transformer, a synthetic data stream, the training loop, run artifacts and
//! trace analytics.

pub mod artifacts;
pub mod config;
pub mod data;
pub mod error;
pub mod model;
pub mod trace;
pub mod train;

pub use config::{OptimizerKind, RunConfig};
pub use error::{HarnessError, Result};
pub use model::{ToyModel, ToyModelConfig};
pub use trace::{trace_stats, TraceReport};
pub use train::{run_training, RunArtifacts};

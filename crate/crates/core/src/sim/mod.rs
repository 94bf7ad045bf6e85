//! Synchronous parameter-server training simulator.
//!
//! Each round every worker draws its shard of the mini-batch, computes the
//! exact gradient, compresses it layer by layer and encodes it with the wire
//! codec. The server decodes and averages the messages in worker order and
//! applies `w ← w − γ ĝ`. Every random draw comes from a stream addressed by
//! `(master_seed, round, worker, layer)`, so a seed fixes every byte of every
//! message.

mod config;
mod task;
mod train;

pub use config::{Method, TrainConfig};
pub use task::{Layer, Task, TaskKind, TaskSpec};
pub use train::{
    aggregate, compress_layer, initial_params, step_size_grid, train, tune_step_size, worker_batch,
    worker_step, write_metrics_csv, RoundMetrics, Simulator, TrainResult, TrainSummary, TuneOutcome,
    TuneTrial, WorkerOutput, CSV_HEADER,
};

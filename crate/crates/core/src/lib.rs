//! Graph continual learning with learned lossless memories and debiased
//! replay.
//!
//! The pipeline: build a class-incremental task stream from a labelled graph
//! ([`stream`]), train a linear SGC classifier per task ([`model`]), compress
//! each finished task into a few synthetic feature rows by per-class gradient
//! matching ([`condense`]), and replay those memories under a
//! label-frequency-calibrated objective ([`replay`]). [`eval`] computes the
//! accuracy matrix and the AA/AF metrics; [`io`] pins the on-disk formats.
//!
//! Data-parallel inner loops (per-class condensation updates, per-task
//! evaluation, multi-seed runs) run on rayon with the default `parallel`
//! feature and fall back to sequential execution without it; results are
//! identical either way.

pub mod condense;
pub mod error;
pub mod eval;
pub mod exec;
pub mod graph;
pub mod io;
pub mod model;
pub mod replay;
pub mod seeds;
pub mod stream;

pub use condense::{
    condense, condense_traced, grad_matching_wrt_features, init_memory, matching_distance,
    sampled_memory, CondenseConfig, CondenseTrace, DistanceKind, SyntheticMemory,
};
pub use error::{Error, Result};
pub use eval::{
    average_accuracy, average_forgetting, task_accuracy, train_on_memory_accuracy, AccuracyMatrix,
    EvalMode,
};
pub use graph::{
    generate_sbm, normalize_adjacency, propagate, sample_neighborhood, NeighborSampler,
    PropagationMatrix, SampledSubgraph, SbmParams, SparseGraph,
};
pub use model::{
    adjusted_cross_entropy, cross_entropy, fit, fit_terms, forward, grad_theta, predict, Gradient,
    InitSampler, InitScheme, LinearSgcModel, Logits, LossTerm, OptimizerConfig, OptimizerKind,
};
pub use replay::{
    aggregate_metrics, buffer_extend, calibration_offsets, debiased_loss, run_seeds, run_stream,
    run_stream_observed, train_task, vanilla_replay_loss, CalibrationOffsets, ExperimentResult,
    MemoryBuffer, MemoryKind, MetricsSummary, ReplayConfig, ReplayObjective, StatBlock, Strategy,
    StreamOutcome,
};
pub use stream::{build_stream, Split, TaskGraph, TaskStream};

//! Experiment protocol around `lcbo-core`: cold start, budgets, repetitions,
//! best-feasible traces and their aggregation.

pub mod config;
pub mod error;
pub mod experiment;
pub mod report;

pub use config::{ExperimentConfig, Judge, Method, ProblemKind};
pub use error::HarnessError;
pub use experiment::{cold_start, random_search_baseline, run_experiment, run_lcbo, RunTrace};
pub use report::{AggregateRow, TraceRow};

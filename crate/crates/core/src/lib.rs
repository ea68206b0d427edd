//! Micro-benchmark selection and meta-evaluation for language-model
//! benchmarks.
//!
//! The pipeline: load a [`data::PredictionMatrix`], split models into
//! source and target sets, build a [`selection::MicroBenchmark`] with one of
//! the [`selection::Method`]s, and score it with the measures in
//! [`metaeval`]. [`harness`] repeats that over trials and sweeps.

pub mod data;
pub mod harness;
pub mod irt;
pub mod metaeval;
pub mod report;
pub mod seed;
pub mod selection;
pub mod synthetic;

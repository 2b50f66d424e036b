//! Offline driver for the evaluation engine: a synthetic benchmark
//! generator, a stand-in baseline algorithm and the command-line front end.

pub mod baseline;
pub mod cli;
pub mod synth;

pub use baseline::BaselineAlgorithm;
pub use synth::{generate_benchmark, SyntheticBenchmarkSpec};

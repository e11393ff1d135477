//! Experiment driver for the `varag` solvers: problem construction from
//! files or generators, reference solutions, multi-seed suites with trace
//! files and a JSON manifest, and bound verification.

pub mod cli;
pub mod config;
pub mod suite;

pub use config::{Loss, ProblemSpec, RunConfig, Solver};
pub use suite::{build_instance, run_suite, verify_dir, Instance, Manifest, Prepared};

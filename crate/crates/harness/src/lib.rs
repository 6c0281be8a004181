//! Orchestration for the Hardy-space toolkit: configuration, corpus
//! generation, the norm-equivalence experiment, kernel-estimate reports and
//! the per-operation dump commands behind the `hardy` CLI.

pub mod config;
pub mod corpus;
pub mod equivalence;
pub mod error;
pub mod kernel_reports;

pub use config::ExperimentConfig;
pub use corpus::{generate_corpus, random_potential, random_vector_potential};
pub use equivalence::{run_equivalence, EquivalenceReport};
pub use error::{HarnessError, Result};
pub use kernel_reports::run_kernel_reports;

//! Benchmarking toolkit for the Dynamic Binary Value (DBV) problem family.
//!
//! * [`problems`]: the four DBV versions, instance transforms and environment
//!   stepping.
//! * [`ga`]: a (mu +/, lambda) genetic algorithm with every knob exposed.
//! * [`metrics`]: fraction of correct bits, fixed-target times and ERT.
//! * [`runner`]: parameter grids, experiment protocols and file output.

pub mod bitstring;
pub mod error;
pub mod ga;
pub mod metrics;
pub mod problems;
pub mod runner;
pub mod seed;

pub use bitstring::{hamming, BitString};
pub use error::{Error, Result};
pub use problems::{
    binval_exact, make_problem, sample_weights, Candidate, DynBinValProblem, EnvState,
    Environment, InstanceTransform, ProblemDescriptor, ProblemVersion, Ranking,
};
pub use seed::{derive_seed, SeedSpec, StreamTag};
pub use ga::{
    mutate, produce_offspring, run_ga, select_survivors, uniform_crossover, GaParams, GaRun,
    Individual, Init, Mutator, RunOptions, RunResult, RunStreams, Selection, TrajectoryPoint,
};
pub use metrics::{ert, evals_to_fraction, fraction_correct, success_rate, RunSet};
pub use runner::{
    export_ioh, export_sweep_table, load_records, run_experiment, run_freq_sweep,
    run_stage_experiment, ExperimentConfig, RunRecord,
};

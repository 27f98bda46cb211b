//! Experiment configuration and the commands behind the `iwocs` binary.

pub mod commands;
pub mod config;

pub use commands::{
    cmd_compare, cmd_scaling, cmd_solve, cmd_validate_map, scaling_rows, MapReport, RunArtifacts,
    ScalingRow,
};
pub use config::{
    Algorithm, EnvironmentSpec, EvaluatorKind, ExperimentConfig, Overrides, SearcherKind,
};

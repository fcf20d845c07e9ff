//! Experiment configuration and orchestration.

pub mod config;
pub mod output;
pub mod runner;
pub mod scenario;

pub use config::{parse_config, ChannelMode, ExperimentConfig, UseCase, UseCaseConfig};
pub use output::{write_aggregate_csv, write_result, write_rounds_csv};
pub use runner::{
    aggregate_runs, run_error_free_baseline, run_monte_carlo, simulate_run, time_to_threshold,
    AggregateRow, MonteCarloResult, RunTrace, TraceRow,
};
pub use scenario::{scenario, ScenarioMember, SCENARIOS};

//! Generic distributed primal-dual subgradient engine.

pub mod problem;
pub mod schedule;
pub mod solver;

pub use problem::{ConstraintSubset, FnProblem, ProblemSpec};
pub use schedule::{DualSetMode, DualSetSchedule, StepSchedule};
pub use solver::{
    dual_update, primal_update, run_solver, AggregationChannel, ChannelRound, Divergence,
    PerfectChannel, RoundDiagnostics, RoundRecord, RoundReport, SolveOutcome, Solver,
    SolverConfig, SolverState,
};

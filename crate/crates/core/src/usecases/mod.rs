//! Concrete problems: smart-grid energy pricing and FDMA resource allocation.

pub mod fdma;
pub mod projection;
pub mod smartgrid;
pub mod stackelberg;

pub use fdma::{fdma_oracle, fdma_rate, BandwidthSharing, FdmaParams, FdmaProblem, FdmaSolution};
pub use projection::{project_capacity_simplex, project_simplex};
pub use smartgrid::{
    grid_revenue, optimal_price, pev_utility, smartgrid_oracle, PriceRule, SmartGridParams,
    SmartGridProblem, SmartGridSolution,
};
pub use stackelberg::{
    stackelberg_loop, PriceSource, StackelbergConfig, StackelbergOutcome, StageResult,
};

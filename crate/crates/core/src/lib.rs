//! Distributed primal-dual subgradient optimization with over-the-air
//! aggregation.
//!
//! Devices hold one convex constraint each and update their own Lagrange
//! multiplier; the server holds the primal iterate. Every round the devices
//! send their multiplier-weighted constraint subgradients simultaneously over a
//! fading multiple-access channel, so the server receives their (noisy,
//! partially observed) sum in a single channel use.
//!
//! Layout:
//!
//! * [`optim`]: problem abstraction, step and dual-set schedules, the solver loop.
//! * [`channel`]: Rician fading, channel inversion, participation, round timing.
//! * [`usecases`]: smart-grid Stackelberg pricing and FDMA power/bandwidth
//!   allocation, with their projections and reference solvers.
//! * [`bounds`]: evaluation of the constraint-violation and optimality-gap
//!   guarantees from estimated constants.
//! * [`harness`]: configuration, Monte Carlo orchestration, CSV output, scenarios.

pub mod bounds;
pub mod channel;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod optim;
pub mod usecases;

pub use error::{Error, Result};

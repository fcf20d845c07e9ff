use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::problem::ProblemSpec;
use super::schedule::{DualSetSchedule, StepSchedule};
use crate::error::{Error, Result};
use crate::linalg;

/// What the server recovers from one uplink round.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRound {
    /// Estimate of `Σ_i s_i` (the server-side scaled receive signal).
    pub aggregate: Vec<f64>,
    /// Indices of the devices whose signal made it into `aggregate`.
    pub participants: Vec<usize>,
    /// Simulated wall-clock length of the round in seconds.
    pub duration_s: f64,
}

/// Uplink model that turns the devices' local signals into the server's
/// aggregate.
pub trait AggregationChannel: Send {
    fn num_devices(&self) -> usize;

    fn transmit(&mut self, signals: &[Vec<f64>], rng: &mut dyn RngCore) -> Result<ChannelRound>;
}

impl<C: AggregationChannel + ?Sized> AggregationChannel for &mut C {
    fn num_devices(&self) -> usize {
        (**self).num_devices()
    }
    fn transmit(&mut self, signals: &[Vec<f64>], rng: &mut dyn RngCore) -> Result<ChannelRound> {
        (**self).transmit(signals, rng)
    }
}

impl<C: AggregationChannel + ?Sized> AggregationChannel for Box<C> {
    fn num_devices(&self) -> usize {
        (**self).num_devices()
    }
    fn transmit(&mut self, signals: &[Vec<f64>], rng: &mut dyn RngCore) -> Result<ChannelRound> {
        (**self).transmit(signals, rng)
    }
}

/// Noise-free uplink where every device always gets through.
#[derive(Debug, Clone)]
pub struct PerfectChannel {
    devices: usize,
    round_duration_s: f64,
}

impl PerfectChannel {
    pub fn new(devices: usize, round_duration_s: f64) -> Self {
        Self {
            devices,
            round_duration_s,
        }
    }
}

impl AggregationChannel for PerfectChannel {
    fn num_devices(&self) -> usize {
        self.devices
    }

    fn transmit(&mut self, signals: &[Vec<f64>], _rng: &mut dyn RngCore) -> Result<ChannelRound> {
        let dim = signals.first().map_or(0, Vec::len);
        let mut aggregate = vec![0.0; dim];
        for s in signals {
            if s.len() != dim {
                return Err(Error::DimensionMismatch {
                    context: "perfect channel signal",
                    expected: dim,
                    actual: s.len(),
                });
            }
            linalg::axpy(1.0, s, &mut aggregate);
        }
        Ok(ChannelRound {
            aggregate,
            participants: (0..signals.len()).collect(),
            duration_s: self.round_duration_s,
        })
    }
}

/// Iterates and running weighted-average accumulators.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverState {
    pub x: Vec<f64>,
    pub lambda: Vec<f64>,
    /// `Σ_j a_j x^j`
    pub x_avg_num: Vec<f64>,
    /// `Σ_j a_j λ^j`
    pub lambda_avg_num: Vec<f64>,
    /// `Z_k = Σ_j a_j`
    pub z: f64,
    pub round: usize,
}

impl SolverState {
    /// Fresh state with `λ^0 = 0`.
    pub fn new(x0: Vec<f64>, num_constraints: usize) -> Self {
        let dim = x0.len();
        Self {
            x: x0,
            lambda: vec![0.0; num_constraints],
            x_avg_num: vec![0.0; dim],
            lambda_avg_num: vec![0.0; num_constraints],
            z: 0.0,
            round: 0,
        }
    }

    pub fn weighted_averages(&self) -> Result<(Vec<f64>, Vec<f64>)> {
        if self.z <= 0.0 {
            return Err(Error::UndefinedAverage);
        }
        let inv = 1.0 / self.z;
        Ok((
            self.x_avg_num.iter().map(|v| v * inv).collect(),
            self.lambda_avg_num.iter().map(|v| v * inv).collect(),
        ))
    }

    pub fn x_hat(&self) -> Result<Vec<f64>> {
        self.weighted_averages().map(|(x, _)| x)
    }
}

/// Device-side multiplier update, projected onto `[0, bound]`.
pub fn dual_update(lambda_i: f64, a_k: f64, f_i: f64, bound: f64) -> f64 {
    (lambda_i + a_k * f_i).clamp(0.0, bound)
}

/// Server-side step `P_X[x - a_k (g0 + aggregate)]`.
pub fn primal_update(
    x: &[f64],
    a_k: f64,
    g0: &[f64],
    aggregate: &[f64],
    project: impl FnOnce(&mut [f64]),
) -> Result<Vec<f64>> {
    for (context, v) in [("objective subgradient", g0), ("aggregate", aggregate)] {
        if v.len() != x.len() {
            return Err(Error::DimensionMismatch {
                context,
                expected: x.len(),
                actual: v.len(),
            });
        }
    }
    let mut next: Vec<f64> = x
        .iter()
        .zip(g0.iter().zip(aggregate))
        .map(|(xi, (gi, yi))| xi - a_k * (gi + yi))
        .collect();
    project(&mut next);
    Ok(next)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub steps: StepSchedule,
    pub dual_set: DualSetSchedule,
    /// Abort once `‖x^k‖` exceeds this.
    pub divergence_threshold: f64,
}

impl SolverConfig {
    pub fn new(steps: StepSchedule, dual_set: DualSetSchedule) -> Self {
        Self {
            steps,
            dual_set,
            divergence_threshold: 1e9,
        }
    }
}

/// Metrics at the averaged iterate after a round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    /// Number of completed rounds; metrics refer to `x̂^round`.
    pub round: usize,
    pub sim_time_s: f64,
    pub participants: usize,
    /// `‖[F(x̂)]⁺‖`
    pub violation: f64,
    /// `f0(x̂)`
    pub objective: f64,
}

/// Per-round quantities needed to estimate the constants of the convergence
/// bounds. All refer to the pre-update iterate `(x^k, λ^k)`.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundDiagnostics {
    pub step: f64,
    /// `max_i ‖λ_i g_i(x^k)‖`
    pub max_signal_norm: f64,
    /// `‖g0(x^k) + Σ_i λ_i g_i(x^k)‖`
    pub lagrangian_x_norm: f64,
    /// `‖F(x^k)‖`
    pub lagrangian_lambda_norm: f64,
    pub x: Vec<f64>,
    pub lambda: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct RoundReport {
    pub record: RoundRecord,
    pub diagnostics: RoundDiagnostics,
    pub participant_ids: Vec<usize>,
}

/// Round-by-round driver for the distributed primal-dual loop.
pub struct Solver<P, C> {
    problem: P,
    channel: C,
    config: SolverConfig,
    state: SolverState,
    elapsed_s: f64,
}

impl<P: ProblemSpec, C: AggregationChannel> Solver<P, C> {
    pub fn new(problem: P, channel: C, config: SolverConfig, x0: Vec<f64>) -> Result<Self> {
        if x0.len() != problem.dim() {
            return Err(Error::DimensionMismatch {
                context: "initial iterate",
                expected: problem.dim(),
                actual: x0.len(),
            });
        }
        if channel.num_devices() != problem.num_constraints() {
            return Err(Error::DimensionMismatch {
                context: "channel device count",
                expected: problem.num_constraints(),
                actual: channel.num_devices(),
            });
        }
        let n = problem.num_constraints();
        Ok(Self {
            problem,
            channel,
            config,
            state: SolverState::new(x0, n),
            elapsed_s: 0.0,
        })
    }

    /// Continue from an existing iterate pair; averages and step counter restart.
    pub fn with_warm_start(mut self, x: Vec<f64>, lambda: Vec<f64>) -> Result<Self> {
        if lambda.len() != self.problem.num_constraints() || x.len() != self.problem.dim() {
            return Err(Error::DimensionMismatch {
                context: "warm start",
                expected: self.problem.dim() + self.problem.num_constraints(),
                actual: x.len() + lambda.len(),
            });
        }
        self.state.x = x;
        self.state.lambda = lambda;
        Ok(self)
    }

    pub fn with_elapsed(mut self, elapsed_s: f64) -> Self {
        self.elapsed_s = elapsed_s;
        self
    }

    pub fn state(&self) -> &SolverState {
        &self.state
    }

    pub fn problem(&self) -> &P {
        &self.problem
    }

    pub fn elapsed_s(&self) -> f64 {
        self.elapsed_s
    }

    pub fn into_state(self) -> SolverState {
        self.state
    }

    /// Executes one round: multiplier updates and uplink at the devices, then
    /// the projected primal step at the server.
    pub fn step(&mut self, rng: &mut dyn RngCore) -> Result<RoundReport> {
        let k = self.state.round;
        let a = self.config.steps.step(k);
        let problem = &self.problem;
        let x = &self.state.x;
        let lambda = &self.state.lambda;

        let f = problem.constraints(x);
        let z_next = self.state.z + a;
        let bound = self.config.dual_set.bound(k + 1, z_next);
        let lambda_next: Vec<f64> = lambda
            .iter()
            .zip(&f)
            .map(|(&l, &fi)| dual_update(l, a, fi, bound))
            .collect();

        // devices transmit with the multiplier they held when x^k arrived
        let signals: Vec<Vec<f64>> = lambda
            .iter()
            .enumerate()
            .map(|(i, &l)| {
                let mut g = problem.constraint_subgradient(i, x);
                if l == 0.0 {
                    g.iter_mut().for_each(|v| *v = 0.0);
                } else {
                    g.iter_mut().for_each(|v| *v *= l);
                }
                g
            })
            .collect();
        let g0 = problem.objective_subgradient(x);

        let mut lagrangian_x = g0.clone();
        let mut max_signal_norm: f64 = 0.0;
        for s in &signals {
            if s.len() != x.len() {
                return Err(Error::DimensionMismatch {
                    context: "constraint subgradient",
                    expected: x.len(),
                    actual: s.len(),
                });
            }
            max_signal_norm = max_signal_norm.max(linalg::norm2(s));
            linalg::axpy(1.0, s, &mut lagrangian_x);
        }
        let diagnostics = RoundDiagnostics {
            step: a,
            max_signal_norm,
            lagrangian_x_norm: linalg::norm2(&lagrangian_x),
            lagrangian_lambda_norm: linalg::norm2(&f),
            x: x.clone(),
            lambda: lambda.clone(),
        };

        let outcome = self.channel.transmit(&signals, rng)?;
        if outcome.aggregate.len() != x.len() {
            return Err(Error::DimensionMismatch {
                context: "channel aggregate",
                expected: x.len(),
                actual: outcome.aggregate.len(),
            });
        }
        let x_next = primal_update(x, a, &g0, &outcome.aggregate, |v| problem.project(v))?;

        let norm = linalg::norm2(&x_next);
        if !norm.is_finite() || lambda_next.iter().any(|l| !l.is_finite()) {
            return Err(Error::Diverged {
                round: k,
                reason: "non-finite iterate".into(),
            });
        }
        if norm > self.config.divergence_threshold {
            return Err(Error::Diverged {
                round: k,
                reason: format!(
                    "‖x‖ = {norm:.3e} exceeds {:.1e}",
                    self.config.divergence_threshold
                ),
            });
        }

        // x̂^{k+1} averages x^0..x^k
        linalg::axpy(a, &self.state.x, &mut self.state.x_avg_num);
        linalg::axpy(a, &self.state.lambda, &mut self.state.lambda_avg_num);
        self.state.z = z_next;
        self.state.x = x_next;
        self.state.lambda = lambda_next;
        self.state.round = k + 1;
        self.elapsed_s += outcome.duration_s;

        let x_hat = self.state.x_hat()?;
        let record = RoundRecord {
            round: k + 1,
            sim_time_s: self.elapsed_s,
            participants: outcome.participants.len(),
            violation: self.problem.violation(&x_hat),
            objective: self.problem.objective(&x_hat),
        };
        Ok(RoundReport {
            record,
            diagnostics,
            participant_ids: outcome.participants,
        })
    }
}

/// Divergence details for a run that was cut short.
#[derive(Debug, Clone, PartialEq)]
pub struct Divergence {
    pub round: usize,
    pub reason: String,
}

#[derive(Debug, Clone)]
pub struct SolveOutcome {
    pub records: Vec<RoundRecord>,
    pub final_state: SolverState,
    pub diverged: Option<Divergence>,
}

/// Runs `rounds` rounds from `x0` (projected onto `X` first) with an RNG
/// seeded from `seed`. Divergence stops the run early and is reported in the
/// outcome rather than as an error.
pub fn run_solver<P: ProblemSpec, C: AggregationChannel>(
    problem: P,
    channel: C,
    config: SolverConfig,
    x0: &[f64],
    rounds: usize,
    seed: u64,
) -> Result<SolveOutcome> {
    if rounds == 0 {
        return Err(Error::invalid("rounds", "need at least one round"));
    }
    let x0 = problem.projected(x0);
    let mut solver = Solver::new(problem, channel, config, x0)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut records = Vec::with_capacity(rounds);
    let mut diverged = None;
    for _ in 0..rounds {
        match solver.step(&mut rng) {
            Ok(report) => records.push(report.record),
            Err(Error::Diverged { round, reason }) => {
                diverged = Some(Divergence { round, reason });
                break;
            }
            Err(e) => return Err(e),
        }
    }
    Ok(SolveOutcome {
        records,
        final_state: solver.into_state(),
        diverged,
    })
}

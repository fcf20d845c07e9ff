//! Monte Carlo orchestration: instance drawing, per-run simulation, and
//! aggregation across runs.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{ChannelMode, ExperimentConfig, FdmaConfig, SmartGridConfig, UseCaseConfig};
use crate::channel::{
    aircomp_round_duration, bottleneck_devices, db_to_linear, dbm_to_watts,
    participation_probability, AirCompChannel, ErrorFreeChannel, FadingParams,
};
use crate::error::{Error, Result};
use crate::optim::{
    AggregationChannel, ConstraintSubset, Divergence, DualSetSchedule, ProblemSpec, Solver,
    SolverConfig, StepSchedule,
};
use crate::usecases::{
    pev_utility, project_capacity_simplex, stackelberg_loop, FdmaParams, FdmaProblem, SmartGridParams,
    StackelbergConfig,
};

/// One line of the per-round CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub run_id: usize,
    pub round: usize,
    pub sim_time_s: f64,
    pub participants: usize,
    pub violation: f64,
    pub objective: f64,
    pub price: Option<f64>,
    pub sum_rate: Option<f64>,
}

/// One line of the aggregate CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub round: usize,
    pub sim_time_s_mean: f64,
    pub violation_mean: f64,
    pub violation_stderr: f64,
    pub objective_mean: f64,
    pub objective_stderr: f64,
    pub participants_mean: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StackelbergSummary {
    pub converged: bool,
    /// Announced prices, starting with the initial one.
    pub prices: Vec<f64>,
    pub final_revenue: f64,
}

impl StackelbergSummary {
    pub fn final_price(&self) -> f64 {
        *self.prices.last().expect("initial price is always recorded")
    }
}

#[derive(Debug, Clone)]
pub struct RunTrace {
    pub run_id: usize,
    pub seed: u64,
    pub rows: Vec<TraceRow>,
    pub diverged: Option<Divergence>,
    pub excluded_devices: Vec<usize>,
    pub stackelberg: Option<StackelbergSummary>,
}

#[derive(Debug, Clone)]
pub struct MonteCarloResult {
    pub config: ExperimentConfig,
    pub runs: Vec<RunTrace>,
    pub aggregate: Vec<AggregateRow>,
}

impl MonteCarloResult {
    pub fn diverged_runs(&self) -> Vec<usize> {
        self.runs
            .iter()
            .filter(|r| r.diverged.is_some())
            .map(|r| r.run_id)
            .collect()
    }

    pub fn rows(&self) -> impl Iterator<Item = &TraceRow> {
        self.runs.iter().flat_map(|r| r.rows.iter())
    }

    /// Mean of the last recorded `sum_rate` over non-diverged runs.
    pub fn final_sum_rate_mean(&self) -> Option<f64> {
        let finals: Vec<f64> = self
            .runs
            .iter()
            .filter(|r| r.diverged.is_none())
            .filter_map(|r| r.rows.last().and_then(|row| row.sum_rate))
            .collect();
        (!finals.is_empty()).then(|| finals.iter().sum::<f64>() / finals.len() as f64)
    }

    /// Mean final Stackelberg price over non-diverged runs.
    pub fn final_price_mean(&self) -> Option<f64> {
        let finals: Vec<f64> = self
            .runs
            .iter()
            .filter(|r| r.diverged.is_none())
            .filter_map(|r| r.stackelberg.as_ref().map(StackelbergSummary::final_price))
            .collect();
        (!finals.is_empty()).then(|| finals.iter().sum::<f64>() / finals.len() as f64)
    }
}

/// Seed of run `run_index`.
pub fn run_seed(config: &ExperimentConfig, run_index: usize) -> u64 {
    config.seed.wrapping_add(run_index as u64)
}

/// Random problem data and starting point of one run.
#[derive(Debug, Clone)]
pub struct Instance {
    pub fading: Vec<FadingParams>,
    pub problem: InstanceProblem,
    pub x0: Vec<f64>,
}

#[derive(Debug, Clone)]
pub enum InstanceProblem {
    SmartGrid(SmartGridParams),
    Fdma(FdmaProblem),
}

/// Draws device distances, use-case data and `x^0` in a fixed order.
pub fn draw_instance<R: RngCore>(config: &ExperimentConfig, rng: &mut R) -> Result<Instance> {
    let [d_lo, d_hi] = config.distance_ratio_range;
    let t0 = db_to_linear(config.t0_db);
    let fading = (0..config.devices)
        .map(|_| {
            let d = if d_hi > d_lo { rng.random_range(d_lo..=d_hi) } else { d_lo };
            FadingParams::new(t0, d, config.path_loss_exponent, config.rician_factor)
        })
        .collect::<Result<Vec<_>>>()?;
    let (problem, x0) = match &config.use_case {
        UseCaseConfig::SmartGrid(sg) => draw_smart_grid(config.devices, sg, rng)?,
        UseCaseConfig::Fdma(f) => draw_fdma(config, f, &fading, rng)?,
    };
    Ok(Instance {
        fading,
        problem,
        x0,
    })
}

fn uniform<R: RngCore>(rng: &mut R, [lo, hi]: [f64; 2]) -> f64 {
    if hi > lo {
        rng.random_range(lo..=hi)
    } else {
        lo
    }
}

fn draw_smart_grid<R: RngCore>(
    devices: usize,
    sg: &SmartGridConfig,
    rng: &mut R,
) -> Result<(InstanceProblem, Vec<f64>)> {
    let b: Vec<f64> = (0..devices).map(|_| uniform(rng, sg.battery_range)).collect();
    let s: Vec<f64> = (0..devices).map(|_| uniform(rng, sg.satisfaction_range)).collect();
    let params = SmartGridParams::new(b, s, sg.capacity, sg.initial_price)?;
    let peak = |n: usize| ((params.b[n] - params.price) / params.s[n]).max(0.0);
    let u0: Vec<f64> = (0..devices)
        .map(|n| peak(n) * (1.0 + sg.demand_init_jitter * rng.random_range(-1.0..=1.0)))
        .collect();
    let u0 = project_capacity_simplex(&u0, sg.capacity);
    let y0: Vec<f64> = (0..devices)
        .map(|n| {
            pev_utility(params.b[n], params.s[n], params.price, u0[n])
                + uniform(rng, sg.epigraph_offset_range)
        })
        .collect();
    let x0 = [u0, y0].concat();
    Ok((InstanceProblem::SmartGrid(params), x0))
}

fn draw_fdma<R: RngCore>(
    config: &ExperimentConfig,
    f: &FdmaConfig,
    fading: &[FadingParams],
    rng: &mut R,
) -> Result<(InstanceProblem, Vec<f64>)> {
    let mut gains = Vec::with_capacity(config.devices * f.bands);
    for link in fading {
        for _ in 0..f.bands {
            gains.push(link.sample_magnitude(rng));
        }
    }
    let problem = FdmaProblem::new(FdmaParams {
        users: config.devices,
        bands: f.bands,
        bandwidth_hz: config.bandwidth_hz,
        n0: dbm_to_watts(f.n0_dbm_per_hz),
        power: f.total_power,
        rate_threshold: f.rate_threshold_bps,
        gains,
        rate_scale: f.rate_scale,
        sharing: f.sharing,
    })?;
    let x0: Vec<f64> = problem
        .params()
        .uniform_allocation()
        .into_iter()
        .map(|v| v * (1.0 + f.init_jitter * rng.random_range(-1.0..=1.0)))
        .collect();
    Ok((InstanceProblem::Fdma(problem), x0))
}

pub fn solver_config(config: &ExperimentConfig) -> Result<SolverConfig> {
    Ok(SolverConfig::new(
        StepSchedule::harmonic(config.step_c1, config.step_c2)?,
        DualSetSchedule::practical(config.zeta, config.theta)?,
    ))
}

/// Uplink for the configured channel mode over the given device links.
pub fn build_channel(
    config: &ExperimentConfig,
    fading: Vec<FadingParams>,
) -> Result<Box<dyn AggregationChannel>> {
    Ok(match config.channel {
        ChannelMode::Aircomp => {
            let mut ch = AirCompChannel::new(
                fading,
                config.beta,
                dbm_to_watts(config.sigma2_dbm),
                config.p_max,
                aircomp_round_duration(config.symbols, config.bandwidth_hz),
            )?;
            if config.full_participation {
                ch = ch.with_full_participation();
            }
            Box::new(ch)
        }
        ChannelMode::ErrorFree => Box::new(ErrorFreeChannel::new(
            fading,
            config.symbols,
            config.p_max,
            dbm_to_watts(config.noise_psd_dbm_per_hz) * config.bandwidth_hz,
            config.bandwidth_hz,
        )?),
    })
}

fn rng_stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Simulates run `run_index` of the experiment.
pub fn simulate_run(config: &ExperimentConfig, run_index: usize) -> Result<RunTrace> {
    let seed = run_seed(config, run_index);
    let mut instance_rng = rng_stream(seed, 0);
    let mut channel_rng = rng_stream(seed, 1);
    let mut probe_rng = rng_stream(seed, 2);
    let instance = draw_instance(config, &mut instance_rng)?;

    // Devices that cannot get their first update through are dropped. With
    // zero initial multipliers every first signal is zero, so this only
    // triggers for custom starting points.
    let first_signal_norm2 = 0.0;
    let gammas = instance
        .fading
        .iter()
        .map(|f| {
            participation_probability(
                first_signal_norm2,
                config.beta,
                config.p_max,
                f,
                config.participation_samples,
                &mut probe_rng,
            )
        })
        .collect::<Result<Vec<_>>>()?;
    let excluded = match config.channel {
        ChannelMode::Aircomp if !config.full_participation => {
            bottleneck_devices(&gammas, config.exclusion_threshold)
        }
        _ => Vec::new(),
    };
    let kept: Vec<usize> = (0..config.devices).filter(|i| !excluded.contains(i)).collect();
    if kept.is_empty() {
        return Err(Error::InvalidChannel("every device was excluded".into()));
    }
    let fading: Vec<FadingParams> = kept.iter().map(|&i| instance.fading[i]).collect();
    let mut channel = build_channel(config, fading)?;
    let solver = solver_config(config)?;

    let mut trace = RunTrace {
        run_id: run_index,
        seed,
        rows: Vec::new(),
        diverged: None,
        excluded_devices: excluded,
        stackelberg: None,
    };
    match (instance.problem, &config.use_case) {
        (InstanceProblem::Fdma(problem), UseCaseConfig::Fdma(f)) => {
            let scale = f.rate_scale;
            let sub = ConstraintSubset::new(problem, kept);
            let x0 = sub.projected(&instance.x0);
            let mut s = Solver::new(&sub, &mut channel, solver, x0)?;
            for _ in 0..config.rounds {
                match s.step(&mut channel_rng) {
                    Ok(report) => {
                        let x_hat = s.state().x_hat()?;
                        let r = report.record;
                        trace.rows.push(TraceRow {
                            run_id: run_index,
                            round: r.round,
                            sim_time_s: r.sim_time_s,
                            participants: r.participants,
                            violation: r.violation,
                            objective: r.objective,
                            price: None,
                            sum_rate: Some(sub.inner().sum_rate(&x_hat) * scale),
                        });
                    }
                    Err(Error::Diverged { round, reason }) => {
                        trace.diverged = Some(Divergence { round, reason });
                        break;
                    }
                    Err(e) => return Err(e),
                }
            }
        }
        (InstanceProblem::SmartGrid(params), UseCaseConfig::SmartGrid(sg)) => {
            let params = SmartGridParams::new(
                kept.iter().map(|&i| params.b[i]).collect(),
                kept.iter().map(|&i| params.s[i]).collect(),
                params.capacity,
                params.price,
            )?;
            let n = config.devices;
            let x0: Vec<f64> = kept
                .iter()
                .map(|&i| instance.x0[i])
                .chain(kept.iter().map(|&i| instance.x0[n + i]))
                .collect();
            let game = StackelbergConfig {
                solver,
                rounds_per_stage: config.rounds,
                tolerance: sg.price_tolerance,
                max_stages: sg.max_stages,
                price_rule: sg.price_rule,
                price_source: sg.price_source,
            };
            let out = stackelberg_loop(&params, &game, &mut channel, &x0, &mut channel_rng)?;
            trace.rows = out
                .records()
                .map(|(price, r)| TraceRow {
                    run_id: run_index,
                    round: r.round,
                    sim_time_s: r.sim_time_s,
                    participants: r.participants,
                    violation: r.violation,
                    objective: r.objective,
                    price: Some(price),
                    sum_rate: None,
                })
                .collect();
            let mut prices = vec![params.price];
            prices.extend(out.stages.iter().map(|s| s.next_price));
            trace.stackelberg = Some(StackelbergSummary {
                converged: out.converged,
                prices,
                final_revenue: out.stages.last().map_or(0.0, |s| s.revenue),
            });
            trace.diverged = out.diverged;
        }
        _ => unreachable!("instance drawn for the configured use case"),
    }
    Ok(trace)
}

/// Per-round mean and standard error across the non-diverged runs that
/// reached that round.
pub fn aggregate_runs(runs: &[RunTrace]) -> Vec<AggregateRow> {
    let max_round = runs
        .iter()
        .filter(|r| r.diverged.is_none())
        .flat_map(|r| r.rows.iter().map(|row| row.round))
        .max()
        .unwrap_or(0);
    let mut buckets: Vec<Vec<&TraceRow>> = vec![Vec::new(); max_round + 1];
    for run in runs.iter().filter(|r| r.diverged.is_none()) {
        for row in &run.rows {
            buckets[row.round].push(row);
        }
    }
    buckets
        .iter()
        .enumerate()
        .filter(|(_, rows)| !rows.is_empty())
        .map(|(round, rows)| {
            let (sim_time_s_mean, _) = mean_stderr(rows.iter().map(|r| r.sim_time_s));
            let (violation_mean, violation_stderr) = mean_stderr(rows.iter().map(|r| r.violation));
            let (objective_mean, objective_stderr) = mean_stderr(rows.iter().map(|r| r.objective));
            let (participants_mean, _) = mean_stderr(rows.iter().map(|r| r.participants as f64));
            AggregateRow {
                round,
                sim_time_s_mean,
                violation_mean,
                violation_stderr,
                objective_mean,
                objective_stderr,
                participants_mean,
            }
        })
        .collect()
}

/// Sample mean and standard error of the mean (0 for a single sample).
pub fn mean_stderr(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let v: Vec<f64> = values.collect();
    let n = v.len() as f64;
    if v.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    // offset by the first sample so identical samples average exactly
    let mean = v[0] + v.iter().map(|x| x - v[0]).sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Runs every Monte Carlo repetition (in parallel) and aggregates them.
pub fn run_monte_carlo(config: &ExperimentConfig) -> Result<MonteCarloResult> {
    config.validate()?;
    let simulate = || {
        (0..config.runs)
            .into_par_iter()
            .map(|i| simulate_run(config, i))
            .collect::<Result<Vec<_>>>()
    };
    let runs = if config.workers > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(config.workers)
            .build()
            .map_err(|e| Error::invalid("workers", e.to_string()))?
            .install(simulate)?
    } else {
        simulate()?
    };
    let aggregate = aggregate_runs(&runs);
    Ok(MonteCarloResult {
        config: config.clone(),
        runs,
        aggregate,
    })
}

/// The same experiment over the error-free TDMA uplink.
pub fn run_error_free_baseline(config: &ExperimentConfig) -> Result<MonteCarloResult> {
    let mut baseline = config.clone();
    baseline.channel = ChannelMode::ErrorFree;
    run_monte_carlo(&baseline)
}

/// Simulated time after which the mean violation stays at or below
/// `threshold` for the rest of the trace.
pub fn time_to_threshold(aggregate: &[AggregateRow], threshold: f64) -> Option<f64> {
    let last_above = aggregate.iter().rposition(|r| !(r.violation_mean <= threshold));
    match last_above {
        None => aggregate.first().map(|r| r.sim_time_s_mean),
        Some(i) => aggregate.get(i + 1).map(|r| r.sim_time_s_mean),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::config::UseCase;

    fn small_fdma() -> ExperimentConfig {
        let mut c = ExperimentConfig::defaults(UseCase::Fdma);
        c.devices = 3;
        c.fdma_mut().unwrap().bands = 4;
        c.symbols = 8;
        c.rounds = 5;
        c.runs = 3;
        c
    }

    #[test]
    fn single_run_aggregate_equals_trace() {
        let mut c = small_fdma();
        c.runs = 1;
        let res = run_monte_carlo(&c).unwrap();
        let rows = &res.runs[0].rows;
        assert_eq!(res.aggregate.len(), rows.len());
        for (a, r) in res.aggregate.iter().zip(rows) {
            assert_eq!(a.violation_mean, r.violation);
            assert_eq!(a.objective_mean, r.objective);
            assert_eq!(a.violation_stderr, 0.0);
        }
    }

    #[test]
    fn aircomp_time_is_rounds_times_l_over_b() {
        let c = small_fdma();
        let res = run_monte_carlo(&c).unwrap();
        for row in res.rows() {
            assert_eq!(row.sim_time_s, row.round as f64 * (8.0 / 1e6));
        }
    }

    #[test]
    fn diverged_runs_are_excluded() {
        let mut runs = vec![
            RunTrace {
                run_id: 0,
                seed: 0,
                rows: vec![row(0, 1, 1.0)],
                diverged: None,
                excluded_devices: vec![],
                stackelberg: None,
            },
            RunTrace {
                run_id: 1,
                seed: 1,
                rows: vec![row(1, 1, 100.0)],
                diverged: Some(Divergence {
                    round: 1,
                    reason: "test".into(),
                }),
                excluded_devices: vec![],
                stackelberg: None,
            },
        ];
        let agg = aggregate_runs(&runs);
        assert_eq!(agg[0].violation_mean, 1.0);
        runs[1].diverged = None;
        assert_eq!(aggregate_runs(&runs)[0].violation_mean, 50.5);
    }

    fn row(run_id: usize, round: usize, violation: f64) -> TraceRow {
        TraceRow {
            run_id,
            round,
            sim_time_s: round as f64,
            participants: 1,
            violation,
            objective: 0.0,
            price: None,
            sum_rate: None,
        }
    }

    #[test]
    fn threshold_time_uses_last_crossing() {
        let agg: Vec<AggregateRow> = [3.0, 0.5, 2.0, 0.5, 0.1]
            .iter()
            .enumerate()
            .map(|(i, &v)| AggregateRow {
                round: i + 1,
                sim_time_s_mean: (i + 1) as f64,
                violation_mean: v,
                violation_stderr: 0.0,
                objective_mean: 0.0,
                objective_stderr: 0.0,
                participants_mean: 0.0,
            })
            .collect();
        assert_eq!(time_to_threshold(&agg, 1.0), Some(4.0));
        assert_eq!(time_to_threshold(&agg, 5.0), Some(1.0));
        assert_eq!(time_to_threshold(&agg, 0.01), None);
    }

    #[test]
    fn stderr_matches_definition() {
        let (m, se) = mean_stderr([1.0, 2.0, 3.0, 4.0].into_iter());
        assert_eq!(m, 2.5);
        assert!((se - (5.0f64 / 3.0 / 4.0).sqrt()).abs() < 1e-15);
    }
}

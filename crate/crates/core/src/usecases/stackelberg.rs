//! Leader/follower price iteration: solve the PEV stage at the current
//! price, let the grid re-price from the resulting demands, repeat.

use rand::RngCore;
use serde::{Deserialize, Serialize};

use super::smartgrid::{grid_revenue, price_update, PriceRule, SmartGridParams, SmartGridProblem};
use crate::error::{Error, Result};
use crate::optim::{AggregationChannel, Divergence, ProblemSpec, RoundRecord, Solver, SolverConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StackelbergConfig {
    pub solver: SolverConfig,
    pub rounds_per_stage: usize,
    /// Stop once `|p_{t+1} - p_t| <= tolerance * p_t`.
    pub tolerance: f64,
    pub max_stages: usize,
    pub price_rule: PriceRule,
    pub price_source: PriceSource,
}

/// Which primal point of a finished stage the grid prices from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PriceSource {
    /// The last iterate `x^K` of the stage.
    LastIterate,
    /// The step-weighted running average `x̂^K` of the stage.
    Averaged,
}

#[derive(Debug, Clone)]
pub struct StageResult {
    /// Price the PEVs responded to.
    pub price: f64,
    /// Demands the next price was computed from.
    pub demand: Vec<f64>,
    pub revenue: f64,
    /// Price announced for the next stage.
    pub next_price: f64,
    /// Per-round records; `round` counts from the start of the game.
    pub records: Vec<RoundRecord>,
}

#[derive(Debug, Clone)]
pub struct StackelbergOutcome {
    pub stages: Vec<StageResult>,
    pub converged: bool,
    pub diverged: Option<Divergence>,
}

impl StackelbergOutcome {
    /// Last announced price.
    pub fn final_price(&self) -> Option<f64> {
        self.stages.last().map(|s| s.next_price)
    }

    /// Every round record paired with the price in force during that round.
    pub fn records(&self) -> impl Iterator<Item = (f64, &RoundRecord)> {
        self.stages
            .iter()
            .flat_map(|s| s.records.iter().map(move |r| (s.price, r)))
    }
}

/// Runs the price game starting from `params.price` and primal point `x0`.
/// Each stage warm-starts from the previous stage's last iterates; step
/// sizes and running averages restart with every new price. Divergence
/// inside a stage ends the game and is reported in the outcome.
pub fn stackelberg_loop<C: AggregationChannel>(
    params: &SmartGridParams,
    config: &StackelbergConfig,
    channel: &mut C,
    x0: &[f64],
    rng: &mut dyn RngCore,
) -> Result<StackelbergOutcome> {
    if config.rounds_per_stage == 0 || config.max_stages == 0 {
        return Err(Error::invalid("stackelberg", "need at least one stage and one round"));
    }
    let n = params.num_devices();
    let mut price = params.price;
    let mut x = SmartGridProblem::new(params.clone()).projected(x0);
    let mut lambda = vec![0.0; n];
    let mut elapsed = 0.0;
    let mut round_offset = 0;
    let mut stages = Vec::new();

    for _ in 0..config.max_stages {
        let problem = SmartGridProblem::new(params.with_price(price));
        let mut solver = Solver::new(&problem, &mut *channel, config.solver.clone(), x.clone())?
            .with_warm_start(x, lambda)?
            .with_elapsed(elapsed);
        let mut records = Vec::with_capacity(config.rounds_per_stage);
        let mut diverged = None;
        for _ in 0..config.rounds_per_stage {
            match solver.step(rng) {
                Ok(report) => {
                    let mut r = report.record;
                    r.round += round_offset;
                    records.push(r);
                }
                Err(Error::Diverged { round, reason }) => {
                    diverged = Some(Divergence {
                        round: round + round_offset,
                        reason,
                    });
                    break;
                }
                Err(e) => return Err(e),
            }
        }
        if let Some(d) = diverged {
            return Ok(StackelbergOutcome {
                stages,
                converged: false,
                diverged: Some(d),
            });
        }
        elapsed = solver.elapsed_s();
        round_offset += config.rounds_per_stage;
        let state = solver.into_state();
        let demand = match config.price_source {
            PriceSource::LastIterate => state.x[..n].to_vec(),
            PriceSource::Averaged => state.x_hat()?[..n].to_vec(),
        };
        let next_price = price_update(params, &demand, config.price_rule);
        stages.push(StageResult {
            price,
            revenue: grid_revenue(price, &demand),
            demand,
            next_price,
            records,
        });
        x = state.x;
        lambda = state.lambda;
        let settled = (next_price - price).abs() <= config.tolerance * price.abs();
        let next_price = next_price.max(0.0);
        // U_n drops by (p' - p) u_n; moving y_n with it keeps f_n(x) unchanged
        for i in 0..n {
            x[n + i] -= (next_price - price) * x[i];
        }
        price = next_price;
        if settled {
            return Ok(StackelbergOutcome {
                stages,
                converged: true,
                diverged: None,
            });
        }
    }
    Ok(StackelbergOutcome {
        stages,
        converged: false,
        diverged: None,
    })
}

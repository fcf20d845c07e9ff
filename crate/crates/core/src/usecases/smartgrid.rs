//! Smart-grid energy trading: PEVs choose demands `u` at a grid price `p`,
//! subject to the grid's spare capacity `C`. The PEV stage is solved in
//! epigraph form over `x = {u, y}` with one constraint `y_n <= U_n(u_n)` per PEV.

use serde::{Deserialize, Serialize};

use super::projection::project_capacity_simplex_in_place;
use crate::error::{Error, Result};
use crate::optim::ProblemSpec;

/// `U(u) = b u - s u²/2 - p u`
pub fn pev_utility(b: f64, s: f64, p: f64, u: f64) -> f64 {
    b * u - 0.5 * s * u * u - p * u
}

/// `dU/du`
pub fn pev_marginal_utility(b: f64, s: f64, p: f64, u: f64) -> f64 {
    b - s * u - p
}

/// `z(p, u) = p Σu`
pub fn grid_revenue(p: f64, u: &[f64]) -> f64 {
    p * u.iter().sum::<f64>()
}

/// Price at which demand `u_star` is optimal for a PEV with parameters `(b, s)`.
pub fn optimal_price(b: f64, s: f64, u_star: f64) -> f64 {
    b - s * u_star
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmartGridParams {
    pub b: Vec<f64>,
    pub s: Vec<f64>,
    pub capacity: f64,
    pub price: f64,
}

impl SmartGridParams {
    pub fn new(b: Vec<f64>, s: Vec<f64>, capacity: f64, price: f64) -> Result<Self> {
        if b.is_empty() || b.len() != s.len() {
            return Err(Error::DimensionMismatch {
                context: "smart grid parameters",
                expected: b.len(),
                actual: s.len(),
            });
        }
        if b.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::invalid("b", "battery parameters must be positive"));
        }
        if s.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::invalid("s", "satisfaction parameters must be positive"));
        }
        if !(capacity.is_finite() && capacity > 0.0) {
            return Err(Error::invalid("capacity", format!("must be positive, got {capacity}")));
        }
        if !(price.is_finite() && price >= 0.0) {
            return Err(Error::invalid("price", format!("must be >= 0, got {price}")));
        }
        Ok(Self { b, s, capacity, price })
    }

    pub fn num_devices(&self) -> usize {
        self.b.len()
    }

    pub fn with_price(&self, price: f64) -> Self {
        Self {
            price,
            ..self.clone()
        }
    }

    pub fn total_utility(&self, u: &[f64]) -> f64 {
        u.iter()
            .enumerate()
            .map(|(n, &un)| pev_utility(self.b[n], self.s[n], self.price, un))
            .sum()
    }
}

/// The PEV stage as a constrained problem over `x = [u_1..u_N, y_1..y_N]`.
#[derive(Debug, Clone)]
pub struct SmartGridProblem {
    params: SmartGridParams,
}

impl SmartGridProblem {
    pub fn new(params: SmartGridParams) -> Self {
        Self { params }
    }

    pub fn params(&self) -> &SmartGridParams {
        &self.params
    }

    pub fn demands<'a>(&self, x: &'a [f64]) -> &'a [f64] {
        &x[..self.params.num_devices()]
    }
}

impl ProblemSpec for SmartGridProblem {
    fn dim(&self) -> usize {
        2 * self.params.num_devices()
    }

    fn num_constraints(&self) -> usize {
        self.params.num_devices()
    }

    fn objective(&self, x: &[f64]) -> f64 {
        -x[self.params.num_devices()..].iter().sum::<f64>()
    }

    fn objective_subgradient(&self, x: &[f64]) -> Vec<f64> {
        let n = self.params.num_devices();
        let mut g = vec![0.0; x.len()];
        g[n..].iter_mut().for_each(|v| *v = -1.0);
        g
    }

    fn constraint(&self, i: usize, x: &[f64]) -> f64 {
        let p = &self.params;
        x[p.num_devices() + i] - pev_utility(p.b[i], p.s[i], p.price, x[i])
    }

    fn constraint_subgradient(&self, i: usize, x: &[f64]) -> Vec<f64> {
        let p = &self.params;
        let n = p.num_devices();
        let mut g = vec![0.0; x.len()];
        g[i] = -pev_marginal_utility(p.b[i], p.s[i], p.price, x[i]);
        g[n + i] = 1.0;
        g
    }

    fn project(&self, x: &mut [f64]) {
        let n = self.params.num_devices();
        project_capacity_simplex_in_place(&mut x[..n], self.params.capacity);
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SmartGridSolution {
    pub u: Vec<f64>,
    /// Maximized total utility `Σ U_n(u_n*)`.
    pub utility: f64,
    /// Multiplier of the capacity constraint.
    pub capacity_price: f64,
}

impl SmartGridSolution {
    /// Optimal primal point of the epigraph problem, `y = U(u*)`.
    pub fn epigraph_point(&self, params: &SmartGridParams) -> Vec<f64> {
        let mut x = self.u.clone();
        x.extend(
            self.u
                .iter()
                .enumerate()
                .map(|(n, &un)| pev_utility(params.b[n], params.s[n], params.price, un)),
        );
        x
    }
}

/// Reference solution of `max Σ U_n(u_n)` s.t. `Σu <= C`, `u >= 0`, by
/// bisection on the capacity multiplier.
pub fn smartgrid_oracle(params: &SmartGridParams) -> SmartGridSolution {
    let demand = |mu: f64| -> Vec<f64> {
        params
            .b
            .iter()
            .zip(&params.s)
            .map(|(&b, &s)| ((b - params.price - mu) / s).max(0.0))
            .collect()
    };
    let total = |u: &[f64]| u.iter().sum::<f64>();
    let mut mu = 0.0;
    if total(&demand(0.0)) > params.capacity {
        let mut lo = 0.0;
        let mut hi = params.b.iter().cloned().fold(0.0, f64::max);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if total(&demand(mid)) > params.capacity {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        mu = 0.5 * (lo + hi);
    }
    let u = demand(mu);
    SmartGridSolution {
        utility: params.total_utility(&u),
        u,
        capacity_price: mu,
    }
}

/// How the grid turns the reported demands into a new price.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PriceRule {
    /// Evaluate `b_m - s_m u_m` at the device with the largest demand.
    LargestDemand,
    /// Average `b_n - s_n u_n` over devices with positive demand.
    MeanPositive,
}

pub fn price_update(params: &SmartGridParams, u: &[f64], rule: PriceRule) -> f64 {
    let largest = || {
        let m = u
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map_or(0, |(m, _)| m);
        optimal_price(params.b[m], params.s[m], u[m])
    };
    match rule {
        PriceRule::LargestDemand => largest(),
        PriceRule::MeanPositive => {
            let prices: Vec<f64> = u
                .iter()
                .enumerate()
                .filter(|(_, &un)| un > 0.0)
                .map(|(n, &un)| optimal_price(params.b[n], params.s[n], un))
                .collect();
            if prices.is_empty() {
                largest()
            } else {
                prices.iter().sum::<f64>() / prices.len() as f64
            }
        }
    }
}

//! Joint power and bandwidth allocation for an FDMA uplink: maximize the sum
//! rate subject to a minimum rate per user, a total power budget and a
//! bandwidth split.
//!
//! The primal vector is `x = [p, w]` with `p[n*K + k]` the power of user `n`
//! on band `k` and `w[n*K + k]` its bandwidth fraction of that band.

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use super::projection::{project_capacity_simplex_in_place, project_simplex_in_place};
use crate::error::{Error, Result};
use crate::linalg;
use crate::optim::ProblemSpec;

/// Smallest bandwidth fraction used inside gradient evaluations.
pub const W_FLOOR: f64 = 1e-9;

/// Shannon rate in bits/s of a user occupying fraction `w` of a band of
/// width `B/K` with power `p` and channel magnitude `h`. Zero when `w <= 0`.
pub fn fdma_rate(w: f64, p: f64, h: f64, bandwidth_hz: f64, bands: usize, n0: f64) -> f64 {
    if w <= 0.0 || p <= 0.0 {
        return 0.0;
    }
    let band = bandwidth_hz / bands as f64;
    w * band * (p * h * h / (w * n0 * band)).ln_1p() / std::f64::consts::LN_2
}

/// Which bandwidth fractions must sum to one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BandwidthSharing {
    /// Users split every band: `Σ_n w_{k,n} = 1` for each band `k`.
    PerBand,
    /// Each user splits one unit over the bands: `Σ_k w_{k,n} = 1` for each user `n`.
    PerUser,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FdmaParams {
    pub users: usize,
    pub bands: usize,
    pub bandwidth_hz: f64,
    /// Noise power spectral density (W/Hz).
    pub n0: f64,
    /// Total power budget (W).
    pub power: f64,
    /// Per-user rate threshold (bits/s).
    pub rate_threshold: f64,
    /// Channel magnitudes, `gains[n*K + k]`.
    pub gains: Vec<f64>,
    /// Rates are reported in units of `rate_scale` bits/s.
    pub rate_scale: f64,
    pub sharing: BandwidthSharing,
}

impl FdmaParams {
    pub fn validate(&self) -> Result<()> {
        if self.users == 0 || self.bands == 0 {
            return Err(Error::invalid("fdma", "need at least one user and one band"));
        }
        if self.gains.len() != self.users * self.bands {
            return Err(Error::DimensionMismatch {
                context: "fdma channel gains",
                expected: self.users * self.bands,
                actual: self.gains.len(),
            });
        }
        for (name, v) in [
            ("bandwidth_hz", self.bandwidth_hz),
            ("n0", self.n0),
            ("power", self.power),
            ("rate_scale", self.rate_scale),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::invalid(name, format!("must be positive, got {v}")));
            }
        }
        if !(self.rate_threshold.is_finite() && self.rate_threshold >= 0.0) {
            return Err(Error::invalid("rate_threshold", "must be >= 0"));
        }
        if self.gains.iter().any(|h| !(h.is_finite() && *h > 0.0)) {
            return Err(Error::invalid("gains", "channel magnitudes must be positive"));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        2 * self.users * self.bands
    }

    fn idx(&self, n: usize, k: usize) -> usize {
        n * self.bands + k
    }

    fn w_offset(&self) -> usize {
        self.users * self.bands
    }

    /// Equal split of power and bandwidth.
    pub fn uniform_allocation(&self) -> Vec<f64> {
        let nk = self.users * self.bands;
        let w = match self.sharing {
            BandwidthSharing::PerBand => 1.0 / self.users as f64,
            BandwidthSharing::PerUser => 1.0 / self.bands as f64,
        };
        let mut x = vec![self.power / nk as f64; nk];
        x.extend(std::iter::repeat_n(w, nk));
        x
    }
}

#[derive(Debug, Clone)]
pub struct FdmaProblem {
    params: FdmaParams,
}

impl FdmaProblem {
    pub fn new(params: FdmaParams) -> Result<Self> {
        params.validate()?;
        Ok(Self { params })
    }

    pub fn params(&self) -> &FdmaParams {
        &self.params
    }

    fn band_rate(&self, x: &[f64], n: usize, k: usize) -> f64 {
        let p = &self.params;
        let i = p.idx(n, k);
        fdma_rate(x[p.w_offset() + i], x[i], p.gains[i], p.bandwidth_hz, p.bands, p.n0) / p.rate_scale
    }

    /// `R_n` in units of `rate_scale`.
    pub fn user_rate(&self, x: &[f64], n: usize) -> f64 {
        (0..self.params.bands).map(|k| self.band_rate(x, n, k)).sum()
    }

    pub fn user_rates(&self, x: &[f64]) -> Vec<f64> {
        (0..self.params.users).map(|n| self.user_rate(x, n)).collect()
    }

    pub fn sum_rate(&self, x: &[f64]) -> f64 {
        self.user_rates(x).iter().sum()
    }

    /// Partial derivatives of `R_{k,n}` (scaled) w.r.t. `p_{k,n}` and `w_{k,n}`.
    fn band_rate_gradient(&self, x: &[f64], n: usize, k: usize) -> (f64, f64) {
        let p = &self.params;
        let i = p.idx(n, k);
        let w = x[p.w_offset() + i].max(W_FLOOR);
        let pw = x[i].max(0.0);
        let band = p.bandwidth_hz / p.bands as f64;
        let g = p.gains[i] * p.gains[i];
        let snr = pw * g / (w * p.n0 * band);
        let ln2 = std::f64::consts::LN_2;
        let d_p = g / (p.n0 * (1.0 + snr) * ln2);
        let d_w = band * (snr.ln_1p() - snr / (1.0 + snr)) / ln2;
        (d_p / p.rate_scale, d_w / p.rate_scale)
    }

    /// Gradient of `R_n` (scaled), nonzero only in user `n`'s entries.
    pub fn user_rate_gradient(&self, x: &[f64], n: usize) -> Vec<f64> {
        let p = &self.params;
        let mut g = vec![0.0; p.dim()];
        for k in 0..p.bands {
            let (d_p, d_w) = self.band_rate_gradient(x, n, k);
            let i = p.idx(n, k);
            g[i] = d_p;
            g[p.w_offset() + i] = d_w;
        }
        g
    }

    pub fn sum_rate_gradient(&self, x: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; self.params.dim()];
        for n in 0..self.params.users {
            linalg::axpy(1.0, &self.user_rate_gradient(x, n), &mut g);
        }
        g
    }
}

impl ProblemSpec for FdmaProblem {
    fn dim(&self) -> usize {
        self.params.dim()
    }

    fn num_constraints(&self) -> usize {
        self.params.users
    }

    fn objective(&self, x: &[f64]) -> f64 {
        -self.sum_rate(x)
    }

    fn objective_subgradient(&self, x: &[f64]) -> Vec<f64> {
        let mut g = self.sum_rate_gradient(x);
        g.iter_mut().for_each(|v| *v = -*v);
        g
    }

    fn constraint(&self, i: usize, x: &[f64]) -> f64 {
        self.params.rate_threshold / self.params.rate_scale - self.user_rate(x, i)
    }

    fn constraint_subgradient(&self, i: usize, x: &[f64]) -> Vec<f64> {
        let mut g = self.user_rate_gradient(x, i);
        g.iter_mut().for_each(|v| *v = -*v);
        g
    }

    fn project(&self, x: &mut [f64]) {
        let p = &self.params;
        let (power, w) = x.split_at_mut(p.w_offset());
        project_capacity_simplex_in_place(power, p.power);
        match p.sharing {
            BandwidthSharing::PerUser => {
                for chunk in w.chunks_mut(p.bands) {
                    project_simplex_in_place(chunk, 1.0);
                }
            }
            BandwidthSharing::PerBand => {
                let mut column = vec![0.0; p.users];
                for k in 0..p.bands {
                    for (n, c) in column.iter_mut().enumerate() {
                        *c = w[p.idx(n, k)];
                    }
                    project_simplex_in_place(&mut column, 1.0);
                    for (n, c) in column.iter().enumerate() {
                        w[p.idx(n, k)] = *c;
                    }
                }
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct FdmaSolution {
    pub x: Vec<f64>,
    /// Sum rate in units of `rate_scale`.
    pub sum_rate: f64,
    pub rates: Vec<f64>,
}

/// Settings for [`fdma_oracle`].
#[derive(Debug, Clone, Copy)]
pub struct OracleSettings {
    pub starts: usize,
    pub outer_iterations: usize,
    pub inner_iterations: usize,
    /// Accepted rate shortfall relative to the threshold.
    pub feasibility_tol: f64,
}

impl Default for OracleSettings {
    fn default() -> Self {
        Self {
            starts: 3,
            outer_iterations: 60,
            inner_iterations: 2000,
            feasibility_tol: 1e-6,
        }
    }
}

/// Reference optimum of the allocation problem for small instances, by an
/// augmented-Lagrangian method whose subproblems are solved with projected
/// gradient steps and backtracking, from several starting points.
pub fn fdma_oracle(
    problem: &FdmaProblem,
    settings: OracleSettings,
    rng: &mut dyn RngCore,
) -> Result<FdmaSolution> {
    let p = problem.params();
    let threshold = p.rate_threshold / p.rate_scale;
    let mut best: Option<FdmaSolution> = None;
    let mut least_shortfall = f64::INFINITY;
    for start in 0..settings.starts.max(1) {
        let mut x = if start == 0 {
            p.uniform_allocation()
        } else {
            (0..p.dim()).map(|_| rng.random_range(0.0..1.0)).collect()
        };
        problem.project(&mut x);
        let mut mu = vec![0.0; p.users];
        let mut rho = 10.0 / threshold.max(1e-12).powi(2).max(1e-12);
        rho = rho.min(1e6);
        for _ in 0..settings.outer_iterations {
            x = minimize_augmented(problem, &x, &mu, rho, threshold, settings.inner_iterations);
            let rates = problem.user_rates(&x);
            let mut worst: f64 = 0.0;
            for (m, r) in mu.iter_mut().zip(&rates) {
                let c = threshold - r;
                *m = (*m + rho * c).max(0.0);
                worst = worst.max(c);
            }
            if worst > 1e-3 * threshold.max(1e-12) {
                rho = (rho * 4.0).min(1e12);
            }
        }
        let rates = problem.user_rates(&x);
        let shortfall = rates.iter().map(|r| threshold - r).fold(0.0, f64::max);
        least_shortfall = least_shortfall.min(shortfall);
        if shortfall > settings.feasibility_tol * threshold.max(1.0) {
            continue;
        }
        let sum_rate = rates.iter().sum();
        if best.as_ref().is_none_or(|b| sum_rate > b.sum_rate) {
            best = Some(FdmaSolution { x, sum_rate, rates });
        }
    }
    best.ok_or_else(|| {
        Error::Infeasible(format!(
            "best allocation still misses the rate threshold by {least_shortfall:.3e}"
        ))
    })
}

fn augmented_value(problem: &FdmaProblem, x: &[f64], mu: &[f64], rho: f64, threshold: f64) -> f64 {
    let rates = problem.user_rates(x);
    let penalty: f64 = rates
        .iter()
        .zip(mu)
        .map(|(r, m)| ((m + rho * (threshold - r)).max(0.0).powi(2) - m * m) / (2.0 * rho))
        .sum();
    -rates.iter().sum::<f64>() + penalty
}

fn augmented_gradient(problem: &FdmaProblem, x: &[f64], mu: &[f64], rho: f64, threshold: f64) -> Vec<f64> {
    let p = problem.params();
    let mut g = vec![0.0; p.dim()];
    for n in 0..p.users {
        let weight = (mu[n] + rho * (threshold - problem.user_rate(x, n))).max(0.0);
        linalg::axpy(-(1.0 + weight), &problem.user_rate_gradient(x, n), &mut g);
    }
    g
}

fn minimize_augmented(
    problem: &FdmaProblem,
    x0: &[f64],
    mu: &[f64],
    rho: f64,
    threshold: f64,
    iterations: usize,
) -> Vec<f64> {
    let mut x = x0.to_vec();
    let mut value = augmented_value(problem, &x, mu, rho, threshold);
    let mut step = 1e-3;
    for _ in 0..iterations {
        let g = augmented_gradient(problem, &x, mu, rho, threshold);
        let mut accepted = false;
        for _ in 0..60 {
            let mut trial: Vec<f64> = x.iter().zip(&g).map(|(xi, gi)| xi - step * gi).collect();
            problem.project(&mut trial);
            let moved: Vec<f64> = trial.iter().zip(&x).map(|(a, b)| a - b).collect();
            let trial_value = augmented_value(problem, &trial, mu, rho, threshold);
            let decrease = linalg::dot(&g, &moved) + linalg::norm2_sq(&moved) / (2.0 * step);
            if trial_value <= value + decrease + 1e-15 * value.abs() {
                let progress = linalg::norm2(&moved);
                x = trial;
                value = trial_value;
                accepted = true;
                step *= 2.0;
                if progress < 1e-14 * (1.0 + linalg::norm2(&x)) {
                    return x;
                }
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    x
}

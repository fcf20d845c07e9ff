//! Convergence guarantees evaluated from (estimated) problem constants.
//!
//! All evaluators take the round count `k` and use the first `k` entries of
//! the step and participation sequences, so `Z_k = a_0 + ... + a_{k-1}`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::optim::RoundDiagnostics;

/// Inflation applied to every empirically estimated constant.
pub const SAFETY_FACTOR: f64 = 1.05;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundInputs {
    /// Bound on `‖λ_i g_i(x)‖`.
    pub g: f64,
    /// Bound on the Lagrangian subgradients, `L > G`.
    pub l: f64,
    /// Bound on `E‖x^k - x*‖`.
    pub r: f64,
    /// `E‖x^0 - x*‖²`
    pub x0_gap2: f64,
    /// `E‖λ^0‖²`
    pub lambda0_norm2: f64,
    /// Dual-set offset `ζ`.
    pub zeta: f64,
    pub steps: Vec<f64>,
    /// Mean participant count `Ā_j` per round.
    pub abar: Vec<f64>,
    pub beta: f64,
    pub sigma2: f64,
    pub n: usize,
}

/// The partial sums shared by every evaluator.
#[derive(Debug, Clone, Copy)]
struct Sums {
    z: f64,
    miss_a: f64,
    a2: f64,
    miss_a2: f64,
    miss2_a2: f64,
}

impl BoundInputs {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("G", self.g), ("L", self.l), ("R", self.r)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::BoundsUnavailable(format!("{name} must be positive, got {v}")));
            }
        }
        if self.l <= self.g {
            return Err(Error::BoundsUnavailable(format!(
                "need L > G, got L = {} and G = {}",
                self.l, self.g
            )));
        }
        if self.steps.len() != self.abar.len() {
            return Err(Error::DimensionMismatch {
                context: "participation sequence",
                expected: self.steps.len(),
                actual: self.abar.len(),
            });
        }
        let n = self.n as f64;
        if let Some(a) = self.abar.iter().find(|&&a| !(0.0..=n).contains(&a)) {
            return Err(Error::BoundsUnavailable(format!("Ā = {a} outside [0, {n}]")));
        }
        Ok(())
    }

    fn sums(&self, k: usize) -> Result<Sums> {
        if k == 0 {
            return Err(Error::UndefinedAverage);
        }
        if k > self.steps.len() || k > self.abar.len() {
            return Err(Error::BoundsUnavailable(format!(
                "round {k} beyond the {} recorded steps",
                self.steps.len().min(self.abar.len())
            )));
        }
        let n = self.n as f64;
        let mut s = Sums {
            z: 0.0,
            miss_a: 0.0,
            a2: 0.0,
            miss_a2: 0.0,
            miss2_a2: 0.0,
        };
        for (&a, &abar) in self.steps[..k].iter().zip(&self.abar[..k]) {
            let miss = n - abar;
            s.z += a;
            s.miss_a += miss * a;
            s.a2 += a * a;
            s.miss_a2 += miss * a * a;
            s.miss2_a2 += miss * miss * a * a;
        }
        Ok(s)
    }

    /// Terms shared by the violation bound and `δ_k`, before dividing by `Z_k`.
    fn common_numerator(&self, s: &Sums) -> f64 {
        self.r * self.g * s.miss_a
            + (self.beta * self.sigma2 + 1.5 * self.l * self.l) * s.a2
            + self.x0_gap2
            + 2.0 * self.l * self.g * s.miss_a2
            + self.l * self.l * s.miss2_a2
    }

    /// `Z_k`
    pub fn step_sum(&self, k: usize) -> Result<f64> {
        Ok(self.sums(k)?.z)
    }
}

/// Dual-set radius that minimizes the violation bound in round `k`.
pub fn optimal_r(zeta: f64, delta_k: f64, z_k: f64) -> f64 {
    (zeta + (2.0 * zeta * zeta + delta_k * z_k).sqrt()) / 2.0
}

pub fn delta_k(inputs: &BoundInputs, k: usize) -> Result<f64> {
    let s = inputs.sums(k)?;
    Ok(inputs.common_numerator(&s) / s.z)
}

/// `δ_1, ..., δ_k_max`, indexed so that entry `k` is `δ_k` (entry 0 repeats `δ_1`).
/// Suitable as the `deltas` of an optimal-radius dual set.
pub fn delta_sequence(inputs: &BoundInputs, k_max: usize) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(k_max + 1);
    for k in 1..=k_max {
        out.push(delta_k(inputs, k)?);
    }
    let first = *out.first().ok_or(Error::UndefinedAverage)?;
    out.insert(0, first);
    Ok(out)
}

/// Upper bound on `E‖[F(x̂^k)]⁺‖` for dual radius parameter `r`.
pub fn constraint_violation_bound(inputs: &BoundInputs, r: f64, k: usize) -> Result<f64> {
    if !(r > 0.0) {
        return Err(Error::invalid("r", format!("must be positive, got {r}")));
    }
    let s = inputs.sums(k)?;
    let zr = inputs.zeta + r;
    Ok((inputs.common_numerator(&s) + 2.0 * zr * zr) / (r * s.z))
}

/// Violation bound with `r = r*_k`.
pub fn constraint_violation_bound_optimal(inputs: &BoundInputs, k: usize) -> Result<f64> {
    let s = inputs.sums(k)?;
    let delta = inputs.common_numerator(&s) / s.z;
    constraint_violation_bound(inputs, optimal_r(inputs.zeta, delta, s.z), k)
}

/// Upper bound on `E[f0(x̂^k) - f0*]`.
pub fn optimality_gap_upper(inputs: &BoundInputs, k: usize) -> Result<f64> {
    let s = inputs.sums(k)?;
    let rg = inputs.r * inputs.g;
    let bracket = 0.5 * inputs.lambda0_norm2
        + inputs.x0_gap2
        + (inputs.beta * inputs.sigma2 + 1.5 * inputs.l * inputs.l) * s.a2
        + 2.0 * inputs.l * inputs.g * s.miss_a2
        + inputs.l * inputs.l * s.miss2_a2;
    Ok(rg / s.z * bracket + rg / s.z * s.miss_a)
}

/// Lower bound on `E[f0(x̂^k) - f0*]`.
pub fn optimality_gap_lower(zeta_like: f64, violation: f64) -> f64 {
    -zeta_like * violation
}

/// Empirical stand-ins for the assumption constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimatedConstants {
    pub g: f64,
    pub l: f64,
    pub r: f64,
    pub x0_gap2: f64,
}

/// Estimates `G`, `L`, `R` and `E‖x^0 - x*‖²` from instrumented runs
/// (one diagnostics sequence per run, starting at round 0). Maxima are
/// inflated by [`SAFETY_FACTOR`]; `L` is additionally kept strictly above `G`.
pub fn estimate_constants(
    traces: &[Vec<RoundDiagnostics>],
    x_star: Option<&[f64]>,
) -> Result<EstimatedConstants> {
    let x_star = x_star.ok_or_else(|| {
        Error::BoundsUnavailable("no reference optimum supplied; bounds disabled".into())
    })?;
    if traces.iter().all(Vec::is_empty) {
        return Err(Error::BoundsUnavailable("no recorded rounds".into()));
    }
    let mut g: f64 = 0.0;
    let mut l: f64 = 0.0;
    let mut r: f64 = 0.0;
    let mut x0_gap2 = 0.0;
    let mut runs = 0usize;
    for trace in traces.iter().filter(|t| !t.is_empty()) {
        for d in trace {
            if d.x.len() != x_star.len() {
                return Err(Error::DimensionMismatch {
                    context: "reference optimum",
                    expected: d.x.len(),
                    actual: x_star.len(),
                });
            }
            g = g.max(d.max_signal_norm);
            l = l.max(d.lagrangian_x_norm).max(d.lagrangian_lambda_norm);
            r = r.max(linalg::dist2(&d.x, x_star));
        }
        x0_gap2 += linalg::dist2(&trace[0].x, x_star).powi(2);
        runs += 1;
    }
    let g = SAFETY_FACTOR * g;
    let l = SAFETY_FACTOR * l.max(g);
    Ok(EstimatedConstants {
        g,
        l,
        r: SAFETY_FACTOR * r,
        x0_gap2: x0_gap2 / runs as f64,
    })
}

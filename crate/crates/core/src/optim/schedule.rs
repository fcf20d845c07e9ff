use serde::{Deserialize, Serialize};

use crate::bounds::optimal_r;
use crate::error::{Error, Result};

/// Diminishing step size `a_k = c1 / (c2 + k)`: square summable, not summable.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepSchedule {
    c1: f64,
    c2: f64,
}

impl StepSchedule {
    pub fn harmonic(c1: f64, c2: f64) -> Result<Self> {
        if !(c1.is_finite() && c1 > 0.0) {
            return Err(Error::invalid("c1", format!("must be positive, got {c1}")));
        }
        if !(c2.is_finite() && c2 > 0.0) {
            return Err(Error::invalid("c2", format!("must be positive, got {c2}")));
        }
        Ok(Self { c1, c2 })
    }

    pub fn c1(&self) -> f64 {
        self.c1
    }

    pub fn c2(&self) -> f64 {
        self.c2
    }

    pub fn step(&self, k: usize) -> f64 {
        self.c1 / (self.c2 + k as f64)
    }

    /// `a_0, ..., a_{k-1}`
    pub fn steps(&self, k: usize) -> Vec<f64> {
        (0..k).map(|j| self.step(j)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum DualSetMode {
    /// Radius `ζ′ + ϑ·sqrt(Z_k)`.
    Practical,
    /// Radius `ζ + r*_k` with `r*_k = (ζ + sqrt(2ζ² + δ_k Z_k)) / 2`. `deltas[k]`
    /// supplies `δ_k`; the last entry is reused past the end.
    OptimalR { deltas: Vec<f64> },
}

/// Box `{0 <= λ_i <= bound(k)}` holding the multipliers in round `k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualSetSchedule {
    zeta: f64,
    vartheta: f64,
    mode: DualSetMode,
}

impl DualSetSchedule {
    pub fn practical(zeta_prime: f64, vartheta: f64) -> Result<Self> {
        if !(zeta_prime.is_finite() && zeta_prime >= 0.0) {
            return Err(Error::invalid("zeta", format!("must be >= 0, got {zeta_prime}")));
        }
        if !(vartheta.is_finite() && vartheta > 0.0) {
            return Err(Error::invalid("theta", format!("must be > 0, got {vartheta}")));
        }
        Ok(Self {
            zeta: zeta_prime,
            vartheta,
            mode: DualSetMode::Practical,
        })
    }

    pub fn optimal_r(zeta: f64, deltas: Vec<f64>) -> Result<Self> {
        if !(zeta.is_finite() && zeta >= 0.0) {
            return Err(Error::invalid("zeta", format!("must be >= 0, got {zeta}")));
        }
        if deltas.is_empty() || deltas.iter().any(|d| !(d.is_finite() && *d >= 0.0)) {
            return Err(Error::invalid("deltas", "need at least one finite, nonnegative δ_k"));
        }
        Ok(Self {
            zeta,
            vartheta: 1.0,
            mode: DualSetMode::OptimalR { deltas },
        })
    }

    pub fn zeta(&self) -> f64 {
        self.zeta
    }

    pub fn vartheta(&self) -> f64 {
        self.vartheta
    }

    pub fn mode(&self) -> &DualSetMode {
        &self.mode
    }

    /// Box radius for round `k`, where `z` is the partial step sum `Z_k`.
    pub fn bound(&self, k: usize, z: f64) -> f64 {
        let z = z.max(0.0);
        match &self.mode {
            DualSetMode::Practical => self.zeta + self.vartheta * z.sqrt(),
            DualSetMode::OptimalR { deltas } => {
                let delta = deltas[k.min(deltas.len() - 1)];
                self.zeta + optimal_r(self.zeta, delta, z)
            }
        }
    }
}

use rand::{Rng, RngCore};
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// dBm to watts.
pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

/// Large-scale and Rician parameters of one device's link.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FadingParams {
    /// Path loss at the reference distance, linear scale.
    pub t0: f64,
    pub d_over_d0: f64,
    pub path_loss_exp: f64,
    /// Rician K-factor `ε` (LoS to scattered power ratio).
    pub epsilon: f64,
}

impl FadingParams {
    pub fn new(t0: f64, d_over_d0: f64, path_loss_exp: f64, epsilon: f64) -> Result<Self> {
        if !(t0.is_finite() && t0 > 0.0) {
            return Err(Error::invalid("t0", format!("must be positive, got {t0}")));
        }
        if !(d_over_d0.is_finite() && d_over_d0 >= 1.0) {
            return Err(Error::invalid("d_over_d0", format!("must be >= 1, got {d_over_d0}")));
        }
        if !path_loss_exp.is_finite() {
            return Err(Error::invalid("path_loss_exp", "must be finite"));
        }
        if !(epsilon >= 0.0) {
            return Err(Error::invalid("epsilon", format!("must be >= 0, got {epsilon}")));
        }
        Ok(Self {
            t0,
            d_over_d0,
            path_loss_exp,
            epsilon,
        })
    }

    /// `T0 (d/d0)^(-a)`, which is also `E|h|²`.
    pub fn mean_gain(&self) -> f64 {
        self.t0 * self.d_over_d0.powf(-self.path_loss_exp)
    }

    /// Draws `|h|` for one round. Always consumes exactly two normal
    /// variates, also when `ε` is infinite.
    pub fn sample_magnitude<R: RngCore + ?Sized>(&self, rng: &mut R) -> f64 {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        let (los, nlos) = if self.epsilon.is_infinite() {
            (1.0, 0.0)
        } else {
            let k = self.epsilon;
            ((k / (k + 1.0)).sqrt(), (1.0 / (k + 1.0)).sqrt())
        };
        // unit-modulus LoS component plus CN(0, 1) scatter
        let scatter = std::f64::consts::FRAC_1_SQRT_2;
        let real = los + nlos * scatter * re;
        let imag = nlos * scatter * im;
        self.mean_gain().sqrt() * real.hypot(imag)
    }
}

/// Draws one `|h|` per device.
pub fn sample_fading<R: RngCore + ?Sized>(params: &[FadingParams], rng: &mut R) -> Vec<f64> {
    params.iter().map(|p| p.sample_magnitude(rng)).collect()
}

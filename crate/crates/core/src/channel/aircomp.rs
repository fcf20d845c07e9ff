use rand::{Rng, RngCore};
use rand_distr::StandardNormal;

use super::fading::{sample_fading, FadingParams};
use crate::error::{Error, Result};
use crate::linalg;
use crate::optim::{AggregationChannel, ChannelRound};

/// Channel-inverted transmit vector `s / (√β h)`, or `None` when it would
/// exceed the peak power `P_max`.
pub fn transmit_signal(s: &[f64], h: f64, beta: f64, p_max: f64) -> Option<Vec<f64>> {
    if !(h > 0.0) || linalg::norm2_sq(s) > beta * p_max * h * h {
        return None;
    }
    let scale = 1.0 / (beta.sqrt() * h);
    Some(s.iter().map(|v| v * scale).collect())
}

/// Server estimate `Σ s_i + √β n` with `n ~ N(0, σ² I)`. Always draws one
/// normal variate per component so the RNG stream does not depend on `σ²`.
pub fn aggregate<'a, R: RngCore + ?Sized>(
    signals: impl IntoIterator<Item = &'a [f64]>,
    dim: usize,
    beta: f64,
    sigma2: f64,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let mut out = vec![0.0; dim];
    for s in signals {
        if s.len() != dim {
            return Err(Error::DimensionMismatch {
                context: "aggregated signal",
                expected: dim,
                actual: s.len(),
            });
        }
        linalg::axpy(1.0, s, &mut out);
    }
    let scale = (beta * sigma2).sqrt();
    for v in out.iter_mut() {
        let n: f64 = rng.sample(StandardNormal);
        *v += scale * n;
    }
    Ok(out)
}

/// Fading multiple-access uplink with channel inversion and peak-power
/// truncation.
#[derive(Debug, Clone)]
pub struct AirCompChannel {
    fading: Vec<FadingParams>,
    beta: f64,
    sigma2: f64,
    p_max: f64,
    round_duration_s: f64,
    full_participation: bool,
}

impl AirCompChannel {
    pub fn new(
        fading: Vec<FadingParams>,
        beta: f64,
        sigma2: f64,
        p_max: f64,
        round_duration_s: f64,
    ) -> Result<Self> {
        if !(beta.is_finite() && beta > 0.0) {
            return Err(Error::invalid("beta", format!("must be positive, got {beta}")));
        }
        if !(sigma2.is_finite() && sigma2 >= 0.0) {
            return Err(Error::invalid("sigma2", format!("must be >= 0, got {sigma2}")));
        }
        if !(p_max.is_finite() && p_max > 0.0) {
            return Err(Error::invalid("p_max", format!("must be positive, got {p_max}")));
        }
        Ok(Self {
            fading,
            beta,
            sigma2,
            p_max,
            round_duration_s,
            full_participation: false,
        })
    }

    /// Lets every device through regardless of its peak-power budget.
    pub fn with_full_participation(mut self) -> Self {
        self.full_participation = true;
        self
    }

    pub fn fading(&self) -> &[FadingParams] {
        &self.fading
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// Participating set for given signals and fading magnitudes.
    pub fn participants(&self, signals: &[Vec<f64>], h: &[f64]) -> Vec<usize> {
        signals
            .iter()
            .zip(h)
            .enumerate()
            .filter(|(_, (s, &hi))| {
                self.full_participation || transmit_signal(s, hi, self.beta, self.p_max).is_some()
            })
            .map(|(i, _)| i)
            .collect()
    }
}

impl AggregationChannel for AirCompChannel {
    fn num_devices(&self) -> usize {
        self.fading.len()
    }

    fn transmit(&mut self, signals: &[Vec<f64>], rng: &mut dyn RngCore) -> Result<ChannelRound> {
        if signals.len() != self.fading.len() {
            return Err(Error::DimensionMismatch {
                context: "aircomp signals",
                expected: self.fading.len(),
                actual: signals.len(),
            });
        }
        let dim = signals.first().map_or(0, Vec::len);
        let h = sample_fading(&self.fading, rng);
        let participants = self.participants(signals, &h);
        // √β h_i w_i recovers s_i exactly, so sum the s_i directly
        let aggregate = aggregate(
            participants.iter().map(|&i| signals[i].as_slice()),
            dim,
            self.beta,
            self.sigma2,
            rng,
        )?;
        Ok(ChannelRound {
            aggregate,
            participants,
            duration_s: self.round_duration_s,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn transmit_examples() {
        assert_eq!(transmit_signal(&[1.0, 0.0], 2.0, 4.0, 1.0), Some(vec![0.25, 0.0]));
        assert!(transmit_signal(&[1.0], 1.0, 1.0, 1.0).is_some());
        assert!(transmit_signal(&[1.0], 0.5f64.sqrt(), 1.0, 1.0).is_none());
    }

    #[test]
    fn emitted_power_within_budget() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..1000 {
            let s: Vec<f64> = (0..4).map(|_| rng.random_range(-3.0..3.0)).collect();
            let h = rng.random_range(0.01..2.0);
            let beta = 10f64.powf(rng.random_range(-2.0..4.0));
            if let Some(w) = transmit_signal(&s, h, beta, 0.5) {
                assert!(linalg::norm2_sq(&w) <= 0.5 * (1.0 + 1e-12));
            }
        }
    }

    #[test]
    fn noiseless_aggregate_is_exact_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let a = [1.0, 2.0];
        let b = [0.5, -4.0];
        let y = aggregate([&a[..], &b[..]], 2, 1e6, 0.0, &mut rng).unwrap();
        assert_eq!(y, vec![1.5, -2.0]);
        let empty = aggregate(std::iter::empty(), 3, 1e6, 0.0, &mut rng).unwrap();
        assert_eq!(empty, vec![0.0; 3]);
    }

    #[test]
    fn noise_variance_is_beta_sigma2() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let (beta, sigma2) = (100.0, 0.02);
        let n = 100_000;
        let samples: Vec<f64> = (0..n)
            .map(|_| aggregate([&[3.0][..]], 1, beta, sigma2, &mut rng).unwrap()[0] - 3.0)
            .collect();
        let mean = samples.iter().sum::<f64>() / n as f64;
        let var = samples.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        assert!((var / (beta * sigma2) - 1.0).abs() < 0.02, "{var}");
    }

    #[test]
    fn channel_rejects_wrong_device_count() {
        let f = FadingParams::new(1.0, 1.0, 2.0, 1.0).unwrap();
        let mut ch = AirCompChannel::new(vec![f; 2], 1.0, 0.0, 1.0, 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(ch.transmit(&[vec![1.0]], &mut rng).is_err());
    }

    #[test]
    fn forced_full_participation() {
        let f = FadingParams::new(1e-9, 1.0, 2.0, 1.0).unwrap();
        let mut ch = AirCompChannel::new(vec![f; 3], 1.0, 0.0, 1.0, 1.0)
            .unwrap()
            .with_full_participation();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let r = ch.transmit(&[vec![10.0], vec![20.0], vec![30.0]], &mut rng).unwrap();
        assert_eq!(r.participants, vec![0, 1, 2]);
        assert_eq!(r.aggregate, vec![60.0]);
    }
}

use rand::RngCore;

use super::fading::{sample_fading, FadingParams};
use crate::error::{Error, Result};
use crate::linalg;
use crate::optim::{AggregationChannel, ChannelRound};

/// Header bits per TDMA packet.
pub const TDMA_HEADER_BITS: f64 = 64.0;
/// Bits per quantized payload symbol.
pub const TDMA_BITS_PER_SYMBOL: f64 = 17.0;

/// One analog round: `L` channel uses at symbol rate `B`.
pub fn aircomp_round_duration(symbols: usize, bandwidth_hz: f64) -> f64 {
    symbols as f64 / bandwidth_hz
}

/// Time for every device to send its quantized update in its own slot at
/// the Shannon rate of its channel.
pub fn tdma_round_duration(
    h: &[f64],
    symbols: usize,
    p_max: f64,
    noise_power: f64,
    bandwidth_hz: f64,
) -> Result<f64> {
    let bits = TDMA_HEADER_BITS + TDMA_BITS_PER_SYMBOL * symbols as f64;
    let mut total = 0.0;
    for (i, &hi) in h.iter().enumerate() {
        let snr = p_max * hi * hi / noise_power;
        if !(snr > 0.0 && snr.is_finite()) {
            return Err(Error::InvalidChannel(format!("device {i} has SNR {snr}")));
        }
        total += bits / (1.0 + snr).log2();
    }
    Ok(total / bandwidth_hz)
}

/// Digital orthogonal uplink: every device is decoded without error, the
/// cost shows up only as round duration.
#[derive(Debug, Clone)]
pub struct ErrorFreeChannel {
    fading: Vec<FadingParams>,
    symbols: usize,
    p_max: f64,
    noise_power: f64,
    bandwidth_hz: f64,
}

impl ErrorFreeChannel {
    pub fn new(
        fading: Vec<FadingParams>,
        symbols: usize,
        p_max: f64,
        noise_power: f64,
        bandwidth_hz: f64,
    ) -> Result<Self> {
        if !(noise_power > 0.0 && bandwidth_hz > 0.0 && p_max > 0.0) {
            return Err(Error::invalid(
                "tdma",
                "noise power, bandwidth and P_max must be positive",
            ));
        }
        Ok(Self {
            fading,
            symbols,
            p_max,
            noise_power,
            bandwidth_hz,
        })
    }
}

impl AggregationChannel for ErrorFreeChannel {
    fn num_devices(&self) -> usize {
        self.fading.len()
    }

    fn transmit(&mut self, signals: &[Vec<f64>], rng: &mut dyn RngCore) -> Result<ChannelRound> {
        if signals.len() != self.fading.len() {
            return Err(Error::DimensionMismatch {
                context: "tdma signals",
                expected: self.fading.len(),
                actual: signals.len(),
            });
        }
        let h = sample_fading(&self.fading, rng);
        let duration_s = tdma_round_duration(
            &h,
            self.symbols,
            self.p_max,
            self.noise_power,
            self.bandwidth_hz,
        )?;
        let dim = signals.first().map_or(0, Vec::len);
        let mut aggregate = vec![0.0; dim];
        for s in signals {
            if s.len() != dim {
                return Err(Error::DimensionMismatch {
                    context: "tdma signal",
                    expected: dim,
                    actual: s.len(),
                });
            }
            linalg::axpy(1.0, s, &mut aggregate);
        }
        Ok(ChannelRound {
            aggregate,
            participants: (0..signals.len()).collect(),
            duration_s,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn aircomp_duration_examples() {
        assert_eq!(aircomp_round_duration(128, 1e6), 1.28e-4);
        assert_eq!(aircomp_round_duration(1, 1.0), 1.0);
        assert_eq!(aircomp_round_duration(20, 5.0), 2.0 * aircomp_round_duration(10, 5.0));
    }

    #[test]
    fn tdma_duration_by_hand() {
        // log2(1 + SNR) = 17
        let snr = 2f64.powi(17) - 1.0;
        let d = tdma_round_duration(&[snr.sqrt()], 128, 1.0, 1.0, 1e6).unwrap();
        assert!((d - (64.0 + 17.0 * 128.0) / 17.0 / 1e6).abs() < 1e-15);
        assert!((d * 1e6 - 131.764_705_882).abs() < 1e-6);
    }

    #[test]
    fn tdma_header_only() {
        let h = [1.0, 3f64.sqrt()];
        let d = tdma_round_duration(&h, 0, 1.0, 1.0, 2.0).unwrap();
        assert!((d - (64.0 / 1.0 + 64.0 / 2.0) / 2.0).abs() < 1e-12);
    }

    #[test]
    fn tdma_rejects_dead_channel() {
        assert!(matches!(
            tdma_round_duration(&[1.0, 0.0], 10, 1.0, 1.0, 1.0),
            Err(Error::InvalidChannel(_))
        ));
    }
}

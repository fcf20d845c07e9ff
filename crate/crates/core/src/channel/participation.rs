use rand::RngCore;

use super::fading::FadingParams;
use crate::error::{Error, Result};

/// Largest device count for which the exact count distribution is enumerated.
pub const MAX_ENUMERATION_DEVICES: usize = 20;

/// Monte Carlo estimate of `Pr{|h|² >= ‖s‖² / (β P_max)}`.
pub fn participation_probability<R: RngCore + ?Sized>(
    s_norm2: f64,
    beta: f64,
    p_max: f64,
    fading: &FadingParams,
    samples: usize,
    rng: &mut R,
) -> Result<f64> {
    if samples == 0 {
        return Err(Error::invalid("samples", "need at least one sample"));
    }
    let threshold = s_norm2 / (beta * p_max);
    if threshold <= 0.0 {
        return Ok(1.0);
    }
    if threshold.is_infinite() {
        return Ok(0.0);
    }
    let hits = (0..samples)
        .filter(|_| fading.sample_magnitude(rng).powi(2) >= threshold)
        .count();
    Ok(hits as f64 / samples as f64)
}

/// Mean participant count `Σ γ_i`.
pub fn expected_participants(gammas: &[f64]) -> f64 {
    gammas.iter().sum()
}

/// `Pr{|A| = A}` for `A = 0..=N` by enumerating every participation subset.
pub fn participation_distribution(gammas: &[f64]) -> Result<Vec<f64>> {
    let n = gammas.len();
    if n > MAX_ENUMERATION_DEVICES {
        return Err(Error::invalid(
            "gammas",
            format!("subset enumeration limited to {MAX_ENUMERATION_DEVICES} devices, got {n}"),
        ));
    }
    if let Some(g) = gammas.iter().find(|g| !(0.0..=1.0).contains(*g)) {
        return Err(Error::invalid("gammas", format!("probability {g} outside [0, 1]")));
    }
    let mut dist = vec![0.0; n + 1];
    for mask in 0u32..(1u32 << n) {
        let p: f64 = gammas
            .iter()
            .enumerate()
            .map(|(i, &g)| if mask >> i & 1 == 1 { g } else { 1.0 - g })
            .product();
        dist[mask.count_ones() as usize] += p;
    }
    Ok(dist)
}

/// Devices whose participation probability falls below `threshold`; these
/// can never reliably invert their channel and are dropped from the problem.
pub fn bottleneck_devices(gammas: &[f64], threshold: f64) -> Vec<usize> {
    gammas
        .iter()
        .enumerate()
        .filter(|(_, &g)| g < threshold)
        .map(|(i, _)| i)
        .collect()
}

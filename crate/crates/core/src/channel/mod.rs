//! Analog uplink model: Rician fading, channel inversion under a peak-power
//! budget, noisy superposition at the server, and round timing for both the
//! analog scheme and an error-free digital TDMA baseline.

pub mod aircomp;
pub mod fading;
pub mod participation;
pub mod timing;

pub use aircomp::{aggregate, transmit_signal, AirCompChannel};
pub use fading::{db_to_linear, dbm_to_watts, sample_fading, FadingParams};
pub use participation::{
    bottleneck_devices, expected_participants, participation_distribution,
    participation_probability,
};
pub use timing::{aircomp_round_duration, tdma_round_duration, ErrorFreeChannel};

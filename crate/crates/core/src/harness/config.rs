//! Experiment configuration: a TOML document with shared keys at the top
//! level and one section for the selected use case. Omitted keys take the
//! defaults of the simulation-parameter table for that use case.
//!
//! ```toml
//! use_case = "fdma"
//! beta = 1e4
//! runs = 100
//!
//! [fdma]
//! rate_threshold_bps = 2.85e6
//! ```

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::usecases::{BandwidthSharing, PriceRule, PriceSource};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UseCase {
    SmartGrid,
    Fdma,
}

impl UseCase {
    pub fn name(self) -> &'static str {
        match self {
            UseCase::SmartGrid => "smart_grid",
            UseCase::Fdma => "fdma",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChannelMode {
    Aircomp,
    ErrorFree,
}

impl ChannelMode {
    pub fn name(self) -> &'static str {
        match self {
            ChannelMode::Aircomp => "aircomp",
            ChannelMode::ErrorFree => "error_free",
        }
    }
}

impl std::str::FromStr for ChannelMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "aircomp" => Ok(ChannelMode::Aircomp),
            "error_free" => Ok(ChannelMode::ErrorFree),
            other => Err(Error::config(
                "channel",
                format!("expected `aircomp` or `error_free`, got `{other}`"),
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmartGridConfig {
    pub battery_range: [f64; 2],
    pub satisfaction_range: [f64; 2],
    /// Spare grid capacity `C` (MWh).
    pub capacity: f64,
    /// Price announced before the first PEV stage.
    pub initial_price: f64,
    pub price_rule: PriceRule,
    pub price_source: PriceSource,
    /// Relative price change below which the game is considered settled.
    pub price_tolerance: f64,
    pub max_stages: usize,
    /// Initial demands are each PEV's unconstrained peak demand scaled by
    /// `1 + U[-demand_init_jitter, demand_init_jitter]`.
    pub demand_init_jitter: f64,
    /// Initial epigraph variables sit above each PEV's unconstrained peak
    /// utility by an offset drawn from this range.
    pub epigraph_offset_range: [f64; 2],
}

impl Default for SmartGridConfig {
    fn default() -> Self {
        Self {
            battery_range: [35.0, 65.0],
            satisfaction_range: [1.0, 2.0],
            capacity: 99.0,
            initial_price: 40.0,
            price_rule: PriceRule::MeanPositive,
            price_source: PriceSource::Averaged,
            price_tolerance: 1e-3,
            max_stages: 50,
            demand_init_jitter: 0.2,
            epigraph_offset_range: [0.0, 0.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FdmaConfig {
    /// Number of frequency bands `K`.
    pub bands: usize,
    pub n0_dbm_per_hz: f64,
    /// Total power budget `P` (W).
    pub total_power: f64,
    pub rate_threshold_bps: f64,
    /// Rates inside the optimizer are expressed in units of this many bits/s.
    pub rate_scale: f64,
    pub sharing: BandwidthSharing,
    /// Initial allocation is the equal split scaled entrywise by
    /// `1 ± init_jitter`, then projected.
    pub init_jitter: f64,
}

impl Default for FdmaConfig {
    fn default() -> Self {
        Self {
            bands: 64,
            n0_dbm_per_hz: -174.0,
            total_power: 1.0,
            rate_threshold_bps: 2.85e6,
            rate_scale: 1e6,
            sharing: BandwidthSharing::PerBand,
            init_jitter: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum UseCaseConfig {
    SmartGrid(SmartGridConfig),
    Fdma(FdmaConfig),
}

/// Fully resolved experiment description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub channel: ChannelMode,
    /// Rounds per run (per price stage for the smart grid).
    pub rounds: usize,
    pub runs: usize,
    pub seed: u64,
    /// Worker threads; 0 lets the thread pool decide.
    pub workers: usize,
    pub output_dir: PathBuf,
    pub devices: usize,
    pub bandwidth_hz: f64,
    pub sigma2_dbm: f64,
    /// Noise density used for the TDMA link budget.
    pub noise_psd_dbm_per_hz: f64,
    pub p_max: f64,
    pub zeta: f64,
    pub theta: f64,
    pub beta: f64,
    pub distance_ratio_range: [f64; 2],
    pub path_loss_exponent: f64,
    pub rician_factor: f64,
    pub t0_db: f64,
    pub step_c1: f64,
    pub step_c2: f64,
    /// Channel uses per round.
    pub symbols: usize,
    pub exclusion_threshold: f64,
    pub participation_samples: usize,
    /// Forces every device through the analog channel regardless of power.
    pub full_participation: bool,
    pub use_case: UseCaseConfig,
}

impl ExperimentConfig {
    pub fn use_case_kind(&self) -> UseCase {
        match self.use_case {
            UseCaseConfig::SmartGrid(_) => UseCase::SmartGrid,
            UseCaseConfig::Fdma(_) => UseCase::Fdma,
        }
    }

    /// Defaults for a use case.
    pub fn defaults(use_case: UseCase) -> Self {
        let (devices, theta, beta, c1, c2, symbols, uc) = match use_case {
            UseCase::SmartGrid => (
                20,
                2.0,
                1e4,
                2.0,
                3.0,
                40,
                UseCaseConfig::SmartGrid(SmartGridConfig::default()),
            ),
            UseCase::Fdma => {
                let f = FdmaConfig::default();
                let symbols = 2 * f.bands;
                (10, 1.0, 1e6, 1.0, 1e5, symbols, UseCaseConfig::Fdma(f))
            }
        };
        Self {
            channel: ChannelMode::Aircomp,
            rounds: match use_case {
                UseCase::SmartGrid => 200,
                UseCase::Fdma => 100,
            },
            runs: 500,
            seed: 1,
            workers: 0,
            output_dir: PathBuf::from("out"),
            devices,
            bandwidth_hz: 1e6,
            sigma2_dbm: -90.0,
            noise_psd_dbm_per_hz: -174.0,
            p_max: 1.0,
            zeta: 2.0,
            theta,
            beta,
            distance_ratio_range: [10.0, 20.0],
            path_loss_exponent: 2.2,
            rician_factor: 10.0,
            t0_db: -25.0,
            step_c1: c1,
            step_c2: c2,
            symbols,
            exclusion_threshold: 1e-3,
            participation_samples: 10_000,
            full_participation: false,
            use_case: uc,
        }
    }

    pub fn smart_grid(&self) -> Option<&SmartGridConfig> {
        match &self.use_case {
            UseCaseConfig::SmartGrid(c) => Some(c),
            UseCaseConfig::Fdma(_) => None,
        }
    }

    pub fn fdma(&self) -> Option<&FdmaConfig> {
        match &self.use_case {
            UseCaseConfig::Fdma(c) => Some(c),
            UseCaseConfig::SmartGrid(_) => None,
        }
    }

    pub fn smart_grid_mut(&mut self) -> Option<&mut SmartGridConfig> {
        match &mut self.use_case {
            UseCaseConfig::SmartGrid(c) => Some(c),
            UseCaseConfig::Fdma(_) => None,
        }
    }

    pub fn fdma_mut(&mut self) -> Option<&mut FdmaConfig> {
        match &mut self.use_case {
            UseCaseConfig::Fdma(c) => Some(c),
            UseCaseConfig::SmartGrid(_) => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        fn positive(key: &str, v: f64) -> Result<()> {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::config(key, format!("must be positive, got {v}")))
            }
        }
        fn nonnegative(key: &str, v: f64) -> Result<()> {
            if v.is_finite() && v >= 0.0 {
                Ok(())
            } else {
                Err(Error::config(key, format!("must be >= 0, got {v}")))
            }
        }
        fn finite(key: &str, v: f64) -> Result<()> {
            if v.is_finite() {
                Ok(())
            } else {
                Err(Error::config(key, format!("must be finite, got {v}")))
            }
        }
        fn range(key: &str, r: [f64; 2], min: f64) -> Result<()> {
            if r[0].is_finite() && r[1].is_finite() && r[0] >= min && r[0] <= r[1] {
                Ok(())
            } else {
                Err(Error::config(
                    key,
                    format!("need {min} <= low <= high, got [{}, {}]", r[0], r[1]),
                ))
            }
        }
        fn count(key: &str, v: usize, min: usize, max: usize) -> Result<()> {
            if (min..=max).contains(&v) {
                Ok(())
            } else {
                Err(Error::config(key, format!("must be in [{min}, {max}], got {v}")))
            }
        }

        count("rounds", self.rounds, 1, 10_000_000)?;
        count("runs", self.runs, 1, 1_000_000)?;
        count("devices", self.devices, 1, 10_000)?;
        count("symbols", self.symbols, 1, usize::MAX)?;
        count("participation_samples", self.participation_samples, 1, usize::MAX)?;
        positive("bandwidth_hz", self.bandwidth_hz)?;
        finite("sigma2_dbm", self.sigma2_dbm)?;
        finite("noise_psd_dbm_per_hz", self.noise_psd_dbm_per_hz)?;
        positive("p_max", self.p_max)?;
        nonnegative("zeta", self.zeta)?;
        positive("theta", self.theta)?;
        positive("beta", self.beta)?;
        range("distance_ratio_range", self.distance_ratio_range, 1.0)?;
        nonnegative("path_loss_exponent", self.path_loss_exponent)?;
        nonnegative("rician_factor", self.rician_factor)?;
        finite("t0_db", self.t0_db)?;
        positive("step_c1", self.step_c1)?;
        positive("step_c2", self.step_c2)?;
        if !(0.0..=1.0).contains(&self.exclusion_threshold) {
            return Err(Error::config("exclusion_threshold", "must be in [0, 1]"));
        }
        match &self.use_case {
            UseCaseConfig::SmartGrid(c) => {
                range("smart_grid.battery_range", c.battery_range, f64::MIN_POSITIVE)?;
                range("smart_grid.satisfaction_range", c.satisfaction_range, f64::MIN_POSITIVE)?;
                positive("smart_grid.capacity", c.capacity)?;
                nonnegative("smart_grid.initial_price", c.initial_price)?;
                positive("smart_grid.price_tolerance", c.price_tolerance)?;
                count("smart_grid.max_stages", c.max_stages, 1, 100_000)?;
                nonnegative("smart_grid.demand_init_jitter", c.demand_init_jitter)?;
                range("smart_grid.epigraph_offset_range", c.epigraph_offset_range, f64::MIN)?;
            }
            UseCaseConfig::Fdma(c) => {
                count("fdma.bands", c.bands, 1, 100_000)?;
                finite("fdma.n0_dbm_per_hz", c.n0_dbm_per_hz)?;
                positive("fdma.total_power", c.total_power)?;
                nonnegative("fdma.rate_threshold_bps", c.rate_threshold_bps)?;
                positive("fdma.rate_scale", c.rate_scale)?;
                if !(0.0..1.0).contains(&c.init_jitter) {
                    return Err(Error::config("fdma.init_jitter", "must be in [0, 1)"));
                }
            }
        }
        Ok(())
    }

    /// Canonical text form; parsing it yields `self` again.
    pub fn to_toml(&self) -> Result<String> {
        let raw = RawConfig::from_resolved(self);
        toml::to_string(&raw).map_err(|e| Error::config("<serialize>", e.to_string()))
    }
}

pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| {
        let key = e
            .message()
            .split('`')
            .nth(1)
            .unwrap_or("<document>")
            .to_string();
        Error::config(key, e.message().trim().to_string())
    })?;
    let config = raw.resolve()?;
    config.validate()?;
    Ok(config)
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSmartGrid {
    battery_range: Option<[f64; 2]>,
    satisfaction_range: Option<[f64; 2]>,
    capacity: Option<f64>,
    initial_price: Option<f64>,
    price_rule: Option<PriceRule>,
    price_source: Option<PriceSource>,
    price_tolerance: Option<f64>,
    max_stages: Option<usize>,
    demand_init_jitter: Option<f64>,
    epigraph_offset_range: Option<[f64; 2]>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFdma {
    bands: Option<usize>,
    n0_dbm_per_hz: Option<f64>,
    total_power: Option<f64>,
    rate_threshold_bps: Option<f64>,
    rate_scale: Option<f64>,
    sharing: Option<BandwidthSharing>,
    init_jitter: Option<f64>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    use_case: Option<UseCase>,
    channel: Option<ChannelMode>,
    rounds: Option<usize>,
    runs: Option<usize>,
    seed: Option<u64>,
    workers: Option<usize>,
    output_dir: Option<PathBuf>,
    devices: Option<usize>,
    bandwidth_hz: Option<f64>,
    sigma2_dbm: Option<f64>,
    noise_psd_dbm_per_hz: Option<f64>,
    p_max: Option<f64>,
    zeta: Option<f64>,
    theta: Option<f64>,
    beta: Option<f64>,
    distance_ratio_range: Option<[f64; 2]>,
    path_loss_exponent: Option<f64>,
    rician_factor: Option<f64>,
    t0_db: Option<f64>,
    step_c1: Option<f64>,
    step_c2: Option<f64>,
    symbols: Option<usize>,
    exclusion_threshold: Option<f64>,
    participation_samples: Option<usize>,
    full_participation: Option<bool>,
    smart_grid: Option<RawSmartGrid>,
    fdma: Option<RawFdma>,
}

macro_rules! take {
    ($dst:expr, $src:expr) => {
        if let Some(v) = $src {
            $dst = v;
        }
    };
}

impl RawConfig {
    fn resolve(self) -> Result<ExperimentConfig> {
        let use_case = self
            .use_case
            .ok_or_else(|| Error::config("use_case", "missing; expected `smart_grid` or `fdma`"))?;
        let mut c = ExperimentConfig::defaults(use_case);
        match use_case {
            UseCase::SmartGrid => {
                if self.fdma.is_some() {
                    return Err(Error::config("fdma", "section given but use_case is `smart_grid`"));
                }
                let raw = self.smart_grid.ok_or_else(|| {
                    Error::config("smart_grid", "missing section for use_case `smart_grid`")
                })?;
                let mut sg = SmartGridConfig::default();
                take!(sg.battery_range, raw.battery_range);
                take!(sg.satisfaction_range, raw.satisfaction_range);
                take!(sg.capacity, raw.capacity);
                take!(sg.initial_price, raw.initial_price);
                take!(sg.price_rule, raw.price_rule);
                take!(sg.price_source, raw.price_source);
                take!(sg.price_tolerance, raw.price_tolerance);
                take!(sg.max_stages, raw.max_stages);
                take!(sg.demand_init_jitter, raw.demand_init_jitter);
                take!(sg.epigraph_offset_range, raw.epigraph_offset_range);
                c.use_case = UseCaseConfig::SmartGrid(sg);
            }
            UseCase::Fdma => {
                if self.smart_grid.is_some() {
                    return Err(Error::config("smart_grid", "section given but use_case is `fdma`"));
                }
                let raw = self
                    .fdma
                    .ok_or_else(|| Error::config("fdma", "missing section for use_case `fdma`"))?;
                let mut f = FdmaConfig::default();
                take!(f.bands, raw.bands);
                take!(f.n0_dbm_per_hz, raw.n0_dbm_per_hz);
                take!(f.total_power, raw.total_power);
                take!(f.rate_threshold_bps, raw.rate_threshold_bps);
                take!(f.rate_scale, raw.rate_scale);
                take!(f.sharing, raw.sharing);
                take!(f.init_jitter, raw.init_jitter);
                c.symbols = 2 * f.bands;
                c.use_case = UseCaseConfig::Fdma(f);
            }
        }
        if let UseCaseConfig::SmartGrid(_) = c.use_case {
            c.symbols = 2 * self.devices.unwrap_or(c.devices);
        }
        take!(c.channel, self.channel);
        take!(c.rounds, self.rounds);
        take!(c.runs, self.runs);
        take!(c.seed, self.seed);
        take!(c.workers, self.workers);
        take!(c.output_dir, self.output_dir);
        take!(c.devices, self.devices);
        take!(c.bandwidth_hz, self.bandwidth_hz);
        take!(c.sigma2_dbm, self.sigma2_dbm);
        take!(c.noise_psd_dbm_per_hz, self.noise_psd_dbm_per_hz);
        take!(c.p_max, self.p_max);
        take!(c.zeta, self.zeta);
        take!(c.theta, self.theta);
        take!(c.beta, self.beta);
        take!(c.distance_ratio_range, self.distance_ratio_range);
        take!(c.path_loss_exponent, self.path_loss_exponent);
        take!(c.rician_factor, self.rician_factor);
        take!(c.t0_db, self.t0_db);
        take!(c.step_c1, self.step_c1);
        take!(c.step_c2, self.step_c2);
        take!(c.symbols, self.symbols);
        take!(c.exclusion_threshold, self.exclusion_threshold);
        take!(c.participation_samples, self.participation_samples);
        take!(c.full_participation, self.full_participation);
        Ok(c)
    }

    fn from_resolved(c: &ExperimentConfig) -> Self {
        let (smart_grid, fdma) = match &c.use_case {
            UseCaseConfig::SmartGrid(sg) => (
                Some(RawSmartGrid {
                    battery_range: Some(sg.battery_range),
                    satisfaction_range: Some(sg.satisfaction_range),
                    capacity: Some(sg.capacity),
                    initial_price: Some(sg.initial_price),
                    price_rule: Some(sg.price_rule),
                    price_source: Some(sg.price_source),
                    price_tolerance: Some(sg.price_tolerance),
                    max_stages: Some(sg.max_stages),
                    demand_init_jitter: Some(sg.demand_init_jitter),
                    epigraph_offset_range: Some(sg.epigraph_offset_range),
                }),
                None,
            ),
            UseCaseConfig::Fdma(f) => (
                None,
                Some(RawFdma {
                    bands: Some(f.bands),
                    n0_dbm_per_hz: Some(f.n0_dbm_per_hz),
                    total_power: Some(f.total_power),
                    rate_threshold_bps: Some(f.rate_threshold_bps),
                    rate_scale: Some(f.rate_scale),
                    sharing: Some(f.sharing),
                    init_jitter: Some(f.init_jitter),
                }),
            ),
        };
        RawConfig {
            use_case: Some(c.use_case_kind()),
            channel: Some(c.channel),
            rounds: Some(c.rounds),
            runs: Some(c.runs),
            seed: Some(c.seed),
            workers: Some(c.workers),
            output_dir: Some(c.output_dir.clone()),
            devices: Some(c.devices),
            bandwidth_hz: Some(c.bandwidth_hz),
            sigma2_dbm: Some(c.sigma2_dbm),
            noise_psd_dbm_per_hz: Some(c.noise_psd_dbm_per_hz),
            p_max: Some(c.p_max),
            zeta: Some(c.zeta),
            theta: Some(c.theta),
            beta: Some(c.beta),
            distance_ratio_range: Some(c.distance_ratio_range),
            path_loss_exponent: Some(c.path_loss_exponent),
            rician_factor: Some(c.rician_factor),
            t0_db: Some(c.t0_db),
            step_c1: Some(c.step_c1),
            step_c2: Some(c.step_c2),
            symbols: Some(c.symbols),
            exclusion_threshold: Some(c.exclusion_threshold),
            participation_samples: Some(c.participation_samples),
            full_participation: Some(c.full_participation),
            smart_grid,
            fdma,
        }
    }
}

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::Parser;

use dpd_aircomp::harness::{
    output, parse_config, run_monte_carlo, scenario, time_to_threshold, ChannelMode,
    ExperimentConfig, MonteCarloResult,
};
use dpd_aircomp::Error;

/// Run a Monte Carlo experiment (or a named sweep) and write CSV traces.
#[derive(Debug, Parser)]
#[command(name = "simulate", version)]
struct Args {
    /// TOML experiment config.
    #[arg(long)]
    config: PathBuf,
    /// Named sweep to run over the config.
    #[arg(long)]
    scenario: Option<String>,
    /// Number of Monte Carlo runs.
    #[arg(long)]
    runs: Option<usize>,
    /// Base seed; run i uses seed + i.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Uplink model.
    #[arg(long, value_parser = ["aircomp", "error_free"])]
    channel: Option<String>,
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config { .. } | Error::UnknownScenario { .. } | Error::InvalidParameter { .. } => 2,
        Error::Io { .. } | Error::Csv { .. } => 3,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let args = Args::parse();
    match run(&args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn load(args: &Args) -> Result<ExperimentConfig, Error> {
    let text = std::fs::read_to_string(&args.config).map_err(|source| Error::Io {
        path: args.config.clone(),
        source,
    })?;
    let mut config = parse_config(&text)?;
    if let Some(runs) = args.runs {
        config.runs = runs;
    }
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(out) = &args.out {
        config.output_dir = out.clone();
    }
    if let Some(channel) = &args.channel {
        config.channel = channel.parse::<ChannelMode>()?;
    }
    config.validate()?;
    Ok(config)
}

fn run(args: &Args) -> Result<(), Error> {
    let config = load(args)?;
    let out = config.output_dir.clone();
    match &args.scenario {
        None => run_one(&config, &out, None),
        Some(name) => {
            let members = scenario(name, &config)?;
            for m in members {
                run_one(&m.config, &out.join(name).join(&m.label), Some(&m.label))?;
            }
            Ok(())
        }
    }
}

fn run_one(config: &ExperimentConfig, dir: &Path, label: Option<&str>) -> Result<(), Error> {
    let result = run_monte_carlo(config)?;
    output::write_result(dir, &result)?;
    println!("{}", summary(&result, label, dir));
    Ok(())
}

fn summary(result: &MonteCarloResult, label: Option<&str>, dir: &Path) -> String {
    let mut parts = vec![format!(
        "{}{} runs, {} diverged",
        label.map(|l| format!("[{l}] ")).unwrap_or_default(),
        result.runs.len(),
        result.diverged_runs().len()
    )];
    if let Some(last) = result.aggregate.last() {
        parts.push(format!(
            "round {}: violation {:.4e}, objective {:.6e}",
            last.round, last.violation_mean, last.objective_mean
        ));
        if let Some(fdma) = result.config.fdma() {
            let threshold = 0.01 * fdma.rate_threshold_bps / fdma.rate_scale;
            match time_to_threshold(&result.aggregate, threshold) {
                Some(t) => parts.push(format!("1% violation reached at {t:.4e} s")),
                None => parts.push("1% violation not reached".into()),
            }
        }
    }
    if let Some(rate) = result.final_sum_rate_mean() {
        parts.push(format!("sum rate {rate:.6e} bit/s"));
    }
    if let Some(price) = result.final_price_mean() {
        parts.push(format!("price {price:.4}"));
    }
    parts.push(format!("-> {}", dir.display()));
    parts.join("; ")
}

//! CSV and metadata writers for experiment results.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::runner::{AggregateRow, MonteCarloResult, TraceRow};
use crate::error::{Error, Result};

pub const ROUNDS_FILE: &str = "rounds.csv";
pub const AGGREGATE_FILE: &str = "aggregate.csv";
pub const METADATA_FILE: &str = "metadata.json";
pub const CONFIG_FILE: &str = "config.toml";

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn csv_err(path: &Path) -> impl FnOnce(csv::Error) -> Error + '_ {
    move |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    }
}

/// Serializes rows to CSV bytes with a header line, even when empty.
fn to_csv<T: Serialize>(rows: &[T], header: &[&str], path: &Path) -> Result<Vec<u8>> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(Vec::new());
    w.write_record(header).map_err(csv_err(path))?;
    for row in rows {
        w.serialize(row).map_err(csv_err(path))?;
    }
    w.into_inner().map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e.into_error(),
    })
}

pub const ROUNDS_HEADER: [&str; 8] = [
    "run_id",
    "round",
    "sim_time_s",
    "participants",
    "violation",
    "objective",
    "price",
    "sum_rate",
];

pub const AGGREGATE_HEADER: [&str; 7] = [
    "round",
    "sim_time_s_mean",
    "violation_mean",
    "violation_stderr",
    "objective_mean",
    "objective_stderr",
    "participants_mean",
];

pub fn write_rounds_csv<'a>(
    path: &Path,
    rows: impl IntoIterator<Item = &'a TraceRow>,
) -> Result<()> {
    let rows: Vec<&TraceRow> = rows.into_iter().collect();
    let bytes = to_csv(&rows, &ROUNDS_HEADER, path)?;
    fs::write(path, bytes).map_err(io_err(path))
}

pub fn write_aggregate_csv(path: &Path, rows: &[AggregateRow]) -> Result<()> {
    let bytes = to_csv(rows, &AGGREGATE_HEADER, path)?;
    fs::write(path, bytes).map_err(io_err(path))
}

pub fn read_rounds_csv(path: &Path) -> Result<Vec<TraceRow>> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err(path))?;
    r.deserialize()
        .collect::<std::result::Result<Vec<TraceRow>, _>>()
        .map_err(csv_err(path))
}

pub fn read_aggregate_csv(path: &Path) -> Result<Vec<AggregateRow>> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err(path))?;
    r.deserialize()
        .collect::<std::result::Result<Vec<AggregateRow>, _>>()
        .map_err(csv_err(path))
}

#[derive(Debug, Serialize)]
struct RunMetadata<'a> {
    run_id: usize,
    seed: u64,
    rounds_recorded: usize,
    diverged_at_round: Option<usize>,
    divergence_reason: Option<&'a str>,
    excluded_devices: &'a [usize],
    #[serde(skip_serializing_if = "Option::is_none")]
    stackelberg_converged: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    prices: Option<&'a [f64]>,
}

#[derive(Debug, Serialize)]
struct Metadata<'a> {
    use_case: &'static str,
    channel: &'static str,
    runs: usize,
    base_seed: u64,
    divergence_policy: &'static str,
    diverged_count: usize,
    diverged_runs: Vec<usize>,
    final_sum_rate_mean: Option<f64>,
    final_price_mean: Option<f64>,
    runs_detail: Vec<RunMetadata<'a>>,
}

pub fn metadata_json(result: &MonteCarloResult) -> Result<String> {
    let diverged_runs = result.diverged_runs();
    let meta = Metadata {
        use_case: result.config.use_case_kind().name(),
        channel: result.config.channel.name(),
        runs: result.runs.len(),
        base_seed: result.config.seed,
        divergence_policy: "diverged runs stay in rounds.csv and are excluded from aggregate.csv",
        diverged_count: diverged_runs.len(),
        diverged_runs,
        final_sum_rate_mean: result.final_sum_rate_mean(),
        final_price_mean: result.final_price_mean(),
        runs_detail: result
            .runs
            .iter()
            .map(|r| RunMetadata {
                run_id: r.run_id,
                seed: r.seed,
                rounds_recorded: r.rows.len(),
                diverged_at_round: r.diverged.as_ref().map(|d| d.round),
                divergence_reason: r.diverged.as_ref().map(|d| d.reason.as_str()),
                excluded_devices: &r.excluded_devices,
                stackelberg_converged: r.stackelberg.as_ref().map(|s| s.converged),
                prices: r.stackelberg.as_ref().map(|s| s.prices.as_slice()),
            })
            .collect(),
    };
    serde_json::to_string_pretty(&meta).map_err(|e| Error::invalid("metadata", e.to_string()))
}

/// Writes rounds, aggregate, metadata and the normalized config into `dir`.
pub fn write_result(dir: &Path, result: &MonteCarloResult) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let rounds = dir.join(ROUNDS_FILE);
    write_rounds_csv(&rounds, result.rows())?;
    let aggregate = dir.join(AGGREGATE_FILE);
    write_aggregate_csv(&aggregate, &result.aggregate)?;
    let metadata = dir.join(METADATA_FILE);
    let mut f = fs::File::create(&metadata).map_err(io_err(&metadata))?;
    writeln!(f, "{}", metadata_json(result)?).map_err(io_err(&metadata))?;
    let config = dir.join(CONFIG_FILE);
    fs::write(&config, result.config.to_toml()?).map_err(io_err(&config))?;
    Ok(vec![rounds, aggregate, metadata, config])
}

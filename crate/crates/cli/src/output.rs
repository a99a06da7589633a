//! CSV and JSON writers shared by the experiments.
//!
//! Every CSV has a header row and its key (lag, iteration, variable) in the
//! first column. Floats are written with 17 significant digits so a rerun
//! with the same config reproduces files byte for byte.

use std::fs;
use std::path::Path;

use serde::Serialize;
use weighted_gibbs::ChainTrace;

use crate::error::{CliError, CliResult};

pub fn float(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn create_dir(path: &Path) -> CliResult<()> {
    fs::create_dir_all(path).map_err(|e| CliError::io(path, e))
}

pub fn write_text(path: &Path, text: &str) -> CliResult<()> {
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

pub fn write_csv<I>(path: &Path, header: &[String], rows: I) -> CliResult<()>
where
    I: IntoIterator<Item = Vec<String>>,
{
    let wrap = |e: csv::Error| match e.into_kind() {
        csv::ErrorKind::Io(source) => CliError::io(path, source),
        other => CliError::Numeric(format!("{}: {other:?}", path.display())),
    };
    let mut w = csv::Writer::from_path(path).map_err(wrap)?;
    w.write_record(header).map_err(wrap)?;
    for row in rows {
        w.write_record(&row).map_err(wrap)?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

/// Header from string literals.
pub fn header(names: &[&str]) -> Vec<String> {
    names.iter().map(|s| s.to_string()).collect()
}

/// `prefix_0, prefix_1, ...` after a leading key column.
pub fn indexed_header(key: &str, prefix: &str, n: usize) -> Vec<String> {
    std::iter::once(key.to_string())
        .chain((0..n).map(|i| format!("{prefix}_{i}")))
        .collect()
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value).expect("summary serialises");
    text.push('\n');
    write_text(path, &text)
}

/// Per-variable selection counts and frequencies.
pub fn write_selections(path: &Path, trace: &ChainTrace, dimension: usize) -> CliResult<()> {
    let mut counts = vec![0u64; dimension];
    for &i in &trace.selected_indices {
        counts[i as usize] += 1;
    }
    let total = trace.selected_indices.len().max(1) as f64;
    write_csv(
        path,
        &header(&["variable", "count", "frequency"]),
        counts
            .iter()
            .enumerate()
            .map(|(i, &c)| vec![i.to_string(), c.to_string(), float(c as f64 / total)]),
    )
}

/// Weights in force at the start of every `every`-th iteration of
/// `steps_per_iteration` steps. Before the first refresh the scheduler is
/// uniform.
pub fn weight_rows(
    trace: &ChainTrace,
    dimension: usize,
    steps_per_iteration: u64,
    iterations: u64,
    every: u64,
) -> Vec<(u64, Vec<f64>)> {
    let uniform = vec![1.0 / dimension as f64; dimension];
    let snaps = &trace.weight_snapshots;
    let mut next = 0;
    let mut current = &uniform;
    let mut rows = Vec::new();
    let mut it = 0;
    while it <= iterations {
        let step = it * steps_per_iteration;
        while next < snaps.len() && snaps[next].0 <= step {
            current = &snaps[next].1;
            next += 1;
        }
        rows.push((it, current.clone()));
        it += every;
    }
    rows
}

pub fn write_weights(path: &Path, rows: &[(u64, Vec<f64>)], dimension: usize) -> CliResult<()> {
    write_csv(
        path,
        &indexed_header("iteration", "q", dimension),
        rows.iter().map(|(it, q)| {
            std::iter::once(it.to_string())
                .chain(q.iter().map(|&v| float(v)))
                .collect()
        }),
    )
}

/// The weights at the end of the run.
pub fn final_weights(trace: &ChainTrace, dimension: usize) -> Vec<f64> {
    trace
        .weight_snapshots
        .last()
        .map(|(_, q)| q.clone())
        .unwrap_or_else(|| vec![1.0 / dimension as f64; dimension])
}

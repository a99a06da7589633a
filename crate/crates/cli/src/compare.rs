//! Side-by-side tables of one metric across scheduler runs.

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use crate::config::{ExperimentConfig, ExperimentKind, SchedulerKind};
use crate::error::{CliError, CliResult};

/// One metric file per experiment kind; its first column is the join key.
pub fn metric_file(kind: ExperimentKind) -> Option<&'static str> {
    match kind {
        ExperimentKind::Gaussian => Some("autocorrelation.csv"),
        ExperimentKind::Ising => Some("error.csv"),
        ExperimentKind::Lda => Some("perplexity.csv"),
        ExperimentKind::Validate => None,
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Comparison {
    pub kind: ExperimentKind,
    /// Key column name followed by one column per run.
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Comparison {
    pub fn to_csv(&self) -> CliResult<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        let bytes = w
            .into_inner()
            .map_err(|e| CliError::Numeric(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}

/// A run directory holds a `config.toml`; anything else is
/// treated as an experiment directory and expanded into its runs.
fn expand(dirs: &[PathBuf]) -> CliResult<Vec<PathBuf>> {
    let mut runs = Vec::new();
    for dir in dirs {
        if dir.join("config.toml").is_file() {
            runs.push(dir.clone());
            continue;
        }
        let entries = std::fs::read_dir(dir).map_err(|e| CliError::io(dir, e))?;
        let mut found: Vec<PathBuf> = entries
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.join("config.toml").is_file())
            .collect();
        if found.is_empty() {
            return Err(CliError::Config(format!(
                "{}: no scheduler runs found",
                dir.display()
            )));
        }
        found.sort_by_key(|p| (scheduler_rank(p), p.clone()));
        runs.extend(found);
    }
    Ok(runs)
}

/// Runs named after a scheduler come first, in systematic, random, weighted
/// order.
fn scheduler_rank(dir: &Path) -> usize {
    let name = run_label(dir);
    SchedulerKind::ALL
        .iter()
        .position(|k| k.name() == name)
        .unwrap_or(SchedulerKind::ALL.len())
}

fn read_metric(path: &Path) -> CliResult<(Vec<String>, Vec<(String, String)>)> {
    let mut r = csv::Reader::from_path(path).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(source) => CliError::io(path, source),
        other => CliError::Numeric(format!("{}: {other:?}", path.display())),
    })?;
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if header.len() < 2 {
        return Err(CliError::Numeric(format!(
            "{}: expected two columns",
            path.display()
        )));
    }
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        rows.push((rec[0].to_string(), rec[1].to_string()));
    }
    Ok((header, rows))
}

fn run_label(dir: &Path) -> String {
    dir.file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| dir.display().to_string())
}

/// Join the kind's metric across runs on its key column, keeping keys present
/// in every run, in the order of the first run. Runs must come from the same
/// experiment: only their output location and scheduler list may differ.
pub fn compare(dirs: &[PathBuf]) -> CliResult<Comparison> {
    let runs = expand(dirs)?;
    if runs.len() < 2 {
        return Err(CliError::Config(
            "compare needs at least two scheduler runs".into(),
        ));
    }
    let configs: Vec<ExperimentConfig> = runs
        .iter()
        .map(|d| ExperimentConfig::load(&d.join("config.toml")))
        .collect::<CliResult<_>>()?;
    let first = &configs[0];
    for (dir, c) in runs.iter().zip(&configs).skip(1) {
        if c.kind != first.kind {
            return Err(CliError::Config(format!(
                "{} is a {} run, {} is a {} run",
                runs[0].display(),
                first.kind.name(),
                dir.display(),
                c.kind.name()
            )));
        }
        if !c.same_experiment(first) {
            return Err(CliError::Config(format!(
                "{} and {} come from different experiment configs",
                runs[0].display(),
                dir.display()
            )));
        }
    }
    let file = metric_file(first.kind).ok_or_else(|| {
        CliError::Config(format!(
            "{} runs have no metric to compare",
            first.kind.name()
        ))
    })?;

    let mut labels: Vec<String> = runs.iter().map(|d| run_label(d)).collect();
    let mut sorted = labels.clone();
    sorted.sort();
    sorted.dedup();
    if sorted.len() != labels.len() {
        labels = runs.iter().map(|d| d.display().to_string()).collect();
    }

    let mut key_name = String::new();
    let mut order: Vec<String> = Vec::new();
    let mut columns: Vec<HashMap<String, String>> = Vec::new();
    for (i, dir) in runs.iter().enumerate() {
        let (header, rows) = read_metric(&dir.join(file))?;
        if i == 0 {
            key_name = header[0].clone();
            order = rows.iter().map(|r| r.0.clone()).collect();
        }
        columns.push(rows.into_iter().collect());
    }
    let rows = order
        .into_iter()
        .filter(|k| columns.iter().all(|c| c.contains_key(k)))
        .map(|k| {
            let mut row = vec![k.clone()];
            row.extend(columns.iter().map(|c| c[&k].clone()));
            row
        })
        .collect();
    let mut header = vec![key_name];
    header.extend(labels);
    Ok(Comparison {
        kind: first.kind,
        header,
        rows,
    })
}

//! Result tables and their CSV encoding.
//!
//! Floats are written in Rust's shortest round-trip form (scientific notation
//! outside `[1e-4, 1e15)`), so parsing a cell gives back the exact value.
//! Rows are sorted before emission; reruns with the same seed produce the
//! same bytes.

use std::cmp::Ordering;
use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};

use ris_jrc::localization::TrialRecord;

#[derive(Debug, thiserror::Error)]
pub enum OutputError {
    #[error("cannot write {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot write {path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
}

/// Shortest round-trip decimal text of `x`.
pub fn fmt_f64(x: f64) -> String {
    if x == 0.0 || !x.is_finite() || (1e-4..1e15).contains(&x.abs()) {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

/// One metric at one sweep point.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub experiment: String,
    pub point: usize,
    pub p_dbm: f64,
    pub metric: String,
    pub value: f64,
    pub ci_half_width: f64,
    pub trials: u64,
    /// "ok", "infeasible" or another short qualifier.
    pub status: String,
}

/// Append-only collection of result rows tagged with the run's seed and
/// config hash.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultTable {
    pub seed: u64,
    pub config_hash: String,
    rows: Vec<ResultRow>,
}

impl ResultTable {
    pub fn new(seed: u64, config_hash: impl Into<String>) -> Self {
        Self {
            seed,
            config_hash: config_hash.into(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: ResultRow) {
        self.rows.push(row);
    }

    pub fn extend(&mut self, rows: impl IntoIterator<Item = ResultRow>) {
        self.rows.extend(rows);
    }

    pub fn rows(&self) -> &[ResultRow] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// First row with this metric at this point.
    pub fn get(&self, point: usize, metric: &str) -> Option<&ResultRow> {
        self.rows.iter().find(|r| r.point == point && r.metric == metric)
    }

    /// Rows in emission order: experiment, point, metric.
    pub fn sorted_rows(&self) -> Vec<&ResultRow> {
        let mut rows: Vec<&ResultRow> = self.rows.iter().collect();
        rows.sort_by(|a, b| {
            a.experiment
                .cmp(&b.experiment)
                .then(a.point.cmp(&b.point))
                .then(a.metric.cmp(&b.metric))
                .then(a.status.cmp(&b.status))
                .then(a.value.partial_cmp(&b.value).unwrap_or(Ordering::Equal))
        });
        rows
    }
}

pub const RESULT_HEADER: [&str; 10] = [
    "experiment",
    "point",
    "P_dBm",
    "metric",
    "value",
    "ci_half_width",
    "trials",
    "status",
    "seed",
    "config_hash",
];

fn csv_err(path: &Path) -> impl FnOnce(csv::Error) -> OutputError + '_ {
    move |source| OutputError::Csv {
        path: path.to_path_buf(),
        source,
    }
}

/// Writes `table` as CSV to any writer.
pub fn write_results<W: Write>(table: &ResultTable, out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(RESULT_HEADER)?;
    let seed = table.seed.to_string();
    for r in table.sorted_rows() {
        w.write_record([
            r.experiment.as_str(),
            &r.point.to_string(),
            &fmt_f64(r.p_dbm),
            &r.metric,
            &fmt_f64(r.value),
            &fmt_f64(r.ci_half_width),
            &r.trials.to_string(),
            &r.status,
            &seed,
            &table.config_hash,
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn emit_csv(table: &ResultTable, path: &Path) -> Result<(), OutputError> {
    let file = File::create(path).map_err(|source| OutputError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    write_results(table, file).map_err(csv_err(path))
}

/// Per-stage trial rows: one line per (point, trial, stage).
#[derive(Debug, Clone, PartialEq)]
pub struct TrialRow {
    pub point: usize,
    pub p_dbm: f64,
    pub trial: u64,
    pub record: TrialRecord,
}

pub const TRIAL_HEADER: [&str; 13] = [
    "point",
    "trial",
    "seed",
    "P_dBm",
    "stage",
    "beam_indices",
    "statistics",
    "chosen",
    "T_s",
    "success",
    "true_cell",
    "estimate",
    "config_hash",
];

fn join<T>(items: &[T], f: impl Fn(&T) -> String) -> String {
    items.iter().map(f).collect::<Vec<_>>().join(";")
}

pub fn write_trials<W: Write>(rows: &mut [TrialRow], seed: u64, config_hash: &str, out: W) -> csv::Result<()> {
    rows.sort_by(|a, b| a.point.cmp(&b.point).then(a.trial.cmp(&b.trial)));
    let mut w = csv::Writer::from_writer(out);
    w.write_record(TRIAL_HEADER)?;
    let seed = seed.to_string();
    for row in rows.iter() {
        let rec = &row.record;
        let cell = |c: (usize, usize)| format!("{};{}", c.0, c.1);
        for st in &rec.stages {
            w.write_record([
                row.point.to_string(),
                row.trial.to_string(),
                seed.clone(),
                fmt_f64(row.p_dbm),
                st.stage.to_string(),
                join(&st.candidates, |k| k.to_string()),
                join(&st.statistics, |&x| fmt_f64(x)),
                st.chosen.to_string(),
                st.snapshots.to_string(),
                rec.success.to_string(),
                cell(rec.true_cell),
                cell(rec.estimate),
                config_hash.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn emit_trials(rows: &mut [TrialRow], seed: u64, config_hash: &str, path: &Path) -> Result<(), OutputError> {
    let file = File::create(path).map_err(|source| OutputError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    write_trials(rows, seed, config_hash, file).map_err(csv_err(path))
}

/// Mean spectral efficiency of one scenario at one power point.
#[derive(Debug, Clone, PartialEq)]
pub struct SeRow {
    pub point: usize,
    pub p_dbm: f64,
    pub scenario: String,
    pub mean_se: f64,
    pub ci_half_width: f64,
    pub trials: u64,
}

pub const SE_HEADER: [&str; 8] = ["point", "P_dBm", "scenario", "mean_se", "ci_half_width", "trials", "seed", "config_hash"];

pub fn write_se<W: Write>(rows: &mut [SeRow], seed: u64, config_hash: &str, out: W) -> csv::Result<()> {
    rows.sort_by(|a, b| a.point.cmp(&b.point).then(a.scenario.cmp(&b.scenario)));
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SE_HEADER)?;
    let seed = seed.to_string();
    for r in rows.iter() {
        w.write_record([
            r.point.to_string(),
            fmt_f64(r.p_dbm),
            r.scenario.clone(),
            fmt_f64(r.mean_se),
            fmt_f64(r.ci_half_width),
            r.trials.to_string(),
            seed.clone(),
            config_hash.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn emit_se(rows: &mut [SeRow], seed: u64, config_hash: &str, path: &Path) -> Result<(), OutputError> {
    let file = File::create(path).map_err(|source| OutputError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    write_se(rows, seed, config_hash, file).map_err(csv_err(path))
}

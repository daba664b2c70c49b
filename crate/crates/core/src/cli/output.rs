//! File formats written and read by the command line tool.
//!
//! Every CSV starts with `#` comment lines carrying the tool version, master
//! seed and config hash. Undefined ratios are empty fields. Floats use the
//! shortest representation that round-trips.
//!
//! | file              | columns |
//! |-------------------|---------|
//! | `results.csv`     | n_all, seed, final_cost, tp, fp, tn, fn, tpr, tnr, p, shots, threshold |
//! | `traces.csv`      | n_all, seed, round, param_index, theta, est_min, exact_cost, cum_shots |
//! | `trace.csv`       | round, param_index, theta, est_min, exact_cost, cum_shots |
//! | `predictions.csv` | n_all, seed, x1, x2, label, probability, predicted |
//! | `timings.csv`     | n_all, seed, wall_time_s |

use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::CliError;
use crate::classifier::{LabelRule, SweepResult};
use crate::shots::OracleKind;
use crate::smo::TraceEntry;

/// Provenance stamped on every output.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Provenance {
    pub tool: String,
    pub version: String,
    pub master_seed: u64,
    pub config_sha256: String,
}

impl Provenance {
    pub fn new(master_seed: u64, config_sha256: &str) -> Self {
        Provenance {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            master_seed,
            config_sha256: config_sha256.to_string(),
        }
    }

    pub fn line(&self) -> String {
        format!(
            "{} {}; master_seed={}; config_sha256={}",
            self.tool, self.version, self.master_seed, self.config_sha256
        )
    }
}

/// One sweep cell in `results.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub n_all: String,
    pub seed: u64,
    pub final_cost: f64,
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub tpr: Option<f64>,
    pub tnr: Option<f64>,
    pub p: f64,
    pub shots: u64,
    pub threshold: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub n_all: String,
    pub seed: u64,
    pub round: usize,
    pub param_index: usize,
    pub theta: f64,
    pub est_min: f64,
    pub exact_cost: f64,
    pub cum_shots: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRow {
    pub n_all: String,
    pub seed: u64,
    pub x1: f64,
    pub x2: f64,
    pub label: u8,
    pub probability: f64,
    pub predicted: u8,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingRow {
    pub n_all: String,
    pub seed: u64,
    pub wall_time_s: f64,
}

/// Per-`N_all` statistics of `P`. `std_p` is the sample standard deviation
/// (zero for a single seed).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryEntry {
    pub n_all: String,
    pub seeds: usize,
    pub mean_p: f64,
    pub std_p: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    #[serde(flatten)]
    pub provenance: Provenance,
    pub rule: LabelRule,
    pub entries: Vec<SummaryEntry>,
}

/// Parses `"exact"` / `"inf"` or a positive shot count.
pub fn parse_n_all(s: &str) -> Result<OracleKind, CliError> {
    let t = s.trim();
    if t.eq_ignore_ascii_case("exact") || t.eq_ignore_ascii_case("inf") {
        return Ok(OracleKind::Exact);
    }
    match t.parse::<u32>() {
        Ok(shots) if shots > 0 => Ok(OracleKind::Binomial { shots }),
        _ => Err(CliError::Input(format!("bad n_all value {s:?}"))),
    }
}

pub fn result_rows(sweep: &SweepResult) -> Vec<ResultRow> {
    sweep
        .cells
        .iter()
        .map(|c| ResultRow {
            n_all: c.n_all.to_string(),
            seed: c.seed,
            final_cost: c.final_cost,
            tp: c.metrics.tp,
            fp: c.metrics.fp,
            tn: c.metrics.tn,
            fn_: c.metrics.fn_,
            tpr: c.metrics.tpr,
            tnr: c.metrics.tnr,
            p: c.metrics.p,
            shots: c.shots,
            threshold: c.threshold,
        })
        .collect()
}

pub fn trace_rows(n_all: OracleKind, seed: u64, trace: &[TraceEntry]) -> Vec<TraceRow> {
    trace
        .iter()
        .map(|t| TraceRow {
            n_all: n_all.to_string(),
            seed,
            round: t.round,
            param_index: t.param_index,
            theta: t.theta,
            est_min: t.est_min,
            exact_cost: t.exact_cost,
            cum_shots: t.cum_shots,
        })
        .collect()
}

pub fn prediction_rows(sweep: &SweepResult) -> Vec<PredictionRow> {
    sweep
        .cells
        .iter()
        .flat_map(|c| {
            c.predictions.iter().map(move |p| PredictionRow {
                n_all: c.n_all.to_string(),
                seed: c.seed,
                x1: p.features[0],
                x2: p.features[1],
                label: p.label,
                probability: p.probability,
                predicted: p.predicted,
            })
        })
        .collect()
}

pub fn timing_rows(sweep: &SweepResult) -> Vec<TimingRow> {
    sweep
        .cells
        .iter()
        .map(|c| TimingRow {
            n_all: c.n_all.to_string(),
            seed: c.seed,
            wall_time_s: c.wall_time.as_secs_f64(),
        })
        .collect()
}

/// Groups rows by `n_all` in order of first appearance.
pub fn summarize(rows: &[ResultRow]) -> Vec<SummaryEntry> {
    let mut groups: Vec<(String, Vec<f64>)> = Vec::new();
    for r in rows {
        match groups.iter_mut().find(|(k, _)| *k == r.n_all) {
            Some((_, ps)) => ps.push(r.p),
            None => groups.push((r.n_all.clone(), vec![r.p])),
        }
    }
    groups
        .into_iter()
        .map(|(n_all, ps)| {
            let n = ps.len() as f64;
            let mean = ps.iter().sum::<f64>() / n;
            let std = if ps.len() > 1 {
                (ps.iter().map(|p| (p - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
            } else {
                0.0
            };
            SummaryEntry {
                n_all,
                seeds: ps.len(),
                mean_p: mean,
                std_p: std,
            }
        })
        .collect()
}

/// A row type with a fixed column list, so empty tables still get a header.
pub trait CsvRow: Serialize {
    const HEADER: &'static [&'static str];
}

impl CsvRow for ResultRow {
    const HEADER: &'static [&'static str] =
        &["n_all", "seed", "final_cost", "tp", "fp", "tn", "fn", "tpr", "tnr", "p", "shots", "threshold"];
}

impl CsvRow for TraceRow {
    const HEADER: &'static [&'static str] =
        &["n_all", "seed", "round", "param_index", "theta", "est_min", "exact_cost", "cum_shots"];
}

impl CsvRow for PredictionRow {
    const HEADER: &'static [&'static str] = &["n_all", "seed", "x1", "x2", "label", "probability", "predicted"];
}

impl CsvRow for TimingRow {
    const HEADER: &'static [&'static str] = &["n_all", "seed", "wall_time_s"];
}

/// Trace of a single run (`trace.csv`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunTraceRow {
    pub round: usize,
    pub param_index: usize,
    pub theta: f64,
    pub est_min: f64,
    pub exact_cost: f64,
    pub cum_shots: u64,
}

impl CsvRow for RunTraceRow {
    const HEADER: &'static [&'static str] = &["round", "param_index", "theta", "est_min", "exact_cost", "cum_shots"];
}

/// CSV text with `#` comment lines in front.
pub fn csv_bytes<T: CsvRow>(comments: &[String], rows: &[T]) -> Result<Vec<u8>, CliError> {
    let mut out = Vec::new();
    for c in comments {
        out.extend_from_slice(format!("# {c}\n").as_bytes());
    }
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(T::HEADER).map_err(|e| CliError::Runtime(format!("csv: {e}")))?;
    for r in rows {
        w.serialize(r).map_err(|e| CliError::Runtime(format!("csv: {e}")))?;
    }
    w.into_inner().map_err(|e| CliError::Runtime(format!("csv: {e}")))
}

/// Reads a CSV written by [`csv_bytes`]. Returns the comment lines (without
/// the `# ` prefix) and the rows.
pub fn read_csv<T: DeserializeOwned>(path: &Path) -> Result<(Vec<String>, Vec<T>), CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))?;
    let comments = text
        .lines()
        .take_while(|l| l.starts_with('#'))
        .map(|l| l.trim_start_matches('#').trim().to_string())
        .collect();
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let rows = reader
        .deserialize()
        .collect::<Result<Vec<T>, _>>()
        .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    Ok((comments, rows))
}

/// Rule recorded in a `# rule=` comment, if any.
pub fn rule_from_comments(comments: &[String]) -> Result<Option<LabelRule>, CliError> {
    comments
        .iter()
        .find_map(|c| c.strip_prefix("rule="))
        .map(|json| serde_json::from_str(json).map_err(|e| CliError::Input(format!("bad rule comment: {e}"))))
        .transpose()
}

pub fn rule_comment(rule: &LabelRule) -> String {
    format!("rule={}", serde_json::to_string(rule).expect("rules always serialize"))
}

/// A file to be written under the output directory.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OutputFile {
    pub name: String,
    pub bytes: Vec<u8>,
}

impl OutputFile {
    pub fn new(name: impl Into<String>, bytes: impl Into<Vec<u8>>) -> Self {
        OutputFile {
            name: name.into(),
            bytes: bytes.into(),
        }
    }
}

/// Writes all files. Called only once every file has been produced, so a
/// failed command leaves nothing behind.
pub fn write_all(dir: &Path, files: &[OutputFile]) -> Result<Vec<PathBuf>, CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("cannot create {}: {e}", dir.display())))?;
    files
        .iter()
        .map(|f| {
            let path = dir.join(&f.name);
            fs::write(&path, &f.bytes).map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))?;
            Ok(path)
        })
        .collect()
}

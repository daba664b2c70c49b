//! Command line front end.
//!
//! Subcommands `train`, `sweep`, `budget` and `plot`. Every command builds
//! all of its output in memory first and writes files only once nothing can
//! fail any more. Exit codes: 0 success, 1 configuration or input error,
//! 2 runtime error.

pub mod config;
pub mod output;
pub mod plot;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use thiserror::Error;

use crate::classifier::{cell_training_config, compute_metrics, prepare_seed, run_nall_sweep, LabelRule};
use crate::shots::OracleKind;
use crate::smo::{exact_cost, shot_budget, single_batch_budget, Trainer};

pub use config::{ResolvedConfig, RunConfig};
pub use output::{OutputFile, Provenance, ResultRow, SummaryEntry};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("input error: {0}")]
    Input(String),
    #[error("i/o error: {0}")]
    Io(String),
    #[error("runtime error: {0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Input(_) => 1,
            CliError::Io(_) | CliError::Runtime(_) => 2,
        }
    }
}

fn runtime(e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(e.to_string())
}

#[derive(Debug, Parser)]
#[command(name = "photonic-smo", version, about = "Shot-frugal training of photonic reuploading classifiers")]
pub struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train once (first n_all entry, first seed); writes trace.csv and params.toml.
    Train(RunArgs),
    /// Train every (n_all, seed) cell; writes results.csv, summary.json and plots.
    Sweep(RunArgs),
    /// Print the shot budget per n_all.
    Budget(RunArgs),
    /// Render plots from a results file or an output directory.
    Plot(PlotArgs),
}

#[derive(Debug, Clone, Default, Args)]
pub struct RunArgs {
    /// Run configuration (TOML). Defaults apply when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory, overriding `output.dir`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Master seed, overriding `master_seed`.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Write SVG plots.
    #[arg(long, overrides_with = "no_plot")]
    pub plot: bool,
    /// Do not write SVG plots.
    #[arg(long = "no-plot")]
    pub no_plot: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PlotKind {
    Regions,
    Curve,
    Trace,
}

impl PlotKind {
    /// File read when the input is a directory.
    fn default_input(self) -> &'static str {
        match self {
            PlotKind::Regions => "predictions.csv",
            PlotKind::Curve => "results.csv",
            PlotKind::Trace => "traces.csv",
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct PlotArgs {
    /// CSV file, or a sweep output directory.
    pub input: PathBuf,
    #[arg(long, value_enum)]
    pub kind: PlotKind,
    /// Output directory (default: next to the input).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Loads the config and applies command line overrides.
pub fn load_config(args: &RunArgs) -> Result<ResolvedConfig, CliError> {
    let mut config = match &args.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = args.seed {
        config.master_seed = seed;
    }
    if let Some(out) = &args.out {
        config.output.dir = out.clone();
    }
    if args.plot {
        config.output.plots = true;
    }
    if args.no_plot {
        config.output.plots = false;
    }
    ResolvedConfig::new(config)
}

fn provenance(resolved: &ResolvedConfig) -> Provenance {
    Provenance::new(resolved.config.master_seed, &resolved.hash)
}

#[derive(Debug, Serialize)]
struct ParamsFile {
    n_all: OracleKind,
    seed: u64,
    initial_cost: f64,
    final_cost: f64,
    initial: Vec<f64>,
    params: Vec<f64>,
}

/// Single training run on the first `n_all` entry and first seed, with the
/// same data and start point the sweep uses for that cell.
pub fn cmd_train(resolved: &ResolvedConfig) -> Result<Vec<OutputFile>, CliError> {
    let sweep = resolved.sweep_config();
    let kind = sweep.n_all[0];
    let seed = sweep.seeds[0];
    let setup = prepare_seed(&sweep, seed);
    let training = cell_training_config(&sweep, kind, seed);
    let circuit = &resolved.circuit;
    let data = &setup.train.points;
    let state = Trainer::new(circuit, data, &training)
        .and_then(|t| t.train(setup.start.clone()))
        .map_err(runtime)?;
    let initial_cost = exact_cost(circuit, &setup.start, data).map_err(runtime)?;
    let final_cost = exact_cost(circuit, &state.params, data).map_err(runtime)?;

    let prov = provenance(resolved);
    let rows: Vec<output::RunTraceRow> = state
        .trace
        .iter()
        .map(|t| output::RunTraceRow {
            round: t.round,
            param_index: t.param_index,
            theta: t.theta,
            est_min: t.est_min,
            exact_cost: t.exact_cost,
            cum_shots: t.cum_shots,
        })
        .collect();
    let trace = output::csv_bytes(&[prov.line(), format!("n_all={kind}; seed={seed}")], &rows)?;
    let params = ParamsFile {
        n_all: kind,
        seed,
        initial_cost,
        final_cost,
        initial: setup.start.0.clone(),
        params: state.params.0.clone(),
    };
    let params_text = format!(
        "# {}\n{}",
        prov.line(),
        toml::to_string(&params).map_err(runtime)?
    );
    Ok(vec![
        OutputFile::new("trace.csv", trace),
        OutputFile::new("params.toml", params_text),
    ])
}

/// Full `(n_all, seed)` sweep.
pub fn cmd_sweep(resolved: &ResolvedConfig) -> Result<Vec<OutputFile>, CliError> {
    let sweep_config = resolved.sweep_config();
    let sweep = run_nall_sweep(&sweep_config).map_err(runtime)?;
    let prov = provenance(resolved);
    let rule = &resolved.config.dataset.rule;
    let head = vec![prov.line(), output::rule_comment(rule)];

    let results = output::result_rows(&sweep);
    let traces: Vec<_> = sweep
        .cells
        .iter()
        .flat_map(|c| output::trace_rows(c.n_all, c.seed, &c.trace))
        .collect();
    let predictions = output::prediction_rows(&sweep);
    let summary = output::Summary {
        provenance: prov.clone(),
        rule: rule.clone(),
        entries: output::summarize(&results),
    };
    let mut summary_text = serde_json::to_string_pretty(&summary).map_err(runtime)?;
    summary_text.push('\n');

    let mut files = vec![
        OutputFile::new("results.csv", output::csv_bytes(&head, &results)?),
        OutputFile::new("summary.json", summary_text),
        OutputFile::new("traces.csv", output::csv_bytes(&head, &traces)?),
        OutputFile::new("predictions.csv", output::csv_bytes(&head, &predictions)?),
        OutputFile::new("timings.csv", output::csv_bytes(&head, &output::timing_rows(&sweep))?),
    ];
    if resolved.config.output.plots {
        files.extend(regions_plots(&predictions, Some(rule), &prov.line())?);
        files.push(curve_plot(&results, &prov.line())?);
        files.push(trace_plot(&traces, &prov.line())?);
    }
    Ok(files)
}

/// One line of the budget table.
#[derive(Debug, Clone, PartialEq)]
pub struct BudgetLine {
    pub n_all: OracleKind,
    pub shots: u64,
    pub note: Option<&'static str>,
    /// Single-batch run with 200 shots per probe.
    pub baseline: u64,
    /// `baseline / shots`; `None` when `shots` is zero.
    pub speedup: Option<f64>,
}

pub const BASELINE_SHOTS: u32 = 200;

pub fn budget_lines(resolved: &ResolvedConfig) -> Vec<BudgetLine> {
    let c = &resolved.config;
    let baseline = single_batch_budget(c.train.rounds, &resolved.circuit, c.dataset.n, BASELINE_SHOTS);
    c.train
        .n_all
        .iter()
        .map(|&kind| {
            let b = shot_budget(&resolved.training_config(kind, 0), &resolved.circuit, c.dataset.n);
            BudgetLine {
                n_all: kind,
                shots: b.shots,
                note: b.note,
                baseline,
                speedup: (b.shots > 0).then(|| baseline as f64 / b.shots as f64),
            }
        })
        .collect()
}

/// Budget table as printed on standard output.
pub fn cmd_budget(resolved: &ResolvedConfig) -> String {
    let c = &resolved.config;
    let mut out = String::new();
    let _ = writeln!(out, "# {}", provenance(resolved).line());
    let _ = writeln!(
        out,
        "# rounds={} params={} points={} probes={} baseline=single batch of {BASELINE_SHOTS} shots",
        c.train.rounds,
        resolved.circuit.param_count(),
        c.dataset.n,
        2 * resolved.circuit.photons() + 1
    );
    let _ = writeln!(out, "{:>8} {:>16} {:>16} {:>10}", "n_all", "shots", "baseline", "speedup");
    for line in budget_lines(resolved) {
        let speedup = line.speedup.map_or_else(|| "-".to_string(), |s| format!("{s}"));
        let _ = write!(
            out,
            "{:>8} {:>16} {:>16} {:>10}",
            line.n_all.to_string(),
            line.shots,
            line.baseline,
            speedup
        );
        if let Some(note) = line.note {
            let _ = write!(out, "  ({note})");
        }
        out.push('\n');
    }
    out
}

fn regions_plots(
    rows: &[output::PredictionRow],
    rule: Option<&LabelRule>,
    provenance: &str,
) -> Result<Vec<OutputFile>, CliError> {
    if rows.is_empty() {
        return Err(CliError::Input("no predictions to plot".into()));
    }
    // One panel per n_all, for the first seed listed.
    let seed = rows[0].seed;
    let mut kinds: Vec<&str> = Vec::new();
    for r in rows.iter().filter(|r| r.seed == seed) {
        if !kinds.contains(&r.n_all.as_str()) {
            kinds.push(&r.n_all);
        }
    }
    kinds
        .into_iter()
        .map(|kind| {
            let cell: Vec<_> = rows.iter().filter(|r| r.seed == seed && r.n_all == kind).collect();
            let preds: Vec<u8> = cell.iter().map(|r| r.predicted).collect();
            let labels: Vec<u8> = cell.iter().map(|r| r.label).collect();
            let metrics = compute_metrics(&preds, &labels).map_err(|e| CliError::Input(e.to_string()))?;
            let points: Vec<_> = cell
                .iter()
                .map(|r| plot::RegionPoint {
                    x: [r.x1, r.x2],
                    predicted: r.predicted,
                })
                .collect();
            let title = format!("decision regions, N_all = {kind}, seed {seed}");
            let svg = plot::regions_svg(&points, rule, metrics.p, &title, provenance);
            Ok(OutputFile::new(format!("regions_{kind}.svg"), svg))
        })
        .collect()
}

/// Category order: ascending shot count, exact last.
fn curve_points(rows: &[ResultRow]) -> Result<Vec<plot::CurvePoint>, CliError> {
    let mut entries = output::summarize(rows);
    let mut keyed = Vec::with_capacity(entries.len());
    for e in entries.drain(..) {
        let key = match output::parse_n_all(&e.n_all)? {
            OracleKind::Exact => u64::MAX,
            OracleKind::Binomial { shots } => u64::from(shots),
        };
        keyed.push((key, e));
    }
    keyed.sort_by_key(|(k, _)| *k);
    Ok(keyed
        .into_iter()
        .map(|(_, e)| plot::CurvePoint {
            label: e.n_all,
            mean: e.mean_p,
            std: e.std_p,
        })
        .collect())
}

fn curve_plot(rows: &[ResultRow], provenance: &str) -> Result<OutputFile, CliError> {
    if rows.is_empty() {
        return Err(CliError::Input("no results to plot".into()));
    }
    let points = curve_points(rows)?;
    let svg = plot::curve_svg(&points, "mean success probability vs N_all", provenance);
    Ok(OutputFile::new("curve.svg", svg))
}

/// Mean exact cost per update across seeds, one series per n_all.
fn trace_plot(rows: &[output::TraceRow], provenance: &str) -> Result<OutputFile, CliError> {
    if rows.is_empty() {
        return Err(CliError::Input("no trace rows to plot".into()));
    }
    let mut series: Vec<(String, Vec<(u64, Vec<f64>)>)> = Vec::new();
    for r in rows {
        let idx = match series.iter().position(|(k, _)| *k == r.n_all) {
            Some(i) => i,
            None => {
                series.push((r.n_all.clone(), Vec::new()));
                series.len() - 1
            }
        };
        let runs = &mut series[idx].1;
        match runs.iter_mut().find(|(s, _)| *s == r.seed) {
            Some((_, v)) => v.push(r.exact_cost),
            None => runs.push((r.seed, vec![r.exact_cost])),
        }
    }
    let averaged: Vec<(String, Vec<f64>)> = series
        .into_iter()
        .map(|(name, runs)| {
            let len = runs.iter().map(|(_, v)| v.len()).min().unwrap_or(0);
            let mean = (0..len)
                .map(|i| runs.iter().map(|(_, v)| v[i]).sum::<f64>() / runs.len() as f64)
                .collect();
            (name, mean)
        })
        .collect();
    let svg = plot::trace_svg(&averaged, "exact cost during training (mean over seeds)", provenance);
    Ok(OutputFile::new("trace.svg", svg))
}

fn provenance_from_comments(comments: &[String]) -> String {
    comments.first().cloned().unwrap_or_default()
}

/// Renders `kind` from `input` (a CSV file or a sweep output directory).
pub fn cmd_plot(input: &Path, kind: PlotKind) -> Result<Vec<OutputFile>, CliError> {
    let path = if input.is_dir() {
        input.join(kind.default_input())
    } else {
        input.to_path_buf()
    };
    match kind {
        PlotKind::Regions => {
            let (comments, rows) = output::read_csv::<output::PredictionRow>(&path)?;
            let rule = output::rule_from_comments(&comments)?;
            regions_plots(&rows, rule.as_ref(), &provenance_from_comments(&comments))
        }
        PlotKind::Curve => {
            let (comments, rows) = output::read_csv::<ResultRow>(&path)?;
            Ok(vec![curve_plot(&rows, &provenance_from_comments(&comments))?])
        }
        PlotKind::Trace => {
            let (comments, rows) = output::read_csv::<output::TraceRow>(&path)?;
            Ok(vec![trace_plot(&rows, &provenance_from_comments(&comments))?])
        }
    }
}

fn execute(cli: Cli) -> Result<(), CliError> {
    if let Some(threads) = cli.threads {
        if threads == 0 {
            return Err(CliError::Config("--threads must be positive".into()));
        }
        // Fails only if a pool already exists, which is harmless.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
    }
    match cli.command {
        Command::Train(args) => {
            let resolved = load_config(&args)?;
            let files = cmd_train(&resolved)?;
            report(output::write_all(&resolved.config.output.dir, &files)?);
        }
        Command::Sweep(args) => {
            let resolved = load_config(&args)?;
            let files = cmd_sweep(&resolved)?;
            report(output::write_all(&resolved.config.output.dir, &files)?);
        }
        Command::Budget(args) => {
            let resolved = load_config(&args)?;
            print!("{}", cmd_budget(&resolved));
        }
        Command::Plot(args) => {
            let files = cmd_plot(&args.input, args.kind)?;
            let dir = match args.out {
                Some(d) => d,
                None if args.input.is_dir() => args.input.clone(),
                None => args.input.parent().map(Path::to_path_buf).unwrap_or_default(),
            };
            report(output::write_all(&dir, &files)?);
        }
    }
    Ok(())
}

fn report(paths: Vec<PathBuf>) {
    for p in paths {
        log::info!("wrote {}", p.display());
    }
}

/// Parses `args` (including the program name) and runs the command.
/// Returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

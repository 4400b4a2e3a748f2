//! Command-line front end: snapshot checks, analysis, review service,
//! decision application and reporting.

pub mod server;

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

use pmn_harvest_core::pmn::ParseWarning;
use pmn_harvest_core::report::{conservation_violations, export_provenance, summarize, ReportError};
use pmn_harvest_core::resolver::{run_pipeline, AnalysisResult, PipelineError};
use pmn_harvest_core::review::{apply_decisions, cross_validate, AgreementClass, ReviewError};
use pmn_harvest_core::snapshot::{load_snapshot, IndexedSnapshot, SnapshotError, SnapshotSet};

pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_IO: i32 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Data(_) => EXIT_DATA,
            CliError::Io(_) => EXIT_IO,
        }
    }
}

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<ReviewError> for CliError {
    fn from(e: ReviewError) -> Self {
        match e {
            ReviewError::LogUnwritable(_) | ReviewError::LogUnreadable(_) => {
                CliError::Io(e.to_string())
            }
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<ReportError> for CliError {
    fn from(e: ReportError) -> Self {
        CliError::Io(e.to_string())
    }
}

fn snapshot_error(path: &Path, e: SnapshotError) -> CliError {
    let message = format!("{}: {e}", path.display());
    match e {
        SnapshotError::FileUnreadable { .. } => CliError::Io(message),
        _ => CliError::Data(message),
    }
}

#[derive(Debug, Parser)]
#[command(name = "pmn-harvest", version, about = "Link new MeSH descriptors to their predecessor SCRs")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Load and validate snapshot files, printing per-year counts.
    IngestCheck {
        #[arg(long, num_args = 1.., required = true)]
        snapshots: Vec<String>,
    },
    /// Run the resolution cascade and write the analysis JSON.
    Analyze(AnalyzeArgs),
    /// Work the adjudication queue.
    #[command(subcommand)]
    Review(ReviewCommand),
    /// Print the summary table, optionally exporting the provenance dataset.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    /// Snapshot files or glob patterns.
    #[arg(long, num_args = 1.., required = true)]
    pub snapshots: Vec<String>,
    #[arg(long)]
    pub from: i32,
    #[arg(long)]
    pub to: i32,
    /// Edit-distance candidates per descriptor.
    #[arg(long, default_value_t = 5, value_parser = clap::value_parser!(u32).range(1..))]
    pub k: u32,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub report_tsv: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum ReviewCommand {
    /// Serve the review HTTP API (and UI assets when given).
    Serve(ServeArgs),
    /// Apply the decision log to an analysis.
    Apply {
        #[arg(long)]
        analysis: PathBuf,
        #[arg(long, default_value = "decisions.jsonl")]
        decisions: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        report_tsv: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long)]
    pub analysis: PathBuf,
    #[arg(long, default_value = "decisions.jsonl")]
    pub decisions: PathBuf,
    #[arg(long, default_value_t = 8080, value_parser = clap::value_parser!(u16).range(1..))]
    pub port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    pub bind: String,
    /// Snapshots used for host agreement; `/api/agreement` is unavailable without them.
    #[arg(long, num_args = 1..)]
    pub snapshots: Vec<String>,
    /// Directory of static review UI assets.
    #[arg(long)]
    pub assets: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    #[arg(long)]
    pub analysis: PathBuf,
    /// Needed for host agreement and the provenance export.
    #[arg(long, num_args = 1..)]
    pub snapshots: Vec<String>,
    #[arg(long)]
    pub report_tsv: Option<PathBuf>,
    /// Provenance TSV output path.
    #[arg(long)]
    pub export: Option<PathBuf>,
}

fn expand(patterns: &[String]) -> Result<Vec<PathBuf>, CliError> {
    let mut paths = Vec::new();
    for pattern in patterns {
        if !pattern.contains(['*', '?', '[']) {
            paths.push(PathBuf::from(pattern));
            continue;
        }
        let matches = glob::glob(pattern)
            .map_err(|e| CliError::Usage(format!("bad snapshot pattern {pattern}: {e}")))?;
        let before = paths.len();
        for entry in matches {
            paths.push(entry.map_err(|e| CliError::Io(e.to_string()))?);
        }
        if paths.len() == before {
            return Err(CliError::Io(format!("no snapshot files match {pattern}")));
        }
    }
    paths.sort();
    paths.dedup();
    Ok(paths)
}

pub fn load_snapshot_set(patterns: &[String]) -> Result<SnapshotSet, CliError> {
    let mut set = SnapshotSet::new();
    for path in expand(patterns)? {
        let snapshot = load_snapshot(&path).map_err(|e| snapshot_error(&path, e))?;
        let year = snapshot.year;
        let indexed = IndexedSnapshot::new(snapshot).map_err(|e| snapshot_error(&path, e))?;
        if set.insert(year, indexed).is_some() {
            return Err(CliError::Data(format!(
                "{}: second snapshot for year {year}",
                path.display()
            )));
        }
    }
    Ok(set)
}

pub fn read_analysis(path: &Path) -> Result<AnalysisResult, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Io(format!("cannot read {}: {e}", path.display())))?;
    AnalysisResult::from_json(&text)
        .map_err(|e| CliError::Data(format!("{}: malformed analysis: {e}", path.display())))
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    fs::write(path, contents)
        .map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))
}

fn print_summary(analysis: &AnalysisResult, tsv: Option<&Path>) -> Result<(), CliError> {
    let table = summarize(analysis);
    print!("{table}");
    for broken in conservation_violations(analysis) {
        eprintln!("warning: count identity does not hold: {broken}");
    }
    if let Some(path) = tsv {
        write_file(path, &table.to_tsv())?;
    }
    Ok(())
}

pub fn cmd_ingest_check(patterns: &[String]) -> Result<(), CliError> {
    let set = load_snapshot_set(patterns)?;
    for (year, entry) in &set {
        println!(
            "{year}: {} descriptors, {} SCRs, {} SCR terms",
            entry.snapshot.descriptors.len(),
            entry.snapshot.scrs.len(),
            entry.index.all_scr_terms.len()
        );
    }
    Ok(())
}

pub fn cmd_analyze(args: &AnalyzeArgs) -> Result<(), CliError> {
    if args.from > args.to {
        return Err(CliError::Usage(format!(
            "--from {} is after --to {}",
            args.from, args.to
        )));
    }
    let set = load_snapshot_set(&args.snapshots)?;
    let analysis = run_pipeline(&set, [args.from, args.to], args.k as usize)?;
    write_file(&args.out, &analysis.to_json())?;
    print_summary(&analysis, args.report_tsv.as_deref())
}

pub fn cmd_review_apply(
    analysis: &Path,
    decisions: &Path,
    out: &Path,
    report_tsv: Option<&Path>,
) -> Result<(), CliError> {
    let analysis = read_analysis(analysis)?;
    let decided = apply_decisions(&analysis, decisions)?;
    write_file(out, &decided.to_json())?;
    print_summary(&decided, report_tsv)
}

pub fn cmd_report(args: &ReportArgs) -> Result<(), CliError> {
    let analysis = read_analysis(&args.analysis)?;
    print_summary(&analysis, args.report_tsv.as_deref())?;
    if args.snapshots.is_empty() {
        if args.export.is_some() {
            return Err(CliError::Usage("--export requires --snapshots".into()));
        }
        return Ok(());
    }
    let set = load_snapshot_set(&args.snapshots)?;
    let agreements = cross_validate(&analysis, &set)?;
    println!();
    println!("Host agreement ({} links made through the note)", agreements.len());
    for class in [
        AgreementClass::Identical,
        AgreementClass::SomeDifferent,
        AgreementClass::PmnPlusAdditional,
        AgreementClass::PmnSubsetOnly,
    ] {
        let n = agreements.iter().filter(|a| a.class == class).count();
        println!("  {:<18} {n:>6}", class.as_str());
    }
    let flagged = agreements
        .iter()
        .filter(|a| a.warnings.contains(&ParseWarning::EmptyHostName))
        .count();
    if flagged > 0 {
        println!("  ({flagged} with an unnamed host in the note)");
    }
    if let Some(path) = &args.export {
        export_provenance(&analysis, &agreements, path)?;
    }
    Ok(())
}

pub fn cmd_review_serve(args: &ServeArgs) -> Result<(), CliError> {
    let analysis = read_analysis(&args.analysis).map_err(|e| match e {
        CliError::Io(msg) => CliError::Io(format!("analysis missing: {msg}")),
        other => other,
    })?;
    let snapshots = if args.snapshots.is_empty() {
        None
    } else {
        Some(load_snapshot_set(&args.snapshots)?)
    };
    let state = server::AppState::open(analysis, &args.decisions, snapshots)?;
    let runtime = tokio::runtime::Runtime::new().map_err(|e| CliError::Io(e.to_string()))?;
    runtime.block_on(async {
        let addr = format!("{}:{}", args.bind, args.port);
        let listener = tokio::net::TcpListener::bind(&addr)
            .await
            .map_err(|e| CliError::Io(format!("cannot listen on {addr} (port in use?): {e}")))?;
        eprintln!("review service listening on http://{addr}");
        server::serve(listener, state, args.assets.clone())
            .await
            .map_err(|e| CliError::Io(e.to_string()))
    })
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::IngestCheck { snapshots } => cmd_ingest_check(&snapshots),
        Command::Analyze(args) => cmd_analyze(&args),
        Command::Review(ReviewCommand::Serve(args)) => cmd_review_serve(&args),
        Command::Review(ReviewCommand::Apply {
            analysis,
            decisions,
            out,
            report_tsv,
        }) => cmd_review_apply(&analysis, &decisions, &out, report_tsv.as_deref()),
        Command::Report(args) => cmd_report(&args),
    }
}

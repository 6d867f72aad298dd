use std::fs::File;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Parser, Subcommand, ValueEnum};
use log::{debug, info};
use storystream_core::config::{Cadence, RunConfig};
use storystream_core::embedding::{load_vectors, VectorSource};
use storystream_core::evalmetrics::{evaluate, read_labels, Labeling};
use storystream_core::io::ArticleReader;
use storystream_core::pipeline::{Pipeline, PipelineError};
use storystream_core::snapshot::Snapshot;

#[derive(Parser)]
#[command(
    name = "storystream",
    version,
    about = "Streaming news story construction"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Cluster an article stream into stories.
    Run(RunArgs),
    /// Score predicted assignments against gold labels.
    Eval {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        gold: PathBuf,
        /// Also write the report to this file.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Render a snapshot's story graph as Graphviz DOT.
    ExportDot {
        #[arg(long)]
        snapshot: PathBuf,
        /// Write to this file instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum CadenceArg {
    PerSlide,
    FinalOnly,
}

#[derive(clap::Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Window span W, in the configured time unit.
    #[arg(long)]
    span: Option<i64>,
    /// Slide interval S, in the configured time unit.
    #[arg(long)]
    interval: Option<i64>,
    /// Lateness tolerance L, in the configured time unit.
    #[arg(long)]
    lateness: Option<i64>,
    /// Article-graph edge threshold.
    #[arg(long)]
    epsilon: Option<f64>,
    /// Story-graph edge threshold.
    #[arg(long)]
    story_epsilon: Option<f64>,
    #[arg(long)]
    resolution: Option<f64>,
    #[arg(long)]
    min_gain: Option<f64>,
    #[arg(long, value_enum)]
    cadence: Option<CadenceArg>,
    /// Snapshot directory, relative to --out unless absolute.
    #[arg(long)]
    snapshot_dir: Option<String>,
}

/// An error plus the process exit code it maps to.
struct Failure {
    code: u8,
    error: anyhow::Error,
}

impl<E: Into<anyhow::Error>> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure {
            code: 1,
            error: e.into(),
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("STORYSTREAM_LOG", "warn"))
        .init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => run(args),
        Command::Eval { pred, gold, out } => eval(&pred, &gold, out.as_deref()),
        Command::ExportDot { snapshot, out } => export_dot(&snapshot, out.as_deref()),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}

/// Writes through a temp file in the destination directory, then renames.
fn write_atomic(path: &Path, contents: &str) -> anyhow::Result<()> {
    let dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir)
        .with_context(|| format!("cannot create temp file in {}", dir.display()))?;
    tmp.write_all(contents.as_bytes())?;
    tmp.as_file().sync_all()?;
    tmp.persist(path)
        .with_context(|| format!("cannot write {}", path.display()))?;
    Ok(())
}

fn apply_overrides(cfg: &mut RunConfig, args: &RunArgs) {
    if let Some(v) = args.span {
        cfg.window.span = v;
    }
    if let Some(v) = args.interval {
        cfg.window.interval = v;
    }
    if let Some(v) = args.lateness {
        cfg.window.lateness = v;
    }
    if let Some(v) = args.epsilon {
        cfg.article_graph.epsilon = v;
    }
    if let Some(v) = args.story_epsilon {
        cfg.story_graph.epsilon = v;
    }
    if let Some(v) = args.resolution {
        cfg.louvain.resolution = v;
    }
    if let Some(v) = args.min_gain {
        cfg.louvain.min_gain = v;
    }
    if let Some(c) = args.cadence {
        cfg.snapshots.cadence = match c {
            CadenceArg::PerSlide => Cadence::PerSlide,
            CadenceArg::FinalOnly => Cadence::FinalOnly,
        };
    }
    if let Some(d) = &args.snapshot_dir {
        cfg.snapshots.dir = d.clone();
    }
}

fn pipeline_failure(e: PipelineError) -> Failure {
    Failure {
        code: if e.is_order_violation() { 2 } else { 1 },
        error: e.into(),
    }
}

fn run(args: RunArgs) -> Result<(), Failure> {
    let mut cfg = RunConfig::load(&args.config)?;
    apply_overrides(&mut cfg, &args);
    cfg.validate()?;
    let precomputed = match &cfg.vectors {
        VectorSource::PrecomputedFile { path, dimension } => {
            load_vectors(path, *dimension).with_context(|| format!("vector file {path}"))?
        }
        _ => Default::default(),
    };
    let input = File::open(&args.input)
        .with_context(|| format!("cannot open input {}", args.input.display()))?;
    let snap_dir = args.out.join(&cfg.snapshots.dir);
    std::fs::create_dir_all(&snap_dir)
        .with_context(|| format!("cannot create {}", snap_dir.display()))?;

    let mut pipeline = Pipeline::new(cfg, precomputed)?;
    let mut written = 0usize;
    for article in ArticleReader::new(BufReader::new(input)) {
        let article = article.with_context(|| format!("input {}", args.input.display()))?;
        debug!("ingest {} at {}", article.id, article.timestamp);
        for snap in pipeline.push(article).map_err(pipeline_failure)? {
            let path = snap_dir.join(format!("snapshot-{:06}.json", snap.sequence));
            write_atomic(&path, &snap.to_json())?;
            written += 1;
        }
    }
    let output = pipeline.finish().map_err(pipeline_failure)?;
    write_atomic(
        &snap_dir.join("final.json"),
        &output.final_snapshot.to_json(),
    )?;

    let mut lines = String::new();
    for a in &output.assignments {
        let rec =
            serde_json::json!({ "id": a.id, "label": a.story.to_string(), "story": a.story.0 });
        lines.push_str(&rec.to_string());
        lines.push('\n');
    }
    write_atomic(&args.out.join("assignments.jsonl"), &lines)?;
    info!(
        "{} articles, {} stories, {} snapshots plus final",
        output.assignments.len(),
        output.final_snapshot.stories.len(),
        written
    );
    Ok(())
}

fn read_labeling(path: &Path) -> Result<Labeling, Failure> {
    let file = File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
    Ok(read_labels(BufReader::new(file)).with_context(|| format!("{}", path.display()))?)
}

fn eval(pred: &Path, gold: &Path, out: Option<&Path>) -> Result<(), Failure> {
    let report = evaluate(&read_labeling(pred)?, &read_labeling(gold)?)?;
    let mut text = serde_json::to_string_pretty(&report)?;
    text.push('\n');
    print!("{text}");
    if let Some(path) = out {
        write_atomic(path, &text)?;
    }
    Ok(())
}

fn export_dot(snapshot: &Path, out: Option<&Path>) -> Result<(), Failure> {
    let text = std::fs::read_to_string(snapshot)
        .with_context(|| format!("cannot read {}", snapshot.display()))?;
    let snap = Snapshot::from_json(&text).map_err(|e| anyhow!("{}: {e}", snapshot.display()))?;
    let dot = snap.to_dot();
    match out {
        Some(path) => write_atomic(path, &dot)?,
        None => print!("{dot}"),
    }
    Ok(())
}

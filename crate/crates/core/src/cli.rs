//! Command-line front end.
//!
//! ```text
//! streamadapt select   --stream s.jsonl [--checkpoint-in c.bin] [--log d.jsonl] [--bank-out b.json]
//! streamadapt adapt    --stream s.jsonl --checkpoint-in c.bin --checkpoint-out out.bin [--report r.json]
//! streamadapt simulate --spec reference --seeds 0,1,2,3,4 [--out-json t.json] [--out-text t.txt]
//! streamadapt report   (--banks b.json | --checkpoint c.bin | --run r.json | --table t.json)
//! ```
//!
//! `--config`, `--mode` and `--print-config` apply to every command.
//! Exit codes: 0 success, 1 usage, 2 data error, 3 numeric divergence.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::acquisition::{DecisionRecord, Stage, Verdict};
use crate::cluster::ClusterBank;
use crate::config::{EngineConfig, Mode};
use crate::engine::Engine;
use crate::error::Error;
use crate::sim::{ablation_compare, AblationTable, RunReport, SimulationSpec};
use crate::stream::open_stream;
use crate::teacher::{
    read_checkpoint, write_checkpoint, AdaptableModel, CheckpointHeader, ModelParams,
};
use crate::toy::ToyDetector;

#[derive(Debug, Parser)]
#[command(
    name = "streamadapt",
    version,
    about = "Online keyframe acquisition and mean-teacher adaptation"
)]
pub struct Cli {
    /// Engine configuration file (JSON); missing keys take defaults.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Overrides the configured mode: no_acquire, auf or auf_arc.
    #[arg(long, global = true)]
    pub mode: Option<Mode>,

    /// Print the effective configuration and exit.
    #[arg(long, global = true)]
    pub print_config: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run keyframe selection only and write the decision log.
    Select(SelectArgs),
    /// Adapt a checkpoint over a stream and write the finalized checkpoint.
    Adapt(AdaptArgs),
    /// Run the ablation over synthetic streams. The spec carries its own
    /// engine settings; `--config` and `--mode` do not apply.
    Simulate(SimulateArgs),
    /// Summarise a bank snapshot, checkpoint, run report or ablation table.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct SelectArgs {
    /// Input stream (JSON Lines).
    #[arg(long)]
    pub stream: PathBuf,
    /// Teacher used for pseudo-labels when the stream carries none.
    #[arg(long)]
    pub checkpoint_in: Option<PathBuf>,
    /// Decision log destination; stdout when omitted.
    #[arg(long)]
    pub log: Option<PathBuf>,
    /// Write both cluster banks here after the stream ends.
    #[arg(long)]
    pub bank_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AdaptArgs {
    /// Input stream (JSON Lines).
    #[arg(long)]
    pub stream: PathBuf,
    /// Source model checkpoint.
    #[arg(long)]
    pub checkpoint_in: PathBuf,
    /// Where to write the finalized model.
    #[arg(long)]
    pub checkpoint_out: PathBuf,
    /// Run summary destination; stdout when omitted.
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Write both cluster banks here after the stream ends.
    #[arg(long)]
    pub bank_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// `reference`, `adversarial`, or a path to a simulation spec.
    #[arg(long, default_value = "reference")]
    pub spec: String,
    /// Comma-separated seeds; at least five.
    #[arg(long, value_delimiter = ',', default_values_t = [0u64, 1, 2, 3, 4])]
    pub seeds: Vec<u64>,
    /// Write the summary table as JSON.
    #[arg(long)]
    pub out_json: Option<PathBuf>,
    /// Write the rendered table as text (it is always printed to stdout).
    #[arg(long)]
    pub out_text: Option<PathBuf>,
    /// Also write every per-seed run report (includes wall-clock timings).
    #[arg(long)]
    pub runs_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
#[group(required = true, multiple = false)]
pub struct ReportArgs {
    /// Bank snapshot written by `--bank-out`.
    #[arg(long)]
    pub banks: Option<PathBuf>,
    /// Binary checkpoint.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// Run summary written by `adapt --report`, or one simulated run report.
    #[arg(long)]
    pub run: Option<PathBuf>,
    /// Ablation table written by `simulate --out-json`.
    #[arg(long)]
    pub table: Option<PathBuf>,
}

/// Both banks of a selection run, as written by `--bank-out`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BankSnapshot {
    pub auf: ClusterBank,
    pub arc: ClusterBank,
    pub histogram: Vec<u64>,
    pub warmup_done: bool,
}

/// Summary of a run over a stream file (no ground truth available).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StreamRunSummary {
    pub mode: Mode,
    pub frames: usize,
    pub keyframes_total: usize,
    pub keyframes_auf: usize,
    pub keyframes_arc: usize,
    /// Keyframes whose update actually used at least one pseudo-label.
    pub updates: usize,
    pub clusters_auf: usize,
    pub clusters_arc: usize,
    pub warmup_done: bool,
    pub per_frame_micros_mean: f64,
}

fn effective_config(cli: &Cli) -> anyhow::Result<EngineConfig> {
    let mut cfg = match &cli.config {
        Some(path) => EngineConfig::load(path)?,
        None => EngineConfig::default(),
    };
    if let Some(mode) = cli.mode {
        cfg.mode = mode;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn create(path: &Path) -> anyhow::Result<BufWriter<File>> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    Ok(BufWriter::new(file))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> anyhow::Result<()> {
    let mut out = create(path)?;
    serde_json::to_writer_pretty(&mut out, value)?;
    out.write_all(b"\n")?;
    out.flush()?;
    Ok(())
}

fn load_checkpoint(path: &Path, model: &ToyDetector) -> anyhow::Result<ModelParams> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let (header, params) = read_checkpoint(BufReader::new(file))
        .with_context(|| format!("reading {}", path.display()))?;
    if header.param_count != model.param_count() {
        return Err(Error::Checkpoint(format!(
            "{} holds {} parameters, the configured model needs {}",
            path.display(),
            header.param_count,
            model.param_count()
        ))
        .into());
    }
    Ok(params)
}

/// Shared loop of `select` and `adapt`: feeds every frame of `stream` to
/// `engine`, logging decisions to `log` when given.
fn run_stream(
    engine: &mut Engine<'_, ToyDetector>,
    stream: &Path,
    mut log: Option<&mut dyn Write>,
) -> anyhow::Result<StreamRunSummary> {
    let mut summary = StreamRunSummary {
        mode: engine.mode(),
        frames: 0,
        keyframes_total: 0,
        keyframes_auf: 0,
        keyframes_arc: 0,
        updates: 0,
        clusters_auf: 0,
        clusters_arc: 0,
        warmup_done: false,
        per_frame_micros_mean: 0.0,
    };
    let mut elapsed = 0.0;
    for frame in open_stream(stream)? {
        let frame = frame.with_context(|| format!("reading {}", stream.display()))?;
        let start = Instant::now();
        let outcome = engine
            .process(&frame)
            .with_context(|| format!("{}: frame {}", stream.display(), frame.id))?;
        elapsed += start.elapsed().as_secs_f64();
        summary.frames += 1;
        if outcome.keyframe {
            summary.keyframes_total += 1;
        }
        match outcome.decision.map(|d| d.verdict) {
            Some(Verdict::Keyframe(Stage::Auf)) => summary.keyframes_auf += 1,
            Some(Verdict::Keyframe(Stage::Arc)) => summary.keyframes_arc += 1,
            _ => {}
        }
        if outcome.adapt.is_some_and(|a| a.labels_used > 0) {
            summary.updates += 1;
        }
        if let (Some(out), Some(decision)) = (log.as_deref_mut(), &outcome.decision) {
            serde_json::to_writer(&mut *out, &DecisionRecord::new(frame.id, decision))?;
            out.write_all(b"\n")?;
        }
    }
    summary.clusters_auf = engine.acquirer().auf_bank().len();
    summary.clusters_arc = engine.acquirer().arc_bank().len();
    summary.warmup_done = engine.warmup_done();
    if summary.frames > 0 {
        summary.per_frame_micros_mean = elapsed * 1e6 / summary.frames as f64;
    }
    Ok(summary)
}

fn bank_snapshot(engine: &Engine<'_, ToyDetector>) -> BankSnapshot {
    let acq = engine.acquirer();
    BankSnapshot {
        auf: acq.auf_bank().clone(),
        arc: acq.arc_bank().clone(),
        histogram: acq.histogram().counts().to_vec(),
        warmup_done: acq.warmup_done(),
    }
}

fn cmd_select(cfg: &EngineConfig, args: &SelectArgs) -> anyhow::Result<()> {
    if cfg.mode == Mode::NoAcquire {
        return Err(Error::config("mode", "select needs auf or auf_arc").into());
    }
    let model = ToyDetector::new(cfg.model.clone(), cfg.augment.clone())?;
    let source = match &args.checkpoint_in {
        Some(path) => load_checkpoint(path, &model)?,
        None => ModelParams::zeros(model.param_count()),
    };
    let mut engine = Engine::new(&model, source, cfg)?.select_only();
    let summary = match &args.log {
        Some(path) => {
            let mut out = create(path)?;
            let s = run_stream(&mut engine, &args.stream, Some(&mut out))?;
            out.flush()?;
            s
        }
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            run_stream(&mut engine, &args.stream, Some(&mut lock))?
        }
    };
    if let Some(path) = &args.bank_out {
        write_json(path, &bank_snapshot(&engine))?;
    }
    eprintln!(
        "{} keyframes of {} frames (auf {}, arc {})",
        summary.keyframes_total, summary.frames, summary.keyframes_auf, summary.keyframes_arc
    );
    Ok(())
}

fn cmd_adapt(cfg: &EngineConfig, args: &AdaptArgs) -> anyhow::Result<()> {
    let model = ToyDetector::new(cfg.model.clone(), cfg.augment.clone())?;
    let source = load_checkpoint(&args.checkpoint_in, &model)?;
    let mut engine = Engine::new(&model, source, cfg)?;
    let summary = run_stream(&mut engine, &args.stream, None)?;
    let finalized = engine.finalize()?;
    let header = CheckpointHeader {
        model_name: model.name().to_owned(),
        param_count: finalized.len(),
        alpha1: cfg.teacher.alpha1,
        alpha2: cfg.teacher.alpha2,
    };
    let mut out = create(&args.checkpoint_out)?;
    write_checkpoint(&mut out, &header, &finalized)?;
    if let Some(path) = &args.bank_out {
        write_json(path, &bank_snapshot(&engine))?;
    }
    match &args.report {
        Some(path) => write_json(path, &summary)?,
        None => println!("{}", serde_json::to_string_pretty(&summary)?),
    }
    eprintln!(
        "{} keyframes of {} frames, {} updates; wrote {}",
        summary.keyframes_total,
        summary.frames,
        summary.updates,
        args.checkpoint_out.display()
    );
    Ok(())
}

fn cmd_simulate(args: &SimulateArgs) -> anyhow::Result<()> {
    let spec = SimulationSpec::load(&args.spec)?;
    let ablation = ablation_compare(&spec, &args.seeds)?;
    let text = ablation.table.render();
    print!("{text}");
    if let Some(path) = &args.out_json {
        write_json(path, &ablation.table)?;
    }
    if let Some(path) = &args.out_text {
        std::fs::write(path, &text).map_err(|e| Error::io(path, e))?;
    }
    if let Some(path) = &args.runs_out {
        write_json(path, &ablation.runs)?;
    }
    Ok(())
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> anyhow::Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text)
        .map_err(|e| Error::Parse {
            line: e.line(),
            message: format!("{}: {e}", path.display()),
        })
        .map_err(Into::into)
}

fn describe_bank(name: &str, bank: &ClusterBank) {
    let members: u64 = bank.clusters().iter().map(|c| c.member_count).sum();
    println!(
        "{name}: {} clusters, {members} members, dimension {}",
        bank.len(),
        bank.dimension()
    );
    for (i, c) in bank.clusters().iter().enumerate() {
        println!("  #{i:<4} members {:>6}", c.member_count);
    }
}

fn cmd_report(args: &ReportArgs) -> anyhow::Result<()> {
    if let Some(path) = &args.banks {
        let snap: BankSnapshot = read_json(path)?;
        println!(
            "pseudo-label histogram {:?}, warm-up done: {}",
            snap.histogram, snap.warmup_done
        );
        describe_bank("auf", &snap.auf);
        describe_bank("arc", &snap.arc);
    } else if let Some(path) = &args.checkpoint {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let (header, params) = read_checkpoint(BufReader::new(file))?;
        let norm = params.0.iter().map(|v| v * v).sum::<f64>().sqrt();
        println!("{}", serde_json::to_string_pretty(&header)?);
        println!("parameter L2 norm {norm:.6}");
    } else if let Some(path) = &args.run {
        let value: serde_json::Value = read_json(path)?;
        if let Ok(report) = serde_json::from_value::<RunReport>(value.clone()) {
            println!("{}", serde_json::to_string_pretty(&report)?);
        } else {
            let summary: StreamRunSummary = serde_json::from_value(value)?;
            println!("{}", serde_json::to_string_pretty(&summary)?);
        }
    } else if let Some(path) = &args.table {
        let table: AblationTable = read_json(path)?;
        print!("{}", table.render());
    }
    Ok(())
}

/// Executes a parsed command line.
pub fn run(cli: &Cli) -> anyhow::Result<()> {
    let cfg = effective_config(cli)?;
    if cli.print_config {
        println!("{}", serde_json::to_string_pretty(&cfg)?);
        return Ok(());
    }
    match &cli.command {
        Command::Select(args) => cmd_select(&cfg, args),
        Command::Adapt(args) => cmd_adapt(&cfg, args),
        Command::Simulate(args) => cmd_simulate(args),
        Command::Report(args) => cmd_report(args),
    }
}

/// True when the error is a write to a closed pipe, e.g. output piped into
/// `head`. Treated as a normal end of output.
pub fn is_broken_pipe(err: &anyhow::Error) -> bool {
    use std::io::ErrorKind::BrokenPipe;
    err.chain().any(|e| {
        e.downcast_ref::<std::io::Error>()
            .is_some_and(|io| io.kind() == BrokenPipe)
            || e.downcast_ref::<serde_json::Error>()
                .is_some_and(|j| j.io_error_kind() == Some(BrokenPipe))
    })
}

/// Process exit code for an error returned by [`run`].
pub fn exit_code(err: &anyhow::Error) -> i32 {
    err.chain()
        .find_map(|e| e.downcast_ref::<Error>())
        .map(Error::exit_code)
        .unwrap_or(2)
}

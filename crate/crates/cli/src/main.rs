//! `csivitals` command-line front end.
//!
//! Exit codes: 0 on success, 1 on runtime errors, 2 on usage errors.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::atomic::AtomicBool;
use std::sync::Arc;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand, ValueEnum};
use csivitals::csi::{encode_frame, read_ground_truth_file, write_ground_truth, TraceReader};
use csivitals::pipeline::process_frames;
use csivitals::service::{write_atomic, IngestServer};
use csivitals::synth::{ground_truth, CfrGenerator, MultipathScene};
use csivitals::{Config, NightReport};

#[derive(Parser)]
#[command(name = "csivitals", version, about = "Breathing and motion sensing from WiFi CSI")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic trace and its ground-truth labels.
    Synth {
        #[arg(long)]
        scene: PathBuf,
        /// Duration in seconds.
        #[arg(long)]
        duration: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        labels: PathBuf,
        /// Frame rate in Hz.
        #[arg(long, default_value_t = 800.0)]
        rate: f64,
    },
    /// Process a recorded trace offline and write a night report.
    Replay {
        #[arg(long)]
        trace: PathBuf,
        #[arg(long)]
        gt: Option<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Config override, `key=value`; may be repeated.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
    },
    /// Accept live frames over TCP, one producer at a time.
    Ingest {
        #[arg(long)]
        listen: String,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
    },
    /// Print a stored night report as JSON or CSV.
    Report {
        #[arg(long)]
        night: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
        /// Table to print in CSV mode.
        #[arg(long, value_enum, default_value_t = Table::Minutes)]
        table: Table,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Clone, Copy, ValueEnum)]
enum Table {
    Minutes,
    Bpm,
    Events,
}

/// An error that maps to exit code 2.
#[derive(Debug)]
struct UsageError(String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn require_file(path: &Path, what: &str) -> anyhow::Result<()> {
    if !path.is_file() {
        return Err(UsageError(format!("{what} file not found: {}", path.display())).into());
    }
    Ok(())
}

fn load_config(path: Option<&Path>, set: &[String]) -> anyhow::Result<Config> {
    if let Some(p) = path {
        require_file(p, "config")?;
    }
    Ok(Config::load(path, std::env::vars(), set)?)
}

fn load_scene(path: &Path) -> anyhow::Result<MultipathScene> {
    require_file(path, "scene")?;
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let de = &mut serde_json::Deserializer::from_str(&text);
    let scene: MultipathScene = serde_path_to_error::deserialize(de).map_err(|e| {
        let inner = e.inner();
        anyhow::anyhow!(
            "{}: line {} column {}: field `{}`: {}",
            path.display(),
            inner.line(),
            inner.column(),
            e.path(),
            inner
        )
    })?;
    scene
        .validate()
        .with_context(|| format!("invalid scene {}", path.display()))?;
    Ok(scene)
}

fn synth(scene: &Path, duration: f64, seed: u64, out: &Path, labels: &Path, rate: f64) -> anyhow::Result<()> {
    let scene = load_scene(scene)?;
    let gen = CfrGenerator::new(&scene, duration, rate, seed)?;
    let n = gen.frame_count();
    let mut w = BufWriter::new(File::create(out).with_context(|| format!("creating {}", out.display()))?);
    for frame in gen {
        w.write_all(encode_frame(&frame).as_bytes())?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    let gt = ground_truth(&scene, duration);
    let lw = BufWriter::new(File::create(labels).with_context(|| format!("creating {}", labels.display()))?);
    write_ground_truth(lw, &gt)?;
    eprintln!("wrote {n} frames to {} and {} labels to {}", out.display(), gt.len(), labels.display());
    Ok(())
}

fn replay(trace: &Path, gt: Option<&Path>, cfg: &Config, out: &Path) -> anyhow::Result<()> {
    require_file(trace, "trace")?;
    let gt = match gt {
        Some(p) => {
            require_file(p, "ground-truth")?;
            Some(read_ground_truth_file(p)?)
        }
        None => None,
    };
    let reader = BufReader::new(File::open(trace)?);
    let report = process_frames(TraceReader::new(reader), cfg, gt.as_deref())
        .with_context(|| format!("processing {}", trace.display()))?;
    write_atomic(out, report.to_json().as_bytes())?;
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    eprintln!(
        "{} frames, {} epochs, {} bpm samples, {} motion events -> {}",
        report.frames,
        report.epochs,
        report.bpm_series.len(),
        report.motion_events.len(),
        out.display()
    );
    Ok(())
}

fn ingest(listen: &str, cfg: Config, out_dir: &Path) -> anyhow::Result<()> {
    let server = IngestServer::bind(listen, cfg, out_dir).with_context(|| format!("binding {listen}"))?;
    eprintln!("listening on {}", server.local_addr()?);
    server.serve(Arc::new(AtomicBool::new(false)))?;
    Ok(())
}

fn report(night: &Path, format: Format, table: Table) -> anyhow::Result<()> {
    require_file(night, "report")?;
    let file = BufReader::new(File::open(night)?);
    let de = &mut serde_json::Deserializer::from_reader(file);
    let r: NightReport = serde_path_to_error::deserialize(de)
        .map_err(|e| anyhow::anyhow!("{}: field `{}`: {}", night.display(), e.path(), e.inner()))?;
    let mut out = std::io::stdout().lock();
    match (format, table) {
        (Format::Json, _) => out.write_all(r.to_json().as_bytes())?,
        (Format::Csv, Table::Minutes) => out.write_all(r.minutes_csv().as_bytes())?,
        (Format::Csv, Table::Bpm) => {
            writeln!(out, "t,bpm,peaks,coverage")?;
            for s in &r.bpm_series {
                let bpm = s.bpm.map(|b| b.to_string()).unwrap_or_default();
                writeln!(out, "{},{},{},{}", s.t_s, bpm, s.peaks, s.coverage)?;
            }
        }
        (Format::Csv, Table::Events) => {
            writeln!(out, "start_s,end_s,micro_events,peak_mahalanobis")?;
            for e in &r.motion_events {
                writeln!(out, "{},{},{},{}", e.start_s, e.end_s, e.micro_event_count, e.peak_mahalanobis)?;
            }
        }
    }
    out.flush()?;
    Ok(())
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Synth {
            scene,
            duration,
            seed,
            out,
            labels,
            rate,
        } => {
            if !(duration.is_finite() && duration > 0.0) {
                bail!(UsageError(format!("--duration must be positive, got {duration}")));
            }
            synth(&scene, duration, seed, &out, &labels, rate)
        }
        Command::Replay {
            trace,
            gt,
            config,
            out,
            set,
        } => {
            let cfg = load_config(config.as_deref(), &set)?;
            replay(&trace, gt.as_deref(), &cfg, &out)
        }
        Command::Ingest {
            listen,
            config,
            out_dir,
            set,
        } => {
            let cfg = load_config(config.as_deref(), &set)?;
            ingest(&listen, cfg, &out_dir)
        }
        Command::Report { night, format, table } => report(&night, format, table),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.is::<UsageError>() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}

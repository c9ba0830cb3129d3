use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use gave_core::calibration::CalibrationSession;
use gave_core::estimator::EstimatorConfig;
use gave_core::menu::Catalog;
use gave_core::pipeline::PipelineConfig;
use gave_core::protocol::Control;
use gave_core::zone::AreaPreset;
use gave_service::{LandmarkSpec, Service, SessionConfig, SessionLog, SourceSpec, DEFAULT_PORT, PORT_ENV};
use gave_sim::{
    event_log_string, load_trace, replay, run_grid, write_csv, Condition, ReplayConfig, SyntheticUserModel, TraceLine,
};
use tracing_subscriber::EnvFilter;

#[derive(Parser)]
#[command(
    name = "gave",
    version,
    about = "Webcam gaze interaction: live service, replay and simulation"
)]
#[command(arg_required_else_help = true)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run the live event service.
    Serve(ServeArgs),
    /// Replay a ratio trace (or a session log) headlessly and print the event log.
    Replay(ReplayArgs),
    /// Run the simulated distance × dwell × area experiment grid and write CSV.
    Simulate(SimulateArgs),
    /// Run one-point calibration over a ratio trace and print the profile.
    CalibrateCheck(CalibrateArgs),
}

// ── Shared pipeline flags ───────────────────────────────────

#[derive(Args, Clone)]
struct PipelineArgs {
    /// Pipeline settings as JSON (any subset of the fields; the rest default).
    #[arg(long, value_name = "FILE")]
    pipeline_config: Option<PathBuf>,
    /// Menu catalog JSON.
    #[arg(long, value_name = "FILE")]
    catalog: Option<PathBuf>,
    /// Dwell threshold in milliseconds.
    #[arg(long)]
    dwell_ms: Option<u64>,
    /// Central-area preset: small, medium, large or pilot.
    #[arg(long, value_parser = parse_area)]
    area: Option<AreaPreset>,
    #[arg(long)]
    screen_width: Option<u32>,
    #[arg(long)]
    screen_height: Option<u32>,
}

impl PipelineArgs {
    fn resolve(&self) -> Result<ReplayConfig> {
        let mut pipeline: PipelineConfig = match &self.pipeline_config {
            Some(p) => read_json(p)?,
            None => PipelineConfig::default(),
        };
        if let Some(ms) = self.dwell_ms {
            pipeline.dwell.threshold_ms = ms;
        }
        if let Some(a) = self.area {
            pipeline.area = gave_core::zone::CentralArea::preset(a);
        }
        if let Some(w) = self.screen_width {
            pipeline.screen.width_px = w;
        }
        if let Some(h) = self.screen_height {
            pipeline.screen.height_px = h;
        }
        pipeline.validate().map_err(anyhow::Error::msg)?;
        let catalog = match &self.catalog {
            Some(p) => Catalog::load(p).with_context(|| format!("loading {}", p.display()))?,
            None => Catalog::default(),
        };
        Ok(ReplayConfig {
            pipeline,
            catalog,
            profile: None,
        })
    }
}

fn parse_area(s: &str) -> Result<AreaPreset, String> {
    serde_json::from_value(serde_json::Value::String(s.to_ascii_lowercase()))
        .map_err(|_| format!("unknown area preset {s:?} (small, medium, large, pilot)"))
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

// ── serve ───────────────────────────────────────────────────

#[derive(Args)]
#[command(group(clap::ArgGroup::new("source").required(true).args(["trace", "frames", "camera"])))]
struct ServeArgs {
    /// Ratio trace (JSONL) to stream.
    #[arg(long, value_name = "FILE")]
    trace: Option<PathBuf>,
    /// Frame directory (PGM files plus index.txt).
    #[arg(long, value_name = "DIR")]
    frames: Option<PathBuf>,
    /// Shell command writing raw 8-bit grayscale frames to stdout.
    #[arg(long, value_name = "CMD", requires_all = ["width", "height"])]
    camera: Option<String>,
    #[arg(long)]
    width: Option<u32>,
    #[arg(long)]
    height: Option<u32>,
    /// Recorded landmarks (JSONL), one record per frame.
    #[arg(long, value_name = "FILE", conflicts_with = "landmark_cmd")]
    landmarks: Option<PathBuf>,
    /// External landmark model speaking the stdio protocol.
    #[arg(long, value_name = "CMD")]
    landmark_cmd: Option<String>,
    #[command(flatten)]
    pipeline: PipelineArgs,
    /// Estimator settings as JSON (segmentation, margins, EAR threshold).
    #[arg(long, value_name = "FILE")]
    estimator_config: Option<PathBuf>,
    /// Flip frames horizontally before landmark detection.
    #[arg(long)]
    mirror: bool,
    /// Exchange the left and right landmark sets.
    #[arg(long)]
    swap_eyes: bool,
    #[arg(long, default_value = "127.0.0.1")]
    bind: String,
    #[arg(long, env = PORT_ENV, default_value_t = DEFAULT_PORT)]
    port: u16,
    /// Session log (JSONL) to write.
    #[arg(long, value_name = "FILE")]
    log: Option<PathBuf>,
    /// Hold the source until this many clients are connected.
    #[arg(long, default_value_t = 0)]
    wait_clients: usize,
    /// Exit once the source is exhausted.
    #[arg(long)]
    exit_on_end: bool,
    /// Pace recorded sources by their timestamps instead of as fast as possible.
    #[arg(long)]
    realtime: bool,
    /// Write per-frame filtered eye crops and pupil masks here.
    #[arg(long, value_name = "DIR")]
    debug_dump: Option<PathBuf>,
}

fn serve(a: ServeArgs) -> Result<()> {
    let source = match (a.trace, a.frames, a.camera) {
        (Some(path), _, _) => SourceSpec::RatioTrace { path },
        (_, Some(dir), _) => SourceSpec::FrameDir { dir },
        (_, _, Some(command)) => SourceSpec::Camera {
            command,
            width: a.width.unwrap_or_default(),
            height: a.height.unwrap_or_default(),
        },
        _ => bail!("no source given"),
    };
    let mut estimator: EstimatorConfig = match &a.estimator_config {
        Some(p) => read_json(p)?,
        None => EstimatorConfig::default(),
    };
    estimator.mirror |= a.mirror;
    estimator.swap_eyes |= a.swap_eyes;
    let mut cfg = SessionConfig::new(source);
    cfg.landmarks = match (a.landmarks, a.landmark_cmd) {
        (Some(path), _) => LandmarkSpec::Trace { path },
        (_, Some(command)) => LandmarkSpec::Process { command },
        _ => LandmarkSpec::Template,
    };
    cfg.replay = a.pipeline.resolve()?;
    cfg.estimator = estimator;
    cfg.bind = a.bind;
    cfg.port = a.port;
    cfg.log_path = a.log;
    cfg.wait_clients = a.wait_clients;
    cfg.exit_on_end = a.exit_on_end;
    cfg.realtime = a.realtime;
    cfg.debug_dump = a.debug_dump;

    let running = Service::start(cfg)?;
    let stopper = running.stop_handle();
    ctrlc::set_handler(move || stopper.stop()).context("installing the interrupt handler")?;
    eprintln!("listening on {}", running.local_addr());
    running.wait()?;
    Ok(())
}

// ── replay ──────────────────────────────────────────────────

#[derive(Args)]
struct ReplayArgs {
    /// Ratio trace, or a session log written by `serve --log`.
    input: PathBuf,
    #[command(flatten)]
    pipeline: PipelineArgs,
    /// Write the event log here instead of stdout.
    #[arg(long, short, value_name = "FILE")]
    out: Option<PathBuf>,
    /// For session logs: fail unless the replay reproduces the logged events.
    #[arg(long)]
    verify: bool,
}

fn is_session_log(path: &Path) -> Result<bool> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(text
        .lines()
        .find(|l| !l.trim().is_empty())
        .is_some_and(|l| l.trim_start().starts_with("{\"header\"")))
}

fn replay_cmd(a: ReplayArgs) -> Result<ExitCode> {
    let events = if is_session_log(&a.input)? {
        let log = SessionLog::load(&a.input)?;
        let events = log.replay()?;
        if a.verify && events != log.events {
            eprintln!(
                "replay diverges from the log ({} replayed, {} logged events)",
                events.len(),
                log.events.len()
            );
            return Ok(ExitCode::FAILURE);
        }
        events
    } else {
        if a.verify {
            bail!("--verify needs a session log");
        }
        let trace = load_trace(&a.input).with_context(|| format!("loading {}", a.input.display()))?;
        replay(&trace, &a.pipeline.resolve()?).map_err(anyhow::Error::msg)?
    };
    let mut out = output(a.out.as_deref())?;
    out.write_all(event_log_string(&events).as_bytes())?;
    out.flush()?;
    Ok(ExitCode::SUCCESS)
}

// ── simulate ────────────────────────────────────────────────

#[derive(Args)]
struct SimulateArgs {
    /// Trials per condition.
    #[arg(long, default_value_t = 200)]
    reps: usize,
    #[arg(long, default_value_t = 2024)]
    seed: u64,
    /// Restrict to one central-area preset.
    #[arg(long, value_parser = parse_area)]
    area: Option<AreaPreset>,
    /// Synthetic user model as JSON (reaction time, noise, blinks, overshoot).
    #[arg(long, value_name = "FILE")]
    model: Option<PathBuf>,
    /// Menu catalog JSON.
    #[arg(long, value_name = "FILE")]
    catalog: Option<PathBuf>,
    /// Write CSV here instead of stdout.
    #[arg(long, short, value_name = "FILE")]
    out: Option<PathBuf>,
}

fn simulate(a: SimulateArgs) -> Result<()> {
    let model: SyntheticUserModel = match &a.model {
        Some(p) => read_json(p)?,
        None => SyntheticUserModel::default(),
    };
    let catalog = match &a.catalog {
        Some(p) => Catalog::load(p).with_context(|| format!("loading {}", p.display()))?,
        None => Catalog::default(),
    };
    let grid: Vec<Condition> = Condition::full_grid()
        .into_iter()
        .filter(|c| a.area.is_none_or(|area| c.area == area))
        .collect();
    let rows = run_grid(&grid, a.reps, &model, &catalog, a.seed)?;
    let mut out = output(a.out.as_deref())?;
    write_csv(&rows, &mut out)?;
    out.flush()?;
    Ok(())
}

// ── calibrate-check ─────────────────────────────────────────

#[derive(Args)]
struct CalibrateArgs {
    /// Ratio trace; the window opens at the first sample after the first
    /// `start_calibration` control, or at the first sample if there is none.
    trace: PathBuf,
    #[command(flatten)]
    pipeline: PipelineArgs,
}

fn calibrate_check(a: CalibrateArgs) -> Result<ExitCode> {
    let trace = load_trace(&a.trace).with_context(|| format!("loading {}", a.trace.display()))?;
    let cfg = a.pipeline.resolve()?.pipeline;
    let has_start = trace
        .iter()
        .any(|l| matches!(l, TraceLine::Control(Control::StartCalibration {})));
    let mut session = CalibrationSession::new(cfg.calibration, cfg.bounds);
    let mut open = !has_start;
    for line in &trace {
        match line {
            TraceLine::Control(Control::StartCalibration {}) => open = true,
            TraceLine::Control(_) => {}
            TraceLine::Sample(s) if open => match session.push(s.observation()) {
                Some(Ok(profile)) => {
                    println!("{}", serde_json::to_string_pretty(&profile)?);
                    return Ok(ExitCode::SUCCESS);
                }
                Some(Err(e)) => {
                    eprintln!("calibration failed: {e}");
                    return Ok(ExitCode::FAILURE);
                }
                None => {}
            },
            TraceLine::Sample(_) => {}
        }
    }
    eprintln!("calibration failed: trace ended before the window closed");
    Ok(ExitCode::FAILURE)
}

// ── main ────────────────────────────────────────────────────

fn main() -> ExitCode {
    let cli = Cli::parse();
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_env("GAVE_LOG").unwrap_or_else(|_| EnvFilter::new("info")))
        .with_writer(io::stderr)
        .init();
    let result = match cli.command {
        Cmd::Serve(a) => serve(a).map(|_| ExitCode::SUCCESS),
        Cmd::Replay(a) => replay_cmd(a),
        Cmd::Simulate(a) => simulate(a).map(|_| ExitCode::SUCCESS),
        Cmd::CalibrateCheck(a) => calibrate_check(a),
    };
    result.unwrap_or_else(|e| {
        eprintln!("error: {e:#}");
        ExitCode::FAILURE
    })
}

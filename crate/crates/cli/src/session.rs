use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::Args;
use shadowdrive::error::ReplayError;
use shadowdrive::session::{write_log, Session, SessionLog, SessionPhase};
use shadowdrive::stream::{
    read_replay, serve_session, synthesize_with, write_replay, EventKind, FrameSource, Profile, ServeConfig, SynthOptions,
};
use shadowdrive::Anthropometry;

use crate::settings::{load_config, load_setup};
use crate::SettingsArgs;

/// Exit status of a replay that ended before the block finished.
const EXIT_ABORTED: u8 = 2;

#[derive(Args)]
pub struct ReplayArgs {
    /// Replay file (`SKSTREAM 1 sk14 mm ms`).
    file: PathBuf,
    /// Session log path; defaults to the replay path with a `.log` extension.
    #[arg(long)]
    log: Option<PathBuf>,
}

#[derive(Args)]
pub struct ServeArgs {
    /// Serve a replay file instead of listening for a live feed.
    #[arg(long)]
    replay: Option<PathBuf>,
    /// Pace replay frames by their timestamps.
    #[arg(long)]
    realtime: bool,
    /// Hold frames until this many telemetry subscribers are connected.
    #[arg(long, default_value_t = 0)]
    min_subscribers: usize,
    /// Directory for `session-<id>.log` files.
    #[arg(long)]
    log_dir: Option<PathBuf>,
    /// Do not open the websocket endpoint.
    #[arg(long)]
    no_ws: bool,
}

#[derive(Args)]
pub struct SynthesizeArgs {
    /// perfect, miss-set:<balls>, posture-error:<marker> or per-run:<sets>.
    #[arg(long, default_value = "perfect")]
    profile: Profile,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Player height in meters.
    #[arg(long, default_value_t = 1.40)]
    height: f64,
    /// Player arm length in meters.
    #[arg(long, default_value_t = 0.55)]
    arm_length: f64,
    /// Pad with rest frames to at least this duration.
    #[arg(long, default_value_t = 0)]
    min_duration_ms: u64,
    /// Output replay file.
    #[arg(long)]
    out: PathBuf,
}

/// One-line outcome: `score 100 ×10, tier: excellent performance`.
pub fn summary(log: &SessionLog) -> String {
    let scores: Vec<u32> = log.runs().map(|r| r.score).collect();
    let runs = match scores.as_slice() {
        [] => "no runs".to_string(),
        [first, ..] if scores.iter().all(|s| s == first) => format!("score {first} ×{}", scores.len()),
        _ => format!("scores {}", scores.iter().map(u32::to_string).collect::<Vec<_>>().join(" ")),
    };
    match log.tier() {
        Some((tier, _)) => format!("{runs}, tier: {}", tier.phrase()),
        None => format!("{runs}, aborted: {}", abort_reason(log).unwrap_or("unknown")),
    }
}

pub fn abort_reason(log: &SessionLog) -> Option<&'static str> {
    log.events()
        .filter_map(|e| match e.kind {
            EventKind::SessionPhase { phase: SessionPhase::Aborted(r), .. } => Some(r.slug()),
            _ => None,
        })
        .last()
}

pub fn replay(settings: &SettingsArgs, args: ReplayArgs) -> Result<ExitCode> {
    let config = load_config(settings)?;
    let setup = load_setup(&config)?;
    let file = File::open(&args.file).with_context(|| format!("opening {}", args.file.display()))?;
    let frames = read_replay(BufReader::new(file)).with_context(|| format!("in {}", args.file.display()))?;

    let mut session = Session::new(1, setup);
    let mut io_error = None;
    for item in frames {
        match item {
            Ok(frame) => {
                if session.step(&frame).is_err() || session.phase().is_terminal() {
                    break;
                }
            }
            Err(ReplayError::Io(e)) => {
                io_error = Some(e);
                break;
            }
            Err(e) => {
                eprintln!("warning: {}: {e}; input ends here", args.file.display());
                break;
            }
        }
    }
    session.end_of_stream();
    let phase = session.phase();
    let log = session.into_log();

    let log_path = args.log.unwrap_or_else(|| args.file.with_extension("log"));
    let mut sink = BufWriter::new(File::create(&log_path).with_context(|| format!("creating {}", log_path.display()))?);
    write_log(&log, &mut sink)?;
    sink.flush()?;
    if let Some(e) = io_error {
        return Err(e).with_context(|| format!("reading {}", args.file.display()));
    }
    println!("{}", summary(&log));
    println!("log: {}", log_path.display());
    Ok(match phase {
        SessionPhase::Complete => ExitCode::SUCCESS,
        _ => ExitCode::from(EXIT_ABORTED),
    })
}

pub fn serve(settings: &SettingsArgs, args: ServeArgs) -> Result<ExitCode> {
    let config = load_config(settings)?;
    let setup = load_setup(&config)?;
    let source = match &args.replay {
        Some(path) => {
            let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
            let frames = read_replay(BufReader::new(file)).with_context(|| format!("in {}", path.display()))?;
            FrameSource::Replay(Box::new(frames))
        }
        None => FrameSource::Listen(config.feed_addr.clone()),
    };
    let mut serve_config = ServeConfig::new(source, config.telemetry_addr.clone());
    serve_config.ws_addr = (!args.no_ws).then(|| config.ws_addr.clone());
    serve_config.subscriber_buffer = config.subscriber_buffer;
    serve_config.min_subscribers = args.min_subscribers;
    serve_config.log_dir = args.log_dir.clone();
    serve_config.realtime = args.realtime;

    let handle = serve_session(setup, serve_config)?;
    let signal = handle.shutdown_signal();
    ctrlc::set_handler(move || signal.shutdown()).context("installing the interrupt handler")?;
    if let Some(addr) = handle.feed_addr() {
        println!("feed {addr}");
    }
    println!("telemetry {}", handle.telemetry_addr());
    if let Some(addr) = handle.ws_addr() {
        println!("websocket {addr}");
    }
    std::io::stdout().flush()?;

    let report = handle.join();
    for warning in &report.warnings {
        eprintln!("warning: {warning}");
    }
    for log in &report.logs {
        let id = log.header_value("session_id").unwrap_or("?");
        println!("session {id}: {}", summary(log));
    }
    if report.dropped_subscribers > 0 {
        println!("dropped subscribers: {}", report.dropped_subscribers);
    }
    Ok(ExitCode::SUCCESS)
}

pub fn synthesize(settings: &SettingsArgs, args: SynthesizeArgs) -> Result<ExitCode> {
    let config = load_config(settings)?;
    let setup = load_setup(&config)?;
    let player = Anthropometry::new(args.height, args.arm_length)?;
    let options = SynthOptions { setup, min_duration_ms: args.min_duration_ms };
    let frames = synthesize_with(&args.profile, player, args.seed, &options)?;
    let file = File::create(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    let count = write_replay(&frames, BufWriter::new(file))?;
    println!("wrote {count} frames ({}) to {}", args.profile, args.out.display());
    Ok(ExitCode::SUCCESS)
}

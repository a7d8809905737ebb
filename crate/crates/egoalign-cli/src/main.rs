//! Command-line frontend: session scanning and validation, clock fitting
//! from anchor files, aligned-dataset export, and synthetic session
//! generation.
//!
//! Exit codes: 0 success with no validation errors, 1 validation errors or
//! an empty alignment overlap, 2 usage or input-parse failure, 3 I/O
//! failure.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use egoalign::model::{
    builtin_profiles, merge_sessions, scan_session, validate_session, ScanError, Session, Severity,
    StreamRole, ValidationReport,
};
use egoalign::poseio;
use egoalign::sync::{fit_clock, group_by_stream, parse_anchor_csv, ClockModel, FitMode};
use egoalign::synth::{generate_session, Scenario};
use egoalign::timeline::{build_timeline, TimelineError};

const EXIT_OK: u8 = 0;
const EXIT_FINDINGS: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_IO: u8 = 3;

#[derive(Parser)]
#[command(
    name = "egoalign",
    about = "Validate and temporally align multi-camera capture sessions",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Scan a session folder and list its streams.
    Scan(ScanArgs),
    /// Validate a session folder against its log and an optional profile.
    Validate(ValidateArgs),
    /// Fit per-stream clock corrections from an anchor CSV.
    Sync(SyncArgs),
    /// Align one or more sessions onto a uniform tick grid and export it.
    Align(AlignArgs),
    /// Generate a synthetic session with known ground truth.
    Gen(GenArgs),
}

#[derive(Args)]
struct ScanArgs {
    /// Session folder.
    dir: PathBuf,
    /// Emit one JSON object per stream instead of a table.
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct ValidateArgs {
    /// Session folder.
    dir: PathBuf,
    /// Device profile id to check rates and tracking against.
    #[arg(long)]
    profile: Option<String>,
    /// Allowed relative deviation of effective frame rates.
    #[arg(long, default_value_t = 0.10)]
    fps_tolerance: f64,
    /// Emit one JSON object per finding instead of a table.
    #[arg(long)]
    json: bool,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum SyncMode {
    Offset,
    Drift,
}

#[derive(Args)]
struct SyncArgs {
    /// Anchor CSV with header `stream,ts_ms,ref_ms`.
    #[arg(long)]
    anchors: PathBuf,
    /// Fit offset only, or offset plus linear drift.
    #[arg(long, value_enum, default_value_t = SyncMode::Offset)]
    mode: SyncMode,
    /// Emit one JSON object per stream instead of a table.
    #[arg(long)]
    json: bool,
    /// Write the fitted models to a clocks.json file.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct AlignArgs {
    /// Session folders; several folders are merged with session-id prefixes.
    #[arg(required = true)]
    dirs: Vec<PathBuf>,
    /// clocks.json with per-stream corrections; identity when absent.
    #[arg(long)]
    clocks: Option<PathBuf>,
    /// Target tick rate in Hz; defaults to the slowest video stream rate.
    #[arg(long)]
    rate: Option<f64>,
    /// Output folder for alignment.jsonl and poses_resampled.txt.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Role override `stream=ego|wrist|poses` (repeatable). Stream names
    /// are session-id-prefixed when several folders are aligned.
    #[arg(long = "role", value_name = "STREAM=ROLE")]
    roles: Vec<String>,
}

#[derive(Args)]
struct GenArgs {
    /// Device profile id (see `builtin profiles` in the README).
    #[arg(long)]
    device: String,
    /// Session length in seconds.
    #[arg(long, default_value_t = 10.0)]
    duration: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// True clock offset in milliseconds applied to every stream.
    #[arg(long, default_value_t = 0.0)]
    offset: f64,
    /// True clock drift in ppm applied to every stream.
    #[arg(long, default_value_t = 0.0)]
    drift: f64,
    /// Gaussian timestamp jitter sigma in milliseconds.
    #[arg(long, default_value_t = 0.0)]
    jitter: f64,
    /// Interior frame drop probability.
    #[arg(long, default_value_t = 0.0)]
    drop: f64,
    /// Anchor observations per stream.
    #[arg(long, default_value_t = 5)]
    anchors: u32,
    /// Skip the ego stream (wrist-only companion folder).
    #[arg(long)]
    no_ego: bool,
    /// Number of wrist cameras; defaults to the profile maximum.
    #[arg(long)]
    wrist_cameras: Option<u8>,
    /// Output session folder.
    #[arg(long)]
    out: PathBuf,
}

/// clocks.json entry: `stream_id -> {offset_ms, drift_ppm, t0_ms}`.
#[derive(Serialize, Deserialize)]
struct ClockEntry {
    offset_ms: f64,
    drift_ppm: f64,
    t0_ms: f64,
}

#[derive(Serialize)]
struct AlignmentRow<'a> {
    tick_index: u64,
    t_ref_ms: f64,
    streams: &'a BTreeMap<String, egoalign::timeline::TickStream>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Scan(args) => cmd_scan(&args),
        Command::Validate(args) => cmd_validate(&args),
        Command::Sync(args) => cmd_sync(&args),
        Command::Align(args) => cmd_align(&args),
        Command::Gen(args) => cmd_gen(&args),
    };
    match code {
        Ok(code) => ExitCode::from(code),
        Err((code, message)) => {
            eprintln!("error: {message}");
            ExitCode::from(code)
        }
    }
}

type CmdResult = Result<u8, (u8, String)>;

fn scan_dir(dir: &Path) -> Result<Session, (u8, String)> {
    scan_session(dir).map_err(|e| match e {
        ScanError::Log(parse) => (EXIT_USAGE, format!("{}: {parse}", dir.display())),
        other => (EXIT_IO, other.to_string()),
    })
}

fn cmd_scan(args: &ScanArgs) -> CmdResult {
    let session = scan_dir(&args.dir)?;
    if args.json {
        for stream in &session.log.streams {
            let mut value = serde_json::to_value(stream).unwrap();
            value["session_id"] = session.session_id().into();
            println!("{value}");
        }
    } else {
        println!(
            "session {} ({} streams{})",
            session.session_id(),
            session.log.streams.len(),
            if session.pose_track.is_some() {
                ", pose track"
            } else {
                ""
            }
        );
        println!(
            "{:<18} {:<16} {:>6} {:>8} {:>14} {:>14} {:>9}",
            "file", "source", "role", "frames", "first_ms", "last_ms", "fps"
        );
        for stream in &session.log.streams {
            println!(
                "{:<18} {:<16} {:>6} {:>8} {:>14} {:>14} {:>9}",
                stream.file_name,
                stream.source_label,
                stream.role.to_string(),
                stream.total_frames,
                stream.first_ts_ms,
                stream.last_ts_ms,
                stream
                    .effective_fps()
                    .map_or("-".to_owned(), |f| format!("{f:.2}")),
            );
        }
    }
    Ok(EXIT_OK)
}

fn print_report(report: &ValidationReport, json: bool) {
    if json {
        for finding in &report.findings {
            println!("{}", serde_json::to_string(finding).unwrap());
        }
    } else {
        for finding in &report.findings {
            println!(
                "{:<7} {:<19} {:<18} {}",
                finding.severity.to_string(),
                finding.code.to_string(),
                finding.stream.as_deref().unwrap_or("-"),
                finding.message
            );
        }
        println!(
            "{} error(s), {} warning(s), {} info",
            report.count(Severity::Error),
            report.count(Severity::Warning),
            report.count(Severity::Info)
        );
    }
}

fn cmd_validate(args: &ValidateArgs) -> CmdResult {
    let profiles = builtin_profiles();
    let profile = match &args.profile {
        Some(id) => Some(profiles.get(id).ok_or_else(|| {
            (
                EXIT_USAGE,
                format!(
                    "unknown profile {id:?}; known: {:?}",
                    profiles.keys().collect::<Vec<_>>()
                ),
            )
        })?),
        None => None,
    };
    let session = scan_dir(&args.dir)?;
    let report = validate_session(&session, profile, args.fps_tolerance);
    print_report(&report, args.json);
    Ok(if report.has_errors() {
        EXIT_FINDINGS
    } else {
        EXIT_OK
    })
}

fn cmd_sync(args: &SyncArgs) -> CmdResult {
    let text = std::fs::read_to_string(&args.anchors)
        .map_err(|e| (EXIT_IO, format!("{}: {e}", args.anchors.display())))?;
    let anchors = parse_anchor_csv(&text).map_err(|e| (EXIT_USAGE, e.to_string()))?;
    let mode = match args.mode {
        SyncMode::Offset => FitMode::OffsetOnly,
        SyncMode::Drift => FitMode::OffsetDrift,
    };

    let mut clocks: BTreeMap<String, ClockEntry> = BTreeMap::new();
    let mut failed = false;
    for (stream, stream_anchors) in group_by_stream(&anchors) {
        if stream_anchors.len() < 3 {
            eprintln!(
                "note: stream {stream} has only {} anchor(s); fits are fragile below 3",
                stream_anchors.len()
            );
        }
        match fit_clock(&stream_anchors, mode) {
            Ok((model, stats)) => {
                if args.json {
                    println!(
                        "{}",
                        serde_json::json!({
                            "stream": stream,
                            "offset_ms": model.offset_ms,
                            "drift_ppm": model.drift_ppm,
                            "t0_ms": model.t0_ms,
                            "anchors": stats.count,
                            "rms_ms": stats.rms_ms,
                            "max_abs_ms": stats.max_abs_ms,
                        })
                    );
                } else {
                    println!(
                        "{stream}: offset {:.3} ms, drift {:.3} ppm ({} anchors, rms {:.3} ms, max {:.3} ms)",
                        model.offset_ms, model.drift_ppm, stats.count, stats.rms_ms, stats.max_abs_ms
                    );
                }
                clocks.insert(
                    stream,
                    ClockEntry {
                        offset_ms: model.offset_ms,
                        drift_ppm: model.drift_ppm,
                        t0_ms: model.t0_ms,
                    },
                );
            }
            Err(e) => {
                eprintln!("error: stream {stream}: {e}");
                failed = true;
            }
        }
    }

    if let Some(path) = &args.out {
        let json = serde_json::to_string_pretty(&clocks).unwrap();
        std::fs::write(path, json).map_err(|e| (EXIT_IO, format!("{}: {e}", path.display())))?;
    }
    Ok(if failed { EXIT_FINDINGS } else { EXIT_OK })
}

fn parse_role_overrides(specs: &[String]) -> Result<BTreeMap<String, StreamRole>, (u8, String)> {
    let mut map = BTreeMap::new();
    for spec in specs {
        let (stream, role) = spec.split_once('=').ok_or_else(|| {
            (
                EXIT_USAGE,
                format!("--role expects STREAM=ROLE, got {spec:?}"),
            )
        })?;
        let role = match role {
            "ego" => StreamRole::Ego,
            "wrist" => StreamRole::Wrist,
            "poses" => StreamRole::Poses,
            other => {
                return Err((
                    EXIT_USAGE,
                    format!("unknown role {other:?}; expected ego, wrist, or poses"),
                ))
            }
        };
        map.insert(stream.to_owned(), role);
    }
    Ok(map)
}

fn load_clocks(path: &Path) -> Result<BTreeMap<String, ClockModel>, (u8, String)> {
    let text =
        std::fs::read_to_string(path).map_err(|e| (EXIT_IO, format!("{}: {e}", path.display())))?;
    let entries: BTreeMap<String, ClockEntry> = serde_json::from_str(&text)
        .map_err(|e| (EXIT_USAGE, format!("{}: {e}", path.display())))?;
    Ok(entries
        .into_iter()
        .map(|(stream_id, entry)| {
            let model = ClockModel {
                stream_id: stream_id.clone(),
                offset_ms: entry.offset_ms,
                drift_ppm: entry.drift_ppm,
                t0_ms: entry.t0_ms,
            };
            (stream_id, model)
        })
        .collect())
}

fn cmd_align(args: &AlignArgs) -> CmdResult {
    let roles = parse_role_overrides(&args.roles)?;
    let mut sessions = Vec::new();
    for dir in &args.dirs {
        sessions.push(scan_dir(dir)?);
    }
    let session = if sessions.len() == 1 {
        let mut session = sessions.pop().unwrap();
        for stream in &mut session.log.streams {
            if let Some(role) = roles.get(&stream.file_name) {
                stream.role = *role;
            }
        }
        session
    } else {
        merge_sessions(&sessions, &roles).map_err(|e| (EXIT_USAGE, e.to_string()))?
    };

    let clocks = match &args.clocks {
        Some(path) => load_clocks(path)?,
        None => BTreeMap::new(),
    };

    let rate = match args.rate {
        Some(rate) if rate > 0.0 => rate,
        Some(rate) => return Err((EXIT_USAGE, format!("--rate must be positive, got {rate}"))),
        None => {
            // Downsample-only default: the slowest effective video rate.
            let slowest = session
                .log
                .streams
                .iter()
                .filter(|s| s.role != StreamRole::Poses)
                .filter_map(|s| s.effective_fps())
                .fold(f64::INFINITY, f64::min);
            if !slowest.is_finite() {
                return Err((
                    EXIT_USAGE,
                    "no video stream has a usable rate; pass --rate".to_owned(),
                ));
            }
            slowest
        }
    };

    let timeline = build_timeline(&session, &clocks, rate).map_err(|e| match e {
        TimelineError::EmptyOverlap { .. } => (EXIT_FINDINGS, e.to_string()),
        other => (EXIT_USAGE, other.to_string()),
    })?;

    let (start, end) = timeline.window;
    println!(
        "window {start:.3}..{end:.3} ms ({:.0} ms), {} ticks at {rate} Hz",
        end - start,
        timeline.tick_count()
    );

    if let Some(out_dir) = &args.out {
        std::fs::create_dir_all(out_dir)
            .map_err(|e| (EXIT_IO, format!("{}: {e}", out_dir.display())))?;
        let mut jsonl = String::new();
        for tick in &timeline.ticks {
            let row = AlignmentRow {
                tick_index: tick.tick_index,
                t_ref_ms: tick.t_ref_ms,
                streams: &tick.streams,
            };
            jsonl.push_str(&serde_json::to_string(&row).unwrap());
            jsonl.push('\n');
        }
        let path = out_dir.join("alignment.jsonl");
        std::fs::write(&path, jsonl).map_err(|e| (EXIT_IO, format!("{}: {e}", path.display())))?;
        println!("wrote {}", path.display());

        if let Some(track) = &timeline.resampled_poses {
            let path = out_dir.join("poses_resampled.txt");
            let text = poseio::serialize_pose_file(track)
                .map_err(|e| (EXIT_USAGE, format!("resampled poses: {e}")))?;
            std::fs::write(&path, text)
                .map_err(|e| (EXIT_IO, format!("{}: {e}", path.display())))?;
            println!("wrote {}", path.display());
        }
    }
    Ok(EXIT_OK)
}

fn cmd_gen(args: &GenArgs) -> CmdResult {
    let mut scenario =
        Scenario::new(&args.device, args.duration, args.seed).with_clock(args.offset, args.drift);
    scenario.timestamp_jitter_sigma_ms = args.jitter;
    scenario.frame_drop_prob = args.drop;
    scenario.anchor_count = args.anchors;
    scenario.ego = !args.no_ego;
    scenario.wrist_cameras = args.wrist_cameras;

    let truth = generate_session(&scenario, &args.out).map_err(|e| match e {
        egoalign::synth::SynthError::UnknownProfile(_)
        | egoalign::synth::SynthError::InvalidScenario(_) => (EXIT_USAGE, e.to_string()),
        other => (EXIT_IO, other.to_string()),
    })?;

    println!(
        "generated session {} ({}) in {}",
        truth.session_id,
        truth.profile_id,
        args.out.display()
    );
    for (name, stream) in &truth.streams {
        println!(
            "  {name}: {} frames, offset {:.3} ms, drift {:.3} ppm",
            stream.frame_ts_device_ms.len(),
            stream.clock.offset_ms,
            stream.clock.drift_ppm
        );
    }
    println!(
        "  anchors: {} (anchors.csv), ground truth: ground_truth.json",
        truth.anchors.len()
    );
    Ok(EXIT_OK)
}

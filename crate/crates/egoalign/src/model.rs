//! Shared domain types, the built-in device-profile registry, session
//! discovery, whole-session validation, and cross-folder merging.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::logparse;
use crate::mp4probe::{self, Mp4Meta};
use crate::poseio::{self, PoseTrack};

/// Container format of a recorded video stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VideoFormat {
    Mp4,
    Mov,
    Vrs,
}

impl VideoFormat {
    pub fn extension(self) -> &'static str {
        match self {
            VideoFormat::Mp4 => "mp4",
            VideoFormat::Mov => "mov",
            VideoFormat::Vrs => "vrs",
        }
    }
}

/// Whether a host device can record head or hand tracking on its own.
///
/// `Manual` means the signal can only be reconstructed after the fact
/// (no on-device tracking at capture time).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrackingSupport {
    Supported,
    Unsupported,
    Manual,
}

/// Expected stream characteristics for one host setup.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceProfile {
    pub device_id: String,
    pub ego_format: VideoFormat,
    pub ego_resolution: (u32, u32),
    pub ego_fps: f64,
    pub ego_bitrate_mbps: f64,
    pub wrist_format: VideoFormat,
    pub wrist_resolution: (u32, u32),
    pub wrist_fps: f64,
    pub wrist_bitrate_mbps: f64,
    pub head_tracking: TrackingSupport,
    pub hand_tracking: TrackingSupport,
    pub max_wrist_cameras: u8,
}

impl DeviceProfile {
    /// Expected frame rate for a stream of the given role. Pose streams are
    /// sampled at the host main-loop rate, which tracks the ego view rate.
    pub fn expected_fps(&self, role: StreamRole) -> f64 {
        match role {
            StreamRole::Ego | StreamRole::Poses => self.ego_fps,
            StreamRole::Wrist => self.wrist_fps,
        }
    }
}

/// Role a stream plays in a session, derived from its `Source:` label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StreamRole {
    Ego,
    Wrist,
    Poses,
}

impl StreamRole {
    /// `Internal Camera` records the ego view, `USB Camera N` a wrist view,
    /// `Poses` the tracking log. Anything else defaults to wrist; validation
    /// flags the unknown label.
    pub fn from_source_label(label: &str) -> StreamRole {
        if label == "Internal Camera" {
            StreamRole::Ego
        } else if label == "Poses" {
            StreamRole::Poses
        } else {
            StreamRole::Wrist
        }
    }

    /// True when `from_source_label` had to fall back to the wrist default.
    pub fn label_is_known(label: &str) -> bool {
        label == "Internal Camera" || label == "Poses" || label.starts_with("USB Camera")
    }
}

impl fmt::Display for StreamRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StreamRole::Ego => write!(f, "ego"),
            StreamRole::Wrist => write!(f, "wrist"),
            StreamRole::Poses => write!(f, "poses"),
        }
    }
}

/// One stream block from a session log.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StreamMeta {
    pub file_name: String,
    /// Verbatim `Source:` value, e.g. "Internal Camera".
    pub source_label: String,
    pub role: StreamRole,
    pub total_frames: u64,
    pub first_ts_ms: i64,
    pub last_ts_ms: i64,
    pub duration_ms: i64,
    /// Unrecognized `Key: value` lines, preserved for re-serialization.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub extras: Vec<(String, String)>,
}

impl StreamMeta {
    /// Effective frame rate implied by the declared fields. The first and
    /// last timestamps span `total_frames - 1` intervals. `None` when the
    /// stream has fewer than two frames or a non-positive duration.
    pub fn effective_fps(&self) -> Option<f64> {
        if self.total_frames < 2 || self.duration_ms <= 0 {
            return None;
        }
        Some((self.total_frames - 1) as f64 * 1000.0 / self.duration_ms as f64)
    }
}

/// Which `log.txt` dialect a session was written in.
///
/// `Extended` adds `Started:`/`Ended:` wall-clock lines and spells the
/// timestamp keys with a `(unix ms)` suffix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SessionDialect {
    Basic,
    Extended,
}

/// Parsed contents of a session `log.txt`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionLog {
    /// Identifier of shape `yyyyMMdd_HHmmss`.
    pub session_id: String,
    pub dialect: SessionDialect,
    /// Wall-clock strings kept verbatim; no time-zone interpretation.
    pub started_wallclock: Option<String>,
    pub ended_wallclock: Option<String>,
    pub streams: Vec<StreamMeta>,
}

impl SessionLog {
    pub fn stream(&self, file_name: &str) -> Option<&StreamMeta> {
        self.streams.iter().find(|s| s.file_name == file_name)
    }
}

/// True when `id` has the `yyyyMMdd_HHmmss` shape and parses as a calendar
/// timestamp.
pub fn session_id_is_timestamp(id: &str) -> bool {
    let bytes = id.as_bytes();
    if bytes.len() != 15 || bytes[8] != b'_' {
        return false;
    }
    if !id[..8].bytes().all(|b| b.is_ascii_digit()) || !id[9..].bytes().all(|b| b.is_ascii_digit())
    {
        return false;
    }
    let num = |s: &str| s.parse::<u32>().unwrap();
    let (year, month, day) = (num(&id[..4]), num(&id[4..6]), num(&id[6..8]));
    let (hh, mm, ss) = (num(&id[9..11]), num(&id[11..13]), num(&id[13..15]));
    if !(1..=12).contains(&month) || day == 0 || hh > 23 || mm > 59 || ss > 59 {
        return false;
    }
    let leap = year % 4 == 0 && (year % 100 != 0 || year % 400 == 0);
    let days_in_month = match month {
        1 | 3 | 5 | 7 | 8 | 10 | 12 => 31,
        4 | 6 | 9 | 11 => 30,
        _ => {
            if leap {
                29
            } else {
                28
            }
        }
    };
    day <= days_in_month
}

/// A discovered session: parsed log plus whatever sidecar data was readable.
#[derive(Debug, Clone)]
pub struct Session {
    pub root_path: PathBuf,
    /// Final path component of `root_path`, when it has one.
    pub folder_name: Option<String>,
    pub log: SessionLog,
    pub pose_track: Option<PoseTrack>,
    /// Container metadata per probed file name.
    pub mp4_meta: BTreeMap<String, Mp4Meta>,
    /// Optional profile binding; `validate_session` may override it.
    pub profile: Option<DeviceProfile>,
    /// Origin session id per stream file name (differs per stream after a
    /// merge).
    pub origins: BTreeMap<String, String>,
    /// Root directory per origin session id, for file-existence checks on
    /// merged sessions.
    pub roots: BTreeMap<String, PathBuf>,
    /// Findings recorded while scanning (probe or pose parse failures).
    pub scan_findings: Vec<Finding>,
}

impl Session {
    /// Effective session id. The folder name wins over the log header when
    /// it is itself a valid timestamp id; ad-hoc folder names defer to the
    /// header.
    pub fn session_id(&self) -> &str {
        match &self.folder_name {
            Some(name) if session_id_is_timestamp(name) => name,
            _ => &self.log.session_id,
        }
    }

    /// Absolute path of a stream's backing file, resolving merged-stream
    /// prefixes through the origin map.
    pub fn stream_path(&self, file_name: &str) -> PathBuf {
        let bare = file_name.rsplit_once('/').map_or(file_name, |(_, b)| b);
        match self
            .origins
            .get(file_name)
            .and_then(|id| self.roots.get(id))
        {
            Some(root) => root.join(bare),
            None => self.root_path.join(bare),
        }
    }

    pub fn with_profile(mut self, profile: DeviceProfile) -> Session {
        self.profile = Some(profile);
        self
    }
}

/// Severity of a validation finding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Error,
    Warning,
    Info,
}

impl fmt::Display for Severity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Severity::Error => write!(f, "error"),
            Severity::Warning => write!(f, "warning"),
            Severity::Info => write!(f, "info"),
        }
    }
}

/// Closed set of stable finding codes. The same input always yields the
/// same multiset of codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum FindingCode {
    /// Declared duration differs from `last - first`.
    DurationMismatch,
    /// Declared frame count is not positive.
    FrameCount,
    /// A declared stream file does not exist on disk.
    FileMissing,
    /// `poses.txt` exists but failed to parse.
    PoseParse,
    /// Parsed pose sample count differs from the declared poses frame count.
    PoseCount,
    /// A pose quaternion norm is outside tolerance.
    QuatNorm,
    /// More than one stream carries the poses role.
    MultiplePoses,
    /// Container sample count differs from the declared frame count.
    Mp4Frames,
    /// Container duration differs from the declared duration beyond tolerance.
    Mp4Duration,
    /// A video container could not be probed.
    Mp4Probe,
    /// Effective frame rate deviates from the profile expectation.
    FpsDeviation,
    /// Profile supports head tracking but the session has no poses stream.
    PosesMissing,
    /// Unrecognized `Source:` label; wrist role was assumed.
    UnknownSource,
    /// Frame index gap inside the pose track.
    IdxGap,
    /// Inter-sample interval exceeds the gap tolerance.
    TimeGap,
    /// Folder name and log header disagree on the session id.
    SessionIdMismatch,
    /// Session id is not a `yyyyMMdd_HHmmss` timestamp.
    SessionIdFormat,
    /// Duplicate pose timestamp (legal at 1 ms resolution).
    TimeDup,
    /// No profile bound; profile-dependent checks were skipped.
    ProfileUnbound,
}

impl FindingCode {
    pub fn as_str(self) -> &'static str {
        match self {
            FindingCode::DurationMismatch => "DURATION_MISMATCH",
            FindingCode::FrameCount => "FRAME_COUNT",
            FindingCode::FileMissing => "FILE_MISSING",
            FindingCode::PoseParse => "POSE_PARSE",
            FindingCode::PoseCount => "POSE_COUNT",
            FindingCode::QuatNorm => "QUAT_NORM",
            FindingCode::MultiplePoses => "MULTIPLE_POSES",
            FindingCode::Mp4Frames => "MP4_FRAMES",
            FindingCode::Mp4Duration => "MP4_DURATION",
            FindingCode::Mp4Probe => "MP4_PROBE",
            FindingCode::FpsDeviation => "FPS_DEVIATION",
            FindingCode::PosesMissing => "POSES_MISSING",
            FindingCode::UnknownSource => "UNKNOWN_SOURCE",
            FindingCode::IdxGap => "IDX_GAP",
            FindingCode::TimeGap => "TIME_GAP",
            FindingCode::SessionIdMismatch => "SESSION_ID_MISMATCH",
            FindingCode::SessionIdFormat => "SESSION_ID_FORMAT",
            FindingCode::TimeDup => "TIME_DUP",
            FindingCode::ProfileUnbound => "PROFILE_UNBOUND",
        }
    }
}

impl fmt::Display for FindingCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One validation finding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Finding {
    pub severity: Severity,
    pub code: FindingCode,
    /// File name of the stream the finding concerns, when applicable.
    pub stream: Option<String>,
    pub message: String,
}

impl Finding {
    pub fn new(
        severity: Severity,
        code: FindingCode,
        stream: Option<&str>,
        message: impl Into<String>,
    ) -> Finding {
        Finding {
            severity,
            code,
            stream: stream.map(str::to_owned),
            message: message.into(),
        }
    }
}

/// Outcome of `validate_session`.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ValidationReport {
    pub findings: Vec<Finding>,
}

impl ValidationReport {
    pub fn has_errors(&self) -> bool {
        self.findings.iter().any(|f| f.severity == Severity::Error)
    }

    pub fn errors(&self) -> impl Iterator<Item = &Finding> {
        self.findings
            .iter()
            .filter(|f| f.severity == Severity::Error)
    }

    pub fn count(&self, severity: Severity) -> usize {
        self.findings
            .iter()
            .filter(|f| f.severity == severity)
            .count()
    }
}

/// Built-in registry of the seven supported host setups, keyed by device id.
///
/// Values are fixed measurements; the map is freshly constructed per call
/// and bit-identical across calls.
pub fn builtin_profiles() -> BTreeMap<String, DeviceProfile> {
    #[allow(clippy::too_many_arguments)] // one positional row per table column
    fn profile(
        device_id: &str,
        ego_format: VideoFormat,
        ego_resolution: (u32, u32),
        ego_fps: f64,
        ego_bitrate_mbps: f64,
        wrist_format: VideoFormat,
        wrist_fps: f64,
        wrist_bitrate_mbps: f64,
        head: TrackingSupport,
        hand: TrackingSupport,
        max_wrist_cameras: u8,
    ) -> (String, DeviceProfile) {
        (
            device_id.to_owned(),
            DeviceProfile {
                device_id: device_id.to_owned(),
                ego_format,
                ego_resolution,
                ego_fps,
                ego_bitrate_mbps,
                wrist_format,
                wrist_resolution: (1280, 720),
                wrist_fps,
                wrist_bitrate_mbps,
                head_tracking: head,
                hand_tracking: hand,
                max_wrist_cameras,
            },
        )
    }

    use TrackingSupport::{Manual, Supported, Unsupported};
    use VideoFormat::{Mov, Mp4, Vrs};

    BTreeMap::from([
        profile(
            "android",
            Mp4,
            (1920, 1080),
            29.84,
            4.02,
            Mp4,
            30.00,
            1.98,
            Unsupported,
            Unsupported,
            2,
        ),
        // Glasses record the ego view on-device as VRS; the wrist pipeline
        // runs on a paired Android phone. Head/hand signals exist only via
        // post-hoc reconstruction.
        profile(
            "aria",
            Vrs,
            (1408, 1408),
            10.00,
            8.85,
            Mp4,
            30.00,
            1.98,
            Manual,
            Manual,
            2,
        ),
        profile(
            "iphone_android",
            Mov,
            (1920, 1080),
            30.00,
            15.46,
            Mp4,
            30.00,
            1.99,
            Unsupported,
            Unsupported,
            2,
        ),
        profile(
            "iphone_ipad",
            Mov,
            (1920, 1080),
            30.00,
            15.44,
            Mov,
            27.37,
            6.13,
            Unsupported,
            Unsupported,
            2,
        ),
        // Single-wrist host; tracking is a platform capability even though
        // the stock recorder does not log it.
        profile(
            "avp",
            Mov,
            (1920, 1080),
            29.88,
            13.02,
            Mov,
            27.38,
            2.47,
            Supported,
            Supported,
            1,
        ),
        profile(
            "quest3",
            Mp4,
            (1280, 720),
            59.42,
            9.04,
            Mp4,
            27.37,
            3.75,
            Supported,
            Supported,
            2,
        ),
        profile(
            "pico4ultra",
            Mp4,
            (1280, 960),
            89.31,
            8.45,
            Mp4,
            27.36,
            3.56,
            Supported,
            Supported,
            2,
        ),
    ])
}

#[derive(Debug, Error)]
pub enum ScanError {
    #[error("no log.txt under {0}")]
    MissingLog(PathBuf),
    #[error("cannot read {path}: {source}")]
    UnreadableDir {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("log.txt: {0}")]
    Log(#[from] logparse::LogParseError),
}

#[derive(Debug, Error)]
pub enum MergeError {
    #[error("merge needs at least 2 sessions, got {0}")]
    EmptyInput(usize),
    #[error("duplicate stream name after prefixing: {0}")]
    DuplicateStreamName(String),
}

/// Discover a session folder: parse `log.txt`, parse `poses.txt` when
/// present, and probe every declared video container that is readable.
/// Probe and pose-parse failures become findings, not scan failures.
pub fn scan_session(root_path: &Path) -> Result<Session, ScanError> {
    let read = |path: &Path| -> Result<Option<Vec<u8>>, ScanError> {
        match std::fs::read(path) {
            Ok(bytes) => Ok(Some(bytes)),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
            Err(source) => Err(ScanError::UnreadableDir {
                path: path.to_owned(),
                source,
            }),
        }
    };

    if !root_path.is_dir() {
        return Err(ScanError::UnreadableDir {
            path: root_path.to_owned(),
            source: std::io::Error::new(std::io::ErrorKind::NotFound, "not a directory"),
        });
    }
    let log_bytes = read(&root_path.join("log.txt"))?
        .ok_or_else(|| ScanError::MissingLog(root_path.to_owned()))?;
    let log = logparse::parse_session_log(&String::from_utf8_lossy(&log_bytes))?;

    let mut scan_findings = Vec::new();
    let mut pose_track = None;
    if let Some(bytes) = read(&root_path.join("poses.txt"))? {
        match poseio::parse_pose_file(&String::from_utf8_lossy(&bytes)) {
            Ok(track) => pose_track = Some(track),
            Err(e) => scan_findings.push(Finding::new(
                Severity::Error,
                FindingCode::PoseParse,
                Some("poses.txt"),
                format!("poses.txt is unreadable: {e}"),
            )),
        }
    }

    // Probe declared video files, ordered by file name for determinism.
    let mut mp4_meta = BTreeMap::new();
    let mut video_files: Vec<&StreamMeta> = log
        .streams
        .iter()
        .filter(|s| s.role != StreamRole::Poses)
        .collect();
    video_files.sort_by(|a, b| a.file_name.cmp(&b.file_name));
    for stream in video_files {
        let ext = Path::new(&stream.file_name)
            .extension()
            .and_then(|e| e.to_str())
            .unwrap_or("");
        if !ext.eq_ignore_ascii_case("mp4") && !ext.eq_ignore_ascii_case("mov") {
            continue;
        }
        let Some(bytes) = read(&root_path.join(&stream.file_name))? else {
            continue; // validation reports FILE_MISSING
        };
        match mp4probe::probe_mp4(&bytes) {
            Ok(meta) => {
                mp4_meta.insert(stream.file_name.clone(), meta);
            }
            Err(e) => scan_findings.push(Finding::new(
                Severity::Warning,
                FindingCode::Mp4Probe,
                Some(&stream.file_name),
                format!("container probe failed: {e}"),
            )),
        }
    }

    let folder_name = root_path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned());
    let session_id = match &folder_name {
        Some(name) if session_id_is_timestamp(name) => name.clone(),
        _ => log.session_id.clone(),
    };
    let origins = log
        .streams
        .iter()
        .map(|s| (s.file_name.clone(), session_id.clone()))
        .collect();
    let roots = BTreeMap::from([(session_id, root_path.to_owned())]);

    Ok(Session {
        root_path: root_path.to_owned(),
        folder_name,
        log,
        pose_track,
        mp4_meta,
        profile: None,
        origins,
        roots,
        scan_findings,
    })
}

/// Validate a scanned session against its declared metadata and, when a
/// profile is bound, against the profile expectations. Every problem is a
/// finding; this function never fails.
pub fn validate_session(
    session: &Session,
    profile: Option<&DeviceProfile>,
    fps_tolerance: f64,
) -> ValidationReport {
    let profile = profile.or(session.profile.as_ref());
    let mut findings = session.scan_findings.clone();

    for stream in &session.log.streams {
        let name = stream.file_name.as_str();

        if stream.duration_ms != stream.last_ts_ms - stream.first_ts_ms {
            findings.push(Finding::new(
                Severity::Error,
                FindingCode::DurationMismatch,
                Some(name),
                format!(
                    "declared duration {} ms but last - first = {} ms",
                    stream.duration_ms,
                    stream.last_ts_ms - stream.first_ts_ms
                ),
            ));
        }
        if stream.total_frames == 0 {
            findings.push(Finding::new(
                Severity::Error,
                FindingCode::FrameCount,
                Some(name),
                "declared frame count is not positive",
            ));
        }
        if !StreamRole::label_is_known(&stream.source_label) {
            findings.push(Finding::new(
                Severity::Warning,
                FindingCode::UnknownSource,
                Some(name),
                format!(
                    "unrecognized source label {:?}; assuming wrist role",
                    stream.source_label
                ),
            ));
        }

        if !session.stream_path(name).is_file() {
            // An absent ego recording is expected for glasses that store it
            // on-device, so it only warrants a warning there.
            let on_device_ego = stream.role == StreamRole::Ego
                && profile.is_some_and(|p| p.ego_format == VideoFormat::Vrs);
            findings.push(Finding::new(
                if on_device_ego {
                    Severity::Warning
                } else {
                    Severity::Error
                },
                FindingCode::FileMissing,
                Some(name),
                format!("declared file {name} does not exist in the session folder"),
            ));
        }

        if let Some(meta) = session.mp4_meta.get(name) {
            findings.extend(mp4probe::cross_check_mp4(meta, stream, 100));
        }

        if let Some(profile) = profile {
            if let Some(effective) = stream.effective_fps() {
                let expected = profile.expected_fps(stream.role);
                if expected > 0.0 && ((effective - expected) / expected).abs() > fps_tolerance {
                    findings.push(Finding::new(
                        Severity::Warning,
                        FindingCode::FpsDeviation,
                        Some(name),
                        format!(
                            "effective rate {effective:.2} Hz deviates from expected {expected:.2} Hz \
                             by more than {:.0}%",
                            fps_tolerance * 100.0
                        ),
                    ));
                }
            }
        }
    }

    // Pose-level checks.
    let poses_streams: Vec<&StreamMeta> = session
        .log
        .streams
        .iter()
        .filter(|s| s.role == StreamRole::Poses)
        .collect();
    if poses_streams.len() > 1 {
        findings.push(Finding::new(
            Severity::Error,
            FindingCode::MultiplePoses,
            None,
            format!("{} streams carry the poses role", poses_streams.len()),
        ));
    }
    if let Some(track) = &session.pose_track {
        if let Some(stream) = poses_streams.first() {
            if track.samples.len() as u64 != stream.total_frames {
                findings.push(Finding::new(
                    Severity::Error,
                    FindingCode::PoseCount,
                    Some(&stream.file_name),
                    format!(
                        "{} pose samples parsed but {} declared",
                        track.samples.len(),
                        stream.total_frames
                    ),
                ));
            }
        }
        let nominal = profile.map(|p| p.ego_fps);
        findings.extend(poseio::validate_pose_track(track, 1e-3, 3.0, nominal));
    }

    match profile {
        Some(profile) => {
            if profile.head_tracking == TrackingSupport::Supported && poses_streams.is_empty() {
                findings.push(Finding::new(
                    Severity::Warning,
                    FindingCode::PosesMissing,
                    None,
                    format!(
                        "profile {} supports head tracking but the session has no poses stream",
                        profile.device_id
                    ),
                ));
            }
        }
        None => findings.push(Finding::new(
            Severity::Info,
            FindingCode::ProfileUnbound,
            None,
            "no device profile bound; rate and tracking checks skipped",
        )),
    }

    // Session-id checks. The folder name is authoritative when it is itself
    // a timestamp id; ad-hoc folder names defer to the log header.
    if let Some(folder) = &session.folder_name {
        if session_id_is_timestamp(folder) && *folder != session.log.session_id {
            findings.push(Finding::new(
                Severity::Warning,
                FindingCode::SessionIdMismatch,
                None,
                format!(
                    "folder name {folder} overrides log header id {}",
                    session.log.session_id
                ),
            ));
        }
    }
    if !session_id_is_timestamp(session.session_id()) {
        findings.push(Finding::new(
            Severity::Warning,
            FindingCode::SessionIdFormat,
            None,
            format!(
                "session id {:?} is not a yyyyMMdd_HHmmss timestamp",
                session.session_id()
            ),
        ));
    }

    ValidationReport { findings }
}

/// Merge several scanned sessions into one logical session. Stream names
/// are prefixed with their origin session id; duplicate origin ids get a
/// numeric suffix so a session can be merged with itself. No clock
/// reconciliation happens here.
pub fn merge_sessions(
    sessions: &[Session],
    role_map: &BTreeMap<String, StreamRole>,
) -> Result<Session, MergeError> {
    if sessions.len() < 2 {
        return Err(MergeError::EmptyInput(sessions.len()));
    }

    let mut seen_ids: BTreeMap<String, usize> = BTreeMap::new();
    let mut streams = Vec::new();
    let mut mp4_meta = BTreeMap::new();
    let mut origins = BTreeMap::new();
    let mut roots = BTreeMap::new();
    let mut pose_track = None;
    let mut scan_findings = Vec::new();

    for session in sessions {
        let base_id = session.session_id().to_owned();
        let n = seen_ids.entry(base_id.clone()).or_insert(0);
        *n += 1;
        let prefix = if *n == 1 {
            base_id
        } else {
            format!("{base_id}_{n}")
        };
        roots.insert(prefix.clone(), session.root_path.clone());

        for stream in &session.log.streams {
            let name = format!("{prefix}/{}", stream.file_name);
            if origins.contains_key(&name) {
                return Err(MergeError::DuplicateStreamName(name));
            }
            let mut stream = stream.clone();
            stream.file_name = name.clone();
            if let Some(role) = role_map.get(&name) {
                stream.role = *role;
            }
            if let Some(meta) = session.mp4_meta.get(&name[prefix.len() + 1..]) {
                mp4_meta.insert(name.clone(), meta.clone());
            }
            origins.insert(name, prefix.clone());
            streams.push(stream);
        }
        if pose_track.is_none() {
            pose_track = session.pose_track.clone();
        }
        for finding in &session.scan_findings {
            let mut finding = finding.clone();
            if let Some(stream) = &finding.stream {
                finding.stream = Some(format!("{prefix}/{stream}"));
            }
            scan_findings.push(finding);
        }
    }

    let first = &sessions[0];
    Ok(Session {
        root_path: first.root_path.clone(),
        folder_name: None,
        log: SessionLog {
            session_id: first.session_id().to_owned(),
            dialect: SessionDialect::Basic,
            started_wallclock: None,
            ended_wallclock: None,
            streams,
        },
        pose_track,
        mp4_meta,
        profile: None,
        origins,
        roots,
        scan_findings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn registry_has_seven_setups() {
        let profiles = builtin_profiles();
        assert_eq!(profiles.len(), 7);
        for id in [
            "android",
            "aria",
            "iphone_android",
            "iphone_ipad",
            "avp",
            "quest3",
            "pico4ultra",
        ] {
            assert!(profiles.contains_key(id), "missing {id}");
            assert_eq!(profiles[id].device_id, id);
        }
    }

    #[test]
    fn registry_values_match_measurements() {
        let profiles = builtin_profiles();
        let pico = &profiles["pico4ultra"];
        assert_eq!(pico.ego_fps, 89.31);
        assert_eq!(pico.ego_resolution, (1280, 960));
        assert_eq!(pico.ego_bitrate_mbps, 8.45);
        assert_eq!(pico.wrist_fps, 27.36);

        let quest = &profiles["quest3"];
        assert_eq!(quest.ego_fps, 59.42);
        assert_eq!(quest.wrist_fps, 27.37);
        assert_eq!(quest.ego_resolution, (1280, 720));

        let aria = &profiles["aria"];
        assert_eq!(aria.ego_format, VideoFormat::Vrs);
        assert_eq!(aria.ego_resolution, (1408, 1408));
        assert_eq!(aria.ego_fps, 10.00);
        assert_eq!(aria.head_tracking, TrackingSupport::Manual);

        let avp = &profiles["avp"];
        assert_eq!(avp.max_wrist_cameras, 1);
        assert_eq!(avp.wrist_format, VideoFormat::Mov);
    }

    #[test]
    fn registry_is_stable_across_calls() {
        assert_eq!(builtin_profiles(), builtin_profiles());
    }

    #[test]
    fn profile_invariants_hold() {
        for profile in builtin_profiles().values() {
            assert!(profile.ego_resolution.0 > 0 && profile.ego_resolution.1 > 0);
            assert!(profile.wrist_resolution.0 > 0 && profile.wrist_resolution.1 > 0);
            assert!(profile.ego_fps > 0.0 && profile.wrist_fps > 0.0);
            assert!(profile.ego_bitrate_mbps > 0.0 && profile.wrist_bitrate_mbps > 0.0);
            assert!(profile.max_wrist_cameras <= 2);
        }
    }

    #[test]
    fn role_derivation_from_source_labels() {
        assert_eq!(
            StreamRole::from_source_label("Internal Camera"),
            StreamRole::Ego
        );
        assert_eq!(
            StreamRole::from_source_label("USB Camera 1"),
            StreamRole::Wrist
        );
        assert_eq!(
            StreamRole::from_source_label("USB Camera 2"),
            StreamRole::Wrist
        );
        assert_eq!(StreamRole::from_source_label("Poses"), StreamRole::Poses);
        assert_eq!(
            StreamRole::from_source_label("Webcam"),
            StreamRole::Wrist,
            "unknown labels default to wrist"
        );
        assert!(!StreamRole::label_is_known("Webcam"));
    }

    #[test]
    fn session_id_shape_checks() {
        assert!(session_id_is_timestamp("20260511_162515"));
        assert!(session_id_is_timestamp("20260512_044648"));
        assert!(!session_id_is_timestamp("20261311_162515"), "month 13");
        assert!(!session_id_is_timestamp("20260230_162515"), "Feb 30");
        assert!(!session_id_is_timestamp("20260511_246060"), "hour 24");
        assert!(!session_id_is_timestamp("session_7"));
        assert!(!session_id_is_timestamp("20260511162515"));
    }

    #[test]
    fn effective_fps_spans_n_minus_one_intervals() {
        let stream = StreamMeta {
            file_name: "poses.txt".into(),
            source_label: "Poses".into(),
            role: StreamRole::Poses,
            total_frames: 2622,
            first_ts_ms: 1_778_528_808_795,
            last_ts_ms: 1_778_528_838_153,
            duration_ms: 29_358,
            extras: Vec::new(),
        };
        let fps = stream.effective_fps().unwrap();
        assert!((fps - 2621.0 * 1000.0 / 29_358.0).abs() < 1e-12);
        assert!((fps - 89.28).abs() < 0.01);
    }
}

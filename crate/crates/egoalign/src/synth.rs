//! Ground-truth session generator. Fabricates complete session folders
//! (log, poses, stub containers, anchors) from a device profile and a
//! clock/noise scenario, and emits a machine-readable ground-truth
//! manifest that the rest of the toolkit is tested against.
//!
//! Generation is a pure function of the [`Scenario`]: identical scenarios
//! produce byte-identical folders.

use std::collections::BTreeMap;
use std::io;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::logparse::{self, LogParseError};
use crate::model::{
    builtin_profiles, DeviceProfile, SessionDialect, SessionLog, StreamMeta, StreamRole,
    TrackingSupport,
};
use crate::poseio::{self, JointPose, PoseSample, PoseTrack, JOINTS_PER_HAND};
use crate::sync::{apply_clock, AnchorObservation, ClockModel};
use crate::timeline::{quat_from_axis_angle, quat_mul, quat_normalize, Quat};

/// True clock parameters for one stream: the offset at session start plus
/// a linear drift.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClockTruth {
    pub offset_ms: f64,
    pub drift_ppm: f64,
}

impl ClockTruth {
    pub const IDENTITY: ClockTruth = ClockTruth {
        offset_ms: 0.0,
        drift_ppm: 0.0,
    };
}

/// Everything that determines a generated session.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub profile_id: String,
    pub duration_s: f64,
    /// Clock truth for streams without a per-stream entry.
    pub default_clock: ClockTruth,
    /// Clock truth overrides keyed by stream file name.
    pub per_stream_clock: BTreeMap<String, ClockTruth>,
    /// Gaussian sigma applied to frame timestamps and anchor readings.
    pub timestamp_jitter_sigma_ms: f64,
    /// Probability of dropping an interior video frame.
    pub frame_drop_prob: f64,
    /// Anchor observations emitted per stream.
    pub anchor_count: u32,
    pub seed: u64,
    /// Emit the ego stream. Ignored for profiles whose ego recording lives
    /// on-device (VRS); false models a wrist-only companion folder.
    pub ego: bool,
    /// Wrist cameras to emit; `None` means the profile maximum.
    pub wrist_cameras: Option<u8>,
}

impl Scenario {
    pub fn new(profile_id: &str, duration_s: f64, seed: u64) -> Scenario {
        Scenario {
            profile_id: profile_id.to_owned(),
            duration_s,
            default_clock: ClockTruth::IDENTITY,
            per_stream_clock: BTreeMap::new(),
            timestamp_jitter_sigma_ms: 0.0,
            frame_drop_prob: 0.0,
            anchor_count: 5,
            seed,
            ego: true,
            wrist_cameras: None,
        }
    }

    pub fn with_clock(mut self, offset_ms: f64, drift_ppm: f64) -> Scenario {
        self.default_clock = ClockTruth {
            offset_ms,
            drift_ppm,
        };
        self
    }

    fn clock_for(&self, stream: &str) -> ClockTruth {
        self.per_stream_clock
            .get(stream)
            .copied()
            .unwrap_or(self.default_clock)
    }
}

/// Analytic pose trajectory: sinusoidal head translation, constant-rate
/// head rotation about a fixed axis, and hands riding the head with fixed
/// per-joint offsets and composed constant-rate rotations. Closed form at
/// any time, so interpolation accuracy has an exact oracle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryParams {
    /// Phase reference (session start on the reference clock).
    pub base_ref_ms: f64,
    pub head_amplitude_m: [f64; 3],
    pub head_freq_hz: [f64; 3],
    pub head_phase_rad: [f64; 3],
    pub head_axis: [f64; 3],
    pub head_omega_rad_s: f64,
    pub hand_arm_offset_m: [[f64; 3]; 2],
    pub hand_axis: [[f64; 3]; 2],
    pub hand_omega_rad_s: [f64; 2],
    pub joint_offset_m: [Vec<[f64; 3]>; 2],
    pub joint_rotation: [Vec<Quat>; 2],
}

impl TrajectoryParams {
    fn random(base_ref_ms: f64, rng: &mut ChaCha12Rng) -> TrajectoryParams {
        let unit_axis = |rng: &mut ChaCha12Rng| -> [f64; 3] {
            loop {
                let v: [f64; 3] = [
                    rng.gen_range(-1.0..1.0),
                    rng.gen_range(-1.0..1.0),
                    rng.gen_range(-1.0..1.0),
                ];
                let len = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
                if len > 0.1 {
                    return [v[0] / len, v[1] / len, v[2] / len];
                }
            }
        };
        let unit_quat = |rng: &mut ChaCha12Rng| -> Quat {
            let q = [
                gaussian(rng),
                gaussian(rng),
                gaussian(rng),
                gaussian(rng) + 2.0, // bias away from the zero quaternion
            ];
            quat_normalize(&q)
        };

        let head_amplitude_m = [
            rng.gen_range(0.10..0.25),
            rng.gen_range(0.05..0.15),
            rng.gen_range(0.10..0.25),
        ];
        let head_freq_hz = [
            rng.gen_range(0.10..0.30),
            rng.gen_range(0.10..0.30),
            rng.gen_range(0.10..0.30),
        ];
        let head_phase_rad = [
            rng.gen_range(0.0..std::f64::consts::TAU),
            rng.gen_range(0.0..std::f64::consts::TAU),
            rng.gen_range(0.0..std::f64::consts::TAU),
        ];
        let head_axis = unit_axis(rng);
        let head_omega_rad_s = rng.gen_range(0.2..0.5);

        let mut joint_offset_m: [Vec<[f64; 3]>; 2] = [Vec::new(), Vec::new()];
        let mut joint_rotation: [Vec<Quat>; 2] = [Vec::new(), Vec::new()];
        let hand_arm_offset_m = [
            [-0.25 + rng.gen_range(-0.05..0.05), -0.40, 0.30],
            [0.25 + rng.gen_range(-0.05..0.05), -0.40, 0.30],
        ];
        let hand_axis = [unit_axis(rng), unit_axis(rng)];
        let hand_omega_rad_s = [rng.gen_range(0.2..0.6), rng.gen_range(0.2..0.6)];
        for hand in 0..2 {
            for joint in 0..JOINTS_PER_HAND {
                // Slot 1 is the wrist itself; everything else hangs off it.
                let offset = if joint == 1 {
                    [0.0; 3]
                } else {
                    [
                        rng.gen_range(-0.12..0.12),
                        rng.gen_range(-0.12..0.12),
                        rng.gen_range(-0.12..0.12),
                    ]
                };
                joint_offset_m[hand].push(offset);
                joint_rotation[hand].push(unit_quat(rng));
            }
        }

        TrajectoryParams {
            base_ref_ms,
            head_amplitude_m,
            head_freq_hz,
            head_phase_rad,
            head_axis,
            head_omega_rad_s,
            hand_arm_offset_m,
            hand_axis,
            hand_omega_rad_s,
            joint_offset_m,
            joint_rotation,
        }
    }

    /// Evaluate the trajectory at a reference-clock time.
    pub fn sample(&self, t_ref_ms: f64) -> PoseSample {
        let tau = (t_ref_ms - self.base_ref_ms) / 1000.0;
        let mut head_pos = [0.0; 3];
        for (pos, ((amp, freq), phase)) in head_pos.iter_mut().zip(
            self.head_amplitude_m
                .iter()
                .zip(&self.head_freq_hz)
                .zip(&self.head_phase_rad),
        ) {
            *pos = amp * (std::f64::consts::TAU * freq * tau + phase).sin();
        }
        let head_rot = quat_from_axis_angle(self.head_axis, self.head_omega_rad_s * tau);

        let mut hands = [[JointPose::IDENTITY; JOINTS_PER_HAND]; 2];
        for (hand, joints) in hands.iter_mut().enumerate() {
            let base_rot =
                quat_from_axis_angle(self.hand_axis[hand], self.hand_omega_rad_s[hand] * tau);
            let wrist_pos = [
                head_pos[0] + self.hand_arm_offset_m[hand][0],
                head_pos[1] + self.hand_arm_offset_m[hand][1],
                head_pos[2] + self.hand_arm_offset_m[hand][2],
            ];
            for (joint, out) in joints.iter_mut().enumerate() {
                let offset = self.joint_offset_m[hand][joint];
                *out = JointPose {
                    position: [
                        wrist_pos[0] + offset[0],
                        wrist_pos[1] + offset[1],
                        wrist_pos[2] + offset[2],
                    ],
                    rotation: quat_mul(&base_rot, &self.joint_rotation[hand][joint]),
                };
            }
        }

        PoseSample {
            idx: 0,
            t_ms: t_ref_ms.round() as i64,
            head: JointPose {
                position: head_pos,
                rotation: head_rot,
            },
            left_hand: hands[0],
            right_hand: hands[1],
        }
    }
}

/// True per-stream state behind a generated session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StreamTruth {
    pub clock: ClockModel,
    /// Device-clock timestamp of every emitted frame.
    pub frame_ts_device_ms: Vec<i64>,
}

/// Ground truth emitted alongside a generated session (`ground_truth.json`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub session_id: String,
    pub profile_id: String,
    /// Session start on the reference clock.
    pub base_ref_ms: i64,
    pub duration_ms: i64,
    pub streams: BTreeMap<String, StreamTruth>,
    pub trajectory: Option<TrajectoryParams>,
    pub anchors: Vec<AnchorObservation>,
}

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("unknown profile {0:?}")]
    UnknownProfile(String),
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error("cannot write {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("invalid stub spec: {0}")]
    InvalidStub(String),
    #[error("corrupt target not present: {0}")]
    MissingTarget(String),
    #[error("log rewrite failed: {0}")]
    LogRewrite(#[from] LogParseError),
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), SynthError> {
    std::fs::write(path, bytes).map_err(|source| SynthError::Io {
        path: path.to_owned(),
        source,
    })
}

/// Standard normal deviate via Box-Muller, driven by two uniform draws.
fn gaussian(rng: &mut ChaCha12Rng) -> f64 {
    let u1: f64 = 1.0 - rng.gen::<f64>(); // (0, 1]
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// Gregorian date for a day count since 1970-01-01.
fn civil_from_days(days: i64) -> (i64, u32, u32) {
    let z = days + 719_468;
    let era = z.div_euclid(146_097);
    let doe = z.rem_euclid(146_097);
    let yoe = (doe - doe / 1460 + doe / 36_524 - doe / 146_096) / 365;
    let doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    let mp = (5 * doy + 2) / 153;
    let day = doy - (153 * mp + 2) / 5 + 1;
    let month = if mp < 10 { mp + 3 } else { mp - 9 };
    let year = yoe + era * 400 + i64::from(month <= 2);
    (year, month as u32, day as u32)
}

fn split_epoch_ms(epoch_ms: i64) -> (i64, u32, u32, u32, u32, u32, u32) {
    let secs = epoch_ms.div_euclid(1000);
    let ms = epoch_ms.rem_euclid(1000) as u32;
    let days = secs.div_euclid(86_400);
    let rem = secs.rem_euclid(86_400);
    let (year, month, day) = civil_from_days(days);
    (
        year,
        month,
        day,
        (rem / 3600) as u32,
        (rem / 60 % 60) as u32,
        (rem % 60) as u32,
        ms,
    )
}

/// `yyyyMMdd_HHmmss` (UTC) for an epoch-ms instant.
pub fn format_session_id(epoch_ms: i64) -> String {
    let (y, mo, d, h, mi, s, _) = split_epoch_ms(epoch_ms);
    format!("{y:04}{mo:02}{d:02}_{h:02}{mi:02}{s:02}")
}

/// `yyyy-MM-dd HH:mm:ss.SSS` (UTC) for an epoch-ms instant.
pub fn format_wallclock(epoch_ms: i64) -> String {
    let (y, mo, d, h, mi, s, ms) = split_epoch_ms(epoch_ms);
    format!("{y:04}-{mo:02}-{d:02} {h:02}:{mi:02}:{s:02}.{ms:03}")
}

/// Split `total_ticks` across `samples` stts entries with integer deltas.
pub fn stts_for(samples: u64, total_ticks: u64) -> Result<Vec<(u32, u32)>, SynthError> {
    if samples == 0 {
        return Err(SynthError::InvalidStub("zero samples".into()));
    }
    if samples == 1 {
        return Ok(vec![(1, total_ticks.max(1) as u32)]);
    }
    if total_ticks < samples {
        return Err(SynthError::InvalidStub(format!(
            "{total_ticks} ticks cannot cover {samples} samples with positive deltas"
        )));
    }
    let base = total_ticks / samples;
    let remainder = total_ticks - base * samples;
    let mut entries = Vec::new();
    if samples - remainder > 0 {
        entries.push(((samples - remainder) as u32, base as u32));
    }
    if remainder > 0 {
        entries.push((remainder as u32, base as u32 + 1));
    }
    Ok(entries)
}

fn push_box(out: &mut Vec<u8>, box_type: &[u8; 4], payload: &[u8]) {
    out.extend_from_slice(&(8 + payload.len() as u32).to_be_bytes());
    out.extend_from_slice(box_type);
    out.extend_from_slice(payload);
}

/// Emit a minimal progressive container: `ftyp`, `moov` (`mvhd`, one
/// `trak` with `mdhd` and `stbl/stts`), and an empty `mdat`. Durations
/// exceeding 32 bits are written as version-1 header boxes.
pub fn write_stub_mp4(timescale: u32, sample_deltas: &[(u32, u32)]) -> Result<Vec<u8>, SynthError> {
    if sample_deltas.is_empty() {
        return Err(SynthError::InvalidStub("no stts entries".into()));
    }
    if sample_deltas.iter().any(|(c, d)| *c == 0 || *d == 0) {
        return Err(SynthError::InvalidStub(
            "stts counts and deltas must be positive".into(),
        ));
    }
    let duration: u64 = sample_deltas
        .iter()
        .map(|(count, delta)| *count as u64 * *delta as u64)
        .sum();

    // mvhd and mdhd share the leading layout: version/flags, two times,
    // timescale, duration.
    let header_box = |tail: &[u8]| -> Vec<u8> {
        let mut payload = Vec::new();
        if duration <= u32::MAX as u64 {
            payload.extend_from_slice(&[0, 0, 0, 0]); // version 0
            payload.extend_from_slice(&0u32.to_be_bytes());
            payload.extend_from_slice(&0u32.to_be_bytes());
            payload.extend_from_slice(&timescale.to_be_bytes());
            payload.extend_from_slice(&(duration as u32).to_be_bytes());
        } else {
            payload.extend_from_slice(&[1, 0, 0, 0]); // version 1
            payload.extend_from_slice(&0u64.to_be_bytes());
            payload.extend_from_slice(&0u64.to_be_bytes());
            payload.extend_from_slice(&timescale.to_be_bytes());
            payload.extend_from_slice(&duration.to_be_bytes());
        }
        payload.extend_from_slice(tail);
        payload
    };

    let mut stts = vec![0, 0, 0, 0];
    stts.extend_from_slice(&(sample_deltas.len() as u32).to_be_bytes());
    for (count, delta) in sample_deltas {
        stts.extend_from_slice(&count.to_be_bytes());
        stts.extend_from_slice(&delta.to_be_bytes());
    }

    let mut stbl = Vec::new();
    push_box(&mut stbl, b"stts", &stts);
    let mut minf = Vec::new();
    push_box(&mut minf, b"stbl", &stbl);
    let mut mdia = Vec::new();
    push_box(&mut mdia, b"mdhd", &header_box(&[0, 0, 0, 0])); // language + predefined
    push_box(&mut mdia, b"minf", &minf);
    let mut trak = Vec::new();
    push_box(&mut trak, b"mdia", &mdia);

    let mut moov = Vec::new();
    // mvhd trails rate/volume/matrix/next-track fields; zeros are fine for
    // a metadata-only stub.
    push_box(&mut moov, b"mvhd", &header_box(&[0u8; 80]));
    push_box(&mut moov, b"trak", &trak);

    let mut out = Vec::new();
    let mut ftyp = Vec::new();
    ftyp.extend_from_slice(b"isom");
    ftyp.extend_from_slice(&512u32.to_be_bytes());
    ftyp.extend_from_slice(b"isom");
    ftyp.extend_from_slice(b"iso2");
    push_box(&mut out, b"ftyp", &ftyp);
    push_box(&mut out, b"moov", &moov);
    push_box(&mut out, b"mdat", &[]);
    Ok(out)
}

struct StreamPlan {
    file_name: String,
    source_label: String,
    fps: f64,
    is_video: bool,
}

fn stream_plans(profile: &DeviceProfile, scenario: &Scenario) -> Vec<StreamPlan> {
    let mut plans = Vec::new();
    // Glasses-hosted setups record the ego view on-device; the session
    // folder only ever holds the companion streams.
    let on_device_ego = profile.ego_format == crate::model::VideoFormat::Vrs;
    let ego = scenario.ego && !on_device_ego;
    if ego {
        plans.push(StreamPlan {
            file_name: format!("internal.{}", profile.ego_format.extension()),
            source_label: "Internal Camera".into(),
            fps: profile.ego_fps,
            is_video: true,
        });
    }
    let wrists = scenario
        .wrist_cameras
        .unwrap_or(profile.max_wrist_cameras)
        .min(profile.max_wrist_cameras);
    for i in 0..wrists {
        plans.push(StreamPlan {
            file_name: format!("usb{}.{}", i + 1, profile.wrist_format.extension()),
            source_label: format!("USB Camera {}", i + 1),
            fps: profile.wrist_fps,
            is_video: true,
        });
    }
    if ego && profile.head_tracking == TrackingSupport::Supported {
        plans.push(StreamPlan {
            file_name: "poses.txt".into(),
            source_label: "Poses".into(),
            fps: profile.ego_fps, // poses sample at the main-loop rate
            is_video: false,
        });
    }
    plans
}

/// Generate a complete session folder under `out_dir` and return its
/// ground truth. `out_dir` is created if needed and becomes the session
/// root (`log.txt`, stream files, `anchors.csv`, `ground_truth.json`).
pub fn generate_session(scenario: &Scenario, out_dir: &Path) -> Result<GroundTruth, SynthError> {
    let profiles = builtin_profiles();
    let profile = profiles
        .get(&scenario.profile_id)
        .ok_or_else(|| SynthError::UnknownProfile(scenario.profile_id.clone()))?;
    if scenario.duration_s <= 0.0 || !scenario.duration_s.is_finite() {
        return Err(SynthError::InvalidScenario(
            "duration must be positive".into(),
        ));
    }
    if !(0.0..1.0).contains(&scenario.frame_drop_prob) {
        return Err(SynthError::InvalidScenario(
            "frame_drop_prob must be in [0, 1)".into(),
        ));
    }
    if scenario.timestamp_jitter_sigma_ms < 0.0 {
        return Err(SynthError::InvalidScenario(
            "jitter sigma must be non-negative".into(),
        ));
    }
    std::fs::create_dir_all(out_dir).map_err(|source| SynthError::Io {
        path: out_dir.to_owned(),
        source,
    })?;

    let mut rng = ChaCha12Rng::seed_from_u64(scenario.seed);

    // Session start on the reference clock, derived from the seed so
    // distinct seeds land on distinct second-resolution session ids. The
    // base sits early in the epoch on purpose: anchor pairs stored as f64
    // then satisfy their affine clock relation to ~1e-8 ms, so noiseless
    // fits recover the truth essentially exactly. Real-epoch inputs parse
    // and align fine; only sub-microsecond fit exactness needs small
    // coordinates.
    let base_ref_ms: i64 = 10_000_000
        + (scenario.seed % 86_400) as i64 * 1000
        + (scenario.seed / 86_400 % 1000) as i64;
    let duration_ms = (scenario.duration_s * 1000.0).round() as i64;
    let session_id = format_session_id(base_ref_ms);
    let sigma = scenario.timestamp_jitter_sigma_ms;

    let plans = stream_plans(profile, scenario);
    let trajectory = plans
        .iter()
        .any(|p| !p.is_video)
        .then(|| TrajectoryParams::random(base_ref_ms as f64, &mut rng));

    let mut streams = Vec::new();
    let mut truths = BTreeMap::new();
    let mut anchors = Vec::new();
    let mut pose_track: Option<PoseTrack> = None;

    for plan in &plans {
        let truth = scenario.clock_for(&plan.file_name);
        let slope = 1.0 + truth.drift_ppm / 1e6;
        let device_start = base_ref_ms as f64 - truth.offset_ms;
        let clock = ClockModel {
            stream_id: plan.file_name.clone(),
            offset_ms: truth.offset_ms,
            drift_ppm: truth.drift_ppm,
            t0_ms: device_start,
        };

        // Uniform true instants at the nominal rate, dropped (interior
        // video frames only) and jittered on the device clock. Stamps are
        // truncated to the 1 ms log resolution and kept non-decreasing.
        let step_ref = 1000.0 / plan.fps;
        let frame_count = (scenario.duration_s * plan.fps).floor() as u64 + 1;
        let mut stamps: Vec<i64> = Vec::with_capacity(frame_count as usize);
        let mut prev = i64::MIN;
        for i in 0..frame_count {
            let interior = i != 0 && i != frame_count - 1;
            if plan.is_video
                && interior
                && scenario.frame_drop_prob > 0.0
                && rng.gen::<f64>() < scenario.frame_drop_prob
            {
                continue;
            }
            let ref_instant = base_ref_ms as f64 + i as f64 * step_ref;
            let mut device_ts = device_start + (ref_instant - base_ref_ms as f64) / slope;
            if sigma > 0.0 {
                device_ts += sigma * gaussian(&mut rng);
            }
            let stamp = (device_ts.floor() as i64).max(prev);
            prev = stamp;
            stamps.push(stamp);
        }

        let first = stamps[0];
        let last = *stamps.last().unwrap();
        streams.push(StreamMeta {
            file_name: plan.file_name.clone(),
            source_label: plan.source_label.clone(),
            role: StreamRole::from_source_label(&plan.source_label),
            total_frames: stamps.len() as u64,
            first_ts_ms: first,
            last_ts_ms: last,
            duration_ms: last - first,
            extras: Vec::new(),
        });

        if plan.is_video {
            let deltas = stts_for(stamps.len() as u64, (last - first).max(1) as u64)?;
            let bytes = write_stub_mp4(1000, &deltas)?;
            write_file(&out_dir.join(&plan.file_name), &bytes)?;
        } else if let Some(params) = &trajectory {
            // Pose values are evaluated at each stamp's own corrected time
            // so samples stay consistent with their logged timestamps.
            let samples = stamps
                .iter()
                .enumerate()
                .map(|(i, &stamp)| {
                    let mut sample = params.sample(apply_clock(&clock, stamp as f64));
                    sample.idx = i as u64;
                    sample.t_ms = stamp;
                    sample
                })
                .collect();
            pose_track = Some(PoseTrack { samples });
        }

        // Anchor observations, uniform over the device-time session span.
        // The reading (reference side) carries the jitter; the device side
        // is an exact stamp, so the earliest anchor pins t0.
        let k = scenario.anchor_count;
        let span_device = duration_ms as f64 / slope;
        for j in 0..k {
            let ts = if k < 2 {
                device_start
            } else {
                device_start + j as f64 * span_device / (k - 1) as f64
            };
            let mut reading = apply_clock(&clock, ts);
            if sigma > 0.0 {
                reading += sigma * gaussian(&mut rng);
            }
            anchors.push(AnchorObservation {
                stream_id: plan.file_name.clone(),
                stream_ts_ms: ts,
                ref_ts_ms: reading,
            });
        }

        truths.insert(
            plan.file_name.clone(),
            StreamTruth {
                clock,
                frame_ts_device_ms: stamps,
            },
        );
    }

    let dialect = match scenario.profile_id.as_str() {
        "quest3" | "pico4ultra" | "avp" => SessionDialect::Extended,
        _ => SessionDialect::Basic,
    };
    let log = SessionLog {
        session_id: session_id.clone(),
        dialect,
        started_wallclock: (dialect == SessionDialect::Extended)
            .then(|| format_wallclock(base_ref_ms)),
        ended_wallclock: (dialect == SessionDialect::Extended)
            .then(|| format_wallclock(base_ref_ms + duration_ms)),
        streams,
    };
    let log_text = logparse::serialize_session_log(&log, dialect)
        .expect("generated log is dialect-consistent");
    write_file(&out_dir.join("log.txt"), log_text.as_bytes())?;

    if let Some(track) = &pose_track {
        let text = poseio::serialize_pose_file(track).expect("generated track is ordered");
        write_file(&out_dir.join("poses.txt"), text.as_bytes())?;
    }

    write_file(
        &out_dir.join("anchors.csv"),
        crate::sync::serialize_anchor_csv(&anchors).as_bytes(),
    )?;

    let truth = GroundTruth {
        session_id,
        profile_id: scenario.profile_id.clone(),
        base_ref_ms,
        duration_ms,
        streams: truths,
        trajectory,
        anchors,
    };
    let json = serde_json::to_string_pretty(&truth).expect("ground truth serializes");
    write_file(&out_dir.join("ground_truth.json"), json.as_bytes())?;
    Ok(truth)
}

/// Read a `ground_truth.json` back.
pub fn load_ground_truth(path: &Path) -> Result<GroundTruth, SynthError> {
    let bytes = std::fs::read(path).map_err(|source| SynthError::Io {
        path: path.to_owned(),
        source,
    })?;
    serde_json::from_slice(&bytes).map_err(|e| SynthError::InvalidScenario(e.to_string()))
}

/// The documented corruption classes. Each targets one field family of a
/// clean session and trips exactly the listed validation codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Corruption {
    /// Shift a video stream's last timestamp: `DURATION_MISMATCH`.
    StreamTimestamp,
    /// Zero a video stream's declared frame count: `FRAME_COUNT` (and the
    /// container cross-check `MP4_FRAMES`).
    StreamFrameCount,
    /// Delete a declared video file: `FILE_MISSING`.
    MissingFile,
    /// Rewrite a container with one sample fewer: `MP4_FRAMES`.
    Mp4SampleCount,
    /// Scale one joint quaternion by 1.01: `QUAT_NORM`.
    QuatComponent,
    /// Drop one joint (7 fields) from a pose line: `POSE_PARSE`.
    PoseFieldCount,
}

impl Corruption {
    pub const ALL: [Corruption; 6] = [
        Corruption::StreamTimestamp,
        Corruption::StreamFrameCount,
        Corruption::MissingFile,
        Corruption::Mp4SampleCount,
        Corruption::QuatComponent,
        Corruption::PoseFieldCount,
    ];

    /// Error codes this corruption legitimately produces.
    pub fn expected_codes(self) -> &'static [crate::model::FindingCode] {
        use crate::model::FindingCode::*;
        match self {
            Corruption::StreamTimestamp => &[DurationMismatch],
            Corruption::StreamFrameCount => &[FrameCount, Mp4Frames],
            Corruption::MissingFile => &[FileMissing],
            Corruption::Mp4SampleCount => &[Mp4Frames],
            Corruption::QuatComponent => &[QuatNorm],
            Corruption::PoseFieldCount => &[PoseParse],
        }
    }
}

fn read_session_log(dir: &Path) -> Result<(SessionLog, String), SynthError> {
    let path = dir.join("log.txt");
    let text = std::fs::read_to_string(&path).map_err(|source| SynthError::Io {
        path: path.clone(),
        source,
    })?;
    Ok((logparse::parse_session_log(&text)?, text))
}

fn first_video_stream(log: &SessionLog) -> Result<StreamMeta, SynthError> {
    log.streams
        .iter()
        .find(|s| s.role != StreamRole::Poses)
        .cloned()
        .ok_or_else(|| SynthError::MissingTarget("no video stream".into()))
}

/// Apply one corruption to a generated session folder. Returns the file
/// name of the affected stream. Target selection is deterministic.
pub fn corrupt_session(dir: &Path, corruption: Corruption) -> Result<String, SynthError> {
    let (mut log, _) = read_session_log(dir)?;
    let rewrite_log = |log: &SessionLog| -> Result<(), SynthError> {
        let text =
            logparse::serialize_session_log(log, log.dialect).expect("parsed log re-serializes");
        write_file(&dir.join("log.txt"), text.as_bytes())
    };

    match corruption {
        Corruption::StreamTimestamp => {
            let target = first_video_stream(&log)?.file_name;
            let stream = log
                .streams
                .iter_mut()
                .find(|s| s.file_name == target)
                .unwrap();
            stream.last_ts_ms += 1000;
            rewrite_log(&log)?;
            Ok(target)
        }
        Corruption::StreamFrameCount => {
            let target = first_video_stream(&log)?.file_name;
            let stream = log
                .streams
                .iter_mut()
                .find(|s| s.file_name == target)
                .unwrap();
            stream.total_frames = 0;
            rewrite_log(&log)?;
            Ok(target)
        }
        Corruption::MissingFile => {
            let target = first_video_stream(&log)?.file_name;
            let path = dir.join(&target);
            std::fs::remove_file(&path).map_err(|source| SynthError::Io { path, source })?;
            Ok(target)
        }
        Corruption::Mp4SampleCount => {
            let stream = first_video_stream(&log)?;
            if stream.total_frames < 2 {
                return Err(SynthError::MissingTarget("need at least 2 frames".into()));
            }
            let deltas = stts_for(stream.total_frames - 1, stream.duration_ms.max(1) as u64)?;
            let bytes = write_stub_mp4(1000, &deltas)?;
            write_file(&dir.join(&stream.file_name), &bytes)?;
            Ok(stream.file_name)
        }
        Corruption::QuatComponent => {
            let path = dir.join("poses.txt");
            let text = std::fs::read_to_string(&path).map_err(|source| SynthError::Io {
                path: path.clone(),
                source,
            })?;
            let mut track = poseio::parse_pose_file(&text)
                .map_err(|e| SynthError::MissingTarget(format!("poses.txt unusable: {e}")))?;
            if track.samples.is_empty() {
                return Err(SynthError::MissingTarget("poses.txt has no samples".into()));
            }
            let mid = track.samples.len() / 2;
            for c in &mut track.samples[mid].left_hand[5].rotation {
                *c *= 1.01;
            }
            let text = poseio::serialize_pose_file(&track).expect("track stays ordered");
            write_file(&path, text.as_bytes())?;
            Ok("poses.txt".into())
        }
        Corruption::PoseFieldCount => {
            let path = dir.join("poses.txt");
            let text = std::fs::read_to_string(&path).map_err(|source| SynthError::Io {
                path: path.clone(),
                source,
            })?;
            let mut lines: Vec<String> = text.lines().map(str::to_owned).collect();
            let target = lines
                .iter()
                .position(|l| !l.trim().is_empty() && !l.starts_with('#'))
                .ok_or_else(|| SynthError::MissingTarget("poses.txt has no data lines".into()))?;
            let tokens: Vec<&str> = lines[target].split_whitespace().collect();
            lines[target] = tokens[..tokens.len() - 7].join(" ");
            write_file(&path, (lines.join("\n") + "\n").as_bytes())?;
            Ok("poses.txt".into())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mp4probe::probe_mp4;

    #[test]
    fn calendar_formatting_matches_known_instants() {
        assert_eq!(format_session_id(1_778_531_115_762), "20260511_202515");
        assert_eq!(
            format_wallclock(1_778_528_808_577),
            "2026-05-11 19:46:48.577"
        );
        assert_eq!(format_wallclock(0), "1970-01-01 00:00:00.000");
        assert_eq!(format_session_id(951_827_696_000), "20000229_123456");
    }

    #[test]
    fn stts_split_is_exact() {
        let entries = stts_for(763, 25_406).unwrap();
        assert_eq!(entries, vec![(536, 33), (227, 34)]);
        let samples: u64 = entries.iter().map(|(c, _)| *c as u64).sum();
        let ticks: u64 = entries.iter().map(|(c, d)| *c as u64 * *d as u64).sum();
        assert_eq!((samples, ticks), (763, 25_406));

        assert_eq!(stts_for(1, 0).unwrap(), vec![(1, 1)]);
        assert_eq!(stts_for(5, 5).unwrap(), vec![(5, 1)]);
        assert!(stts_for(10, 5).is_err());
        assert!(stts_for(0, 5).is_err());
    }

    #[test]
    fn stub_round_trips_through_the_probe() {
        let deltas = vec![(763, 33), (1, 50)];
        let bytes = write_stub_mp4(1000, &deltas).unwrap();
        let meta = probe_mp4(&bytes).unwrap();
        assert_eq!(meta.movie_timescale, 1000);
        assert_eq!(meta.tracks[0].stts_entries, deltas);
        assert_eq!(meta.tracks[0].sample_count, 764);
    }

    #[test]
    fn stub_upgrades_to_version_1_beyond_32_bit_ticks() {
        let bytes = write_stub_mp4(1_000_000_000, &[(5, u32::MAX)]).unwrap();
        let meta = probe_mp4(&bytes).unwrap();
        assert_eq!(meta.tracks[0].media_duration_ticks, 5 * u32::MAX as u64);
        assert_eq!(meta.movie_duration_ticks, 5 * u32::MAX as u64);
    }

    #[test]
    fn stub_rejects_degenerate_specs() {
        assert!(write_stub_mp4(1000, &[]).is_err());
        assert!(write_stub_mp4(1000, &[(0, 10)]).is_err());
        assert!(write_stub_mp4(1000, &[(1, 0)]).is_err());
    }

    #[test]
    fn trajectory_rotations_are_unit_and_positions_bounded() {
        let mut rng = ChaCha12Rng::seed_from_u64(9);
        let params = TrajectoryParams::random(0.0, &mut rng);
        for t in [0.0, 137.5, 9_000.0, 30_000.0] {
            let sample = params.sample(t);
            for joint in sample.transforms() {
                assert!((joint.rotation_norm() - 1.0).abs() < 1e-12);
                for p in joint.position {
                    assert!(p.abs() < 2.0, "position {p} out of desk range");
                }
            }
        }
    }
}

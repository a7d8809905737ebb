//! Temporal alignment: common window across clock-corrected streams, a
//! uniform tick grid, nearest-frame mapping per stream, and pose
//! resampling by interpolation.
//!
//! Per-frame timestamps are reconstructed as a uniform grid between a
//! stream's declared first and last timestamps. That reconstruction is
//! isolated behind [`nearest_frame`] so a per-frame timestamp source can
//! replace it without touching the rest of the pipeline.

use std::collections::BTreeMap;

use serde::Serialize;
use thiserror::Error;

use crate::model::{Session, StreamMeta, StreamRole};
use crate::poseio::{JointPose, PoseSample, PoseTrack};
use crate::sync::{apply_clock, ClockModel};

pub type Quat = [f64; 4];

pub fn quat_dot(a: &Quat, b: &Quat) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn quat_norm(q: &Quat) -> f64 {
    quat_dot(q, q).sqrt()
}

pub fn quat_normalize(q: &Quat) -> Quat {
    let n = quat_norm(q);
    [q[0] / n, q[1] / n, q[2] / n, q[3] / n]
}

/// Hamilton product in (x, y, z, w) component order.
pub fn quat_mul(a: &Quat, b: &Quat) -> Quat {
    let (ax, ay, az, aw) = (a[0], a[1], a[2], a[3]);
    let (bx, by, bz, bw) = (b[0], b[1], b[2], b[3]);
    [
        aw * bx + ax * bw + ay * bz - az * by,
        aw * by - ax * bz + ay * bw + az * bx,
        aw * bz + ax * by - ay * bx + az * bw,
        aw * bw - ax * bx - ay * by - az * bz,
    ]
}

/// Unit quaternion for a rotation of `angle_rad` about `axis` (normalized
/// internally).
pub fn quat_from_axis_angle(axis: [f64; 3], angle_rad: f64) -> Quat {
    let len = (axis[0] * axis[0] + axis[1] * axis[1] + axis[2] * axis[2]).sqrt();
    let (s, c) = (angle_rad / 2.0).sin_cos();
    [axis[0] / len * s, axis[1] / len * s, axis[2] / len * s, c]
}

/// Angle in radians between two unit quaternions, double cover folded out.
pub fn quat_angle_between(a: &Quat, b: &Quat) -> f64 {
    2.0 * quat_dot(a, b).abs().clamp(0.0, 1.0).acos()
}

#[derive(Debug, Error, PartialEq)]
pub enum TimelineError {
    #[error("streams share no common window: latest start {start} > earliest end {end}")]
    EmptyOverlap { start: f64, end: f64 },
    #[error("no video streams to align")]
    NoStreams,
    #[error("query {t} ms is outside the track range [{first}, {last}]")]
    OutOfRange { t: f64, first: f64, last: f64 },
    #[error("pose track is empty")]
    EmptyTrack,
    #[error("slerp input {which} has norm {norm} (unit within 1e-6 required)")]
    NonUnitInput { which: &'static str, norm: f64 },
}

/// Latest corrected start and earliest corrected end across streams.
pub fn common_window(streams: &[(&StreamMeta, &ClockModel)]) -> Result<(f64, f64), TimelineError> {
    if streams.is_empty() {
        return Err(TimelineError::NoStreams);
    }
    let mut start = f64::NEG_INFINITY;
    let mut end = f64::INFINITY;
    for (meta, clock) in streams {
        start = start.max(apply_clock(clock, meta.first_ts_ms as f64));
        end = end.min(apply_clock(clock, meta.last_ts_ms as f64));
    }
    if start > end {
        return Err(TimelineError::EmptyOverlap { start, end });
    }
    Ok((start, end))
}

/// Corrected timestamp of reconstructed frame `i` of a stream.
///
/// Frames sit on the uniform grid `first + i * duration / (N - 1)`;
/// single-frame streams sit at `first`.
pub fn frame_time(meta: &StreamMeta, clock: &ClockModel, index: u64) -> f64 {
    let device_ts = if meta.total_frames < 2 {
        meta.first_ts_ms as f64
    } else {
        meta.first_ts_ms as f64
            + index as f64 * meta.duration_ms as f64 / (meta.total_frames - 1) as f64
    };
    apply_clock(clock, device_ts)
}

/// Index of the reconstructed frame nearest to `t_ref_ms`, with its signed
/// residual `corrected_frame_ts - t_ref_ms`. Ties break to the lower
/// index; out-of-range queries clamp to the end frames.
pub fn nearest_frame(meta: &StreamMeta, clock: &ClockModel, t_ref_ms: f64) -> (u64, f64) {
    let n = meta.total_frames.max(1);
    if n == 1 {
        return (0, frame_time(meta, clock, 0) - t_ref_ms);
    }
    // The corrected grid is affine in the index, so invert it to get a
    // candidate and let exact comparisons settle the neighborhood. This
    // keeps tie-breaking identical to an exhaustive scan.
    let first = frame_time(meta, clock, 0);
    let last = frame_time(meta, clock, n - 1);
    let span = last - first;
    let guess = if span > 0.0 {
        ((t_ref_ms - first) / span * (n - 1) as f64).round() as i64
    } else {
        0
    };

    let mut best: Option<(u64, f64)> = None;
    for candidate in guess.saturating_sub(2)..=guess.saturating_add(2) {
        let index = candidate.clamp(0, n as i64 - 1) as u64;
        let residual = frame_time(meta, clock, index) - t_ref_ms;
        match best {
            Some((best_index, best_residual))
                if residual.abs() > best_residual.abs()
                    || (residual.abs() == best_residual.abs() && index >= best_index) => {}
            _ => best = Some((index, residual)),
        }
    }
    best.unwrap()
}

/// Interpolation boundary behavior.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InterpMode {
    /// Error when the query falls outside the track.
    Strict,
    /// Return the boundary sample instead.
    Clamp,
}

/// Shortest-arc spherical interpolation between unit quaternions.
///
/// When the inputs are nearly parallel the spherical form degenerates and
/// normalized linear interpolation is used instead. The result is unit
/// within 1e-9.
pub fn slerp(q0: &Quat, q1: &Quat, u: f64) -> Result<Quat, TimelineError> {
    for (which, q) in [("q0", q0), ("q1", q1)] {
        let norm = quat_norm(q);
        if (norm - 1.0).abs() > 1e-6 {
            return Err(TimelineError::NonUnitInput { which, norm });
        }
    }
    let mut dot = quat_dot(q0, q1);
    let mut q1 = *q1;
    if dot < 0.0 {
        for c in &mut q1 {
            *c = -*c;
        }
        dot = -dot;
    }
    let blended = if dot > 1.0 - 1e-7 {
        let mut q = [0.0; 4];
        for i in 0..4 {
            q[i] = q0[i] + u * (q1[i] - q0[i]);
        }
        q
    } else {
        let theta = dot.acos();
        let sin_theta = theta.sin();
        let w0 = ((1.0 - u) * theta).sin() / sin_theta;
        let w1 = (u * theta).sin() / sin_theta;
        let mut q = [0.0; 4];
        for i in 0..4 {
            q[i] = w0 * q0[i] + w1 * q1[i];
        }
        q
    };
    Ok(quat_normalize(&blended))
}

fn lerp3(a: &[f64; 3], b: &[f64; 3], u: f64) -> [f64; 3] {
    [
        a[0] + u * (b[0] - a[0]),
        a[1] + u * (b[1] - a[1]),
        a[2] + u * (b[2] - a[2]),
    ]
}

fn blend_joint(a: &JointPose, b: &JointPose, u: f64) -> Result<JointPose, TimelineError> {
    // Stored rotations are quantized to 6 digits, so re-unitize before
    // interpolating; exact-hit queries never reach this path.
    Ok(JointPose {
        position: lerp3(&a.position, &b.position, u),
        rotation: slerp(
            &quat_normalize(&a.rotation),
            &quat_normalize(&b.rotation),
            u,
        )?,
    })
}

fn blend_sample(a: &PoseSample, b: &PoseSample, u: f64) -> Result<PoseSample, TimelineError> {
    let mut left = [JointPose::IDENTITY; 26];
    let mut right = [JointPose::IDENTITY; 26];
    for j in 0..26 {
        left[j] = blend_joint(&a.left_hand[j], &b.left_hand[j], u)?;
        right[j] = blend_joint(&a.right_hand[j], &b.right_hand[j], u)?;
    }
    Ok(PoseSample {
        idx: 0,
        t_ms: 0,
        head: blend_joint(&a.head, &b.head, u)?,
        left_hand: left,
        right_hand: right,
    })
}

/// Interpolate a pose at reference time `t_ref_ms`.
///
/// Sample timestamps are mapped through the clock; positions interpolate
/// linearly and all 53 rotations slerp. A query landing exactly on a
/// sample's corrected time returns that sample bit-identically. The output
/// `idx` is synthetic (0 here; the tick index inside `build_timeline`) and
/// `t_ms` is `t_ref_ms` rounded to the nearest millisecond.
pub fn interpolate_pose(
    track: &PoseTrack,
    clock: &ClockModel,
    t_ref_ms: f64,
    mode: InterpMode,
) -> Result<PoseSample, TimelineError> {
    if track.samples.is_empty() {
        return Err(TimelineError::EmptyTrack);
    }
    let corrected: Vec<f64> = track
        .samples
        .iter()
        .map(|s| apply_clock(clock, s.t_ms as f64))
        .collect();
    interpolate_at(track, &corrected, t_ref_ms, mode)
}

/// Core interpolation against precomputed corrected sample times.
fn interpolate_at(
    track: &PoseTrack,
    corrected: &[f64],
    t: f64,
    mode: InterpMode,
) -> Result<PoseSample, TimelineError> {
    let first = corrected[0];
    let last = *corrected.last().unwrap();
    let boundary = if t < first {
        Some(0)
    } else if t > last {
        Some(track.samples.len() - 1)
    } else {
        None
    };
    if let Some(index) = boundary {
        return match mode {
            InterpMode::Strict => Err(TimelineError::OutOfRange { t, first, last }),
            InterpMode::Clamp => {
                let mut sample = track.samples[index].clone();
                sample.idx = 0;
                sample.t_ms = t.round() as i64;
                Ok(sample)
            }
        };
    }

    // Rightmost sample at or before t. An exact hit returns the earliest
    // sample sharing that timestamp (duplicates are legal at 1 ms
    // resolution); otherwise k starts the bracketing interval.
    let mut k = corrected.partition_point(|c| *c <= t) - 1;
    if corrected[k] == t {
        while k > 0 && corrected[k - 1] == t {
            k -= 1;
        }
        let mut sample = track.samples[k].clone();
        sample.idx = 0;
        sample.t_ms = t.round() as i64;
        return Ok(sample);
    }
    // Non-exact and in range, so k+1 exists and the interval has width.
    let span = corrected[k + 1] - corrected[k];
    let u = (t - corrected[k]) / span;
    let mut sample = blend_sample(&track.samples[k], &track.samples[k + 1], u)?;
    sample.t_ms = t.round() as i64;
    Ok(sample)
}

/// Per-stream record at one tick. Serializes with the stable export field
/// names (`frame`, `residual_ms`, `ok`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TickStream {
    #[serde(rename = "frame")]
    pub frame_index: u64,
    pub residual_ms: f64,
    /// False when the residual exceeds half the stream's frame interval.
    pub ok: bool,
}

/// One instant of the uniform tick grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Tick {
    pub tick_index: u64,
    pub t_ref_ms: f64,
    pub streams: BTreeMap<String, TickStream>,
}

/// A session mapped onto a uniform reference-rate grid.
#[derive(Debug, Clone, PartialEq)]
pub struct AlignedTimeline {
    pub rate_hz: f64,
    pub window: (f64, f64),
    pub ticks: Vec<Tick>,
    pub resampled_poses: Option<PoseTrack>,
}

impl AlignedTimeline {
    pub fn tick_count(&self) -> usize {
        self.ticks.len()
    }
}

/// Align a session onto a uniform grid at `rate_hz`.
///
/// The window is the common window over every stream (the poses stream
/// included when present); streams without an entry in `clocks` get the
/// identity clock. Poses are resampled in clamp mode so a track that
/// starts late never aborts the alignment.
pub fn build_timeline(
    session: &Session,
    clocks: &BTreeMap<String, ClockModel>,
    rate_hz: f64,
) -> Result<AlignedTimeline, TimelineError> {
    assert!(rate_hz > 0.0, "rate_hz must be positive");

    let clock_for = |name: &str| -> ClockModel {
        clocks
            .get(name)
            .cloned()
            .unwrap_or_else(|| ClockModel::identity(name))
    };

    let video: Vec<(&StreamMeta, ClockModel)> = session
        .log
        .streams
        .iter()
        .filter(|s| s.role != StreamRole::Poses)
        .map(|s| (s, clock_for(&s.file_name)))
        .collect();
    if video.is_empty() {
        return Err(TimelineError::NoStreams);
    }

    let mut window_streams: Vec<(&StreamMeta, &ClockModel)> =
        video.iter().map(|(meta, clock)| (*meta, clock)).collect();
    let poses_clock = session
        .log
        .streams
        .iter()
        .find(|s| s.role == StreamRole::Poses)
        .map(|s| (s, clock_for(&s.file_name)));
    if let Some((meta, clock)) = &poses_clock {
        window_streams.push((meta, clock));
    }
    let (start, end) = common_window(&window_streams)?;

    let step = 1000.0 / rate_hz;
    let tick_count = ((end - start) * rate_hz / 1000.0).floor() as u64 + 1;

    let pose_corrected: Option<(&PoseTrack, Vec<f64>)> = match (&session.pose_track, &poses_clock) {
        (Some(track), Some((_, clock))) if !track.samples.is_empty() => {
            let corrected = track
                .samples
                .iter()
                .map(|s| apply_clock(clock, s.t_ms as f64))
                .collect();
            Some((track, corrected))
        }
        (Some(track), None) if !track.samples.is_empty() => {
            // Pose file present but undeclared in the log: identity clock.
            let identity = ClockModel::identity("poses.txt");
            let corrected = track
                .samples
                .iter()
                .map(|s| apply_clock(&identity, s.t_ms as f64))
                .collect();
            Some((track, corrected))
        }
        _ => None,
    };

    let mut ticks = Vec::with_capacity(tick_count as usize);
    let mut resampled = pose_corrected
        .as_ref()
        .map(|_| Vec::with_capacity(tick_count as usize));
    for k in 0..tick_count {
        let t = start + k as f64 * step;
        let mut streams = BTreeMap::new();
        for (meta, clock) in &video {
            let (frame_index, residual_ms) = nearest_frame(meta, clock, t);
            let tolerance = meta
                .effective_fps()
                .map(|fps| 500.0 / fps)
                .unwrap_or(f64::INFINITY);
            streams.insert(
                meta.file_name.clone(),
                TickStream {
                    frame_index,
                    residual_ms,
                    ok: residual_ms.abs() <= tolerance,
                },
            );
        }
        if let (Some(out), Some((track, corrected))) = (&mut resampled, &pose_corrected) {
            let mut sample = interpolate_at(track, corrected, t, InterpMode::Clamp)?;
            sample.idx = k;
            out.push(sample);
        }
        ticks.push(Tick {
            tick_index: k,
            t_ref_ms: t,
            streams,
        });
    }

    Ok(AlignedTimeline {
        rate_hz,
        window: (start, end),
        ticks,
        resampled_poses: resampled.map(|samples| PoseTrack { samples }),
    })
}

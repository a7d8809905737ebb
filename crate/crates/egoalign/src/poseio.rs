//! Parser, writer, and validator for `poses.txt`: per-frame head pose plus
//! 26 joints per hand in OpenXR XR_HAND_JOINT order.
//!
//! Every data line carries exactly 373 whitespace-separated fields:
//! `idx t_ms` (integers), 7 head fields, then 26 x 7 per hand. Reals are
//! written with 6 fractional digits, so already-quantized tracks round-trip
//! exactly.

use thiserror::Error;

use crate::model::{Finding, FindingCode, Severity};

/// Fields per data line: idx, t_ms, head (3 + 4), 52 hand joints x 7.
pub const FIELDS_PER_LINE: usize = 2 + 7 + 26 * 7 + 26 * 7;

/// Joints per hand in OpenXR XR_HAND_JOINT order.
pub const JOINTS_PER_HAND: usize = 26;

/// OpenXR joint names by slot: 0=Palm, 1=Wrist, 2-5=Thumb(M,P,D,T),
/// 6-10=Index(M,P,I,D,T), 11-15=Middle, 16-20=Ring, 21-25=Little.
pub const JOINT_NAMES: [&str; JOINTS_PER_HAND] = [
    "Palm",
    "Wrist",
    "ThumbMetacarpal",
    "ThumbProximal",
    "ThumbDistal",
    "ThumbTip",
    "IndexMetacarpal",
    "IndexProximal",
    "IndexIntermediate",
    "IndexDistal",
    "IndexTip",
    "MiddleMetacarpal",
    "MiddleProximal",
    "MiddleIntermediate",
    "MiddleDistal",
    "MiddleTip",
    "RingMetacarpal",
    "RingProximal",
    "RingIntermediate",
    "RingDistal",
    "RingTip",
    "LittleMetacarpal",
    "LittleProximal",
    "LittleIntermediate",
    "LittleDistal",
    "LittleTip",
];

/// The two schema comment lines, written verbatim at the top of the file.
pub const HEADER_LINES: &str = "\
# idx t_ms head_pos(x y z) head_rot(x y z w) left[26]:(pos+rot) right[26]:(pos+rot)
# joints in OpenXR XR_HAND_JOINT order: 0=Palm 1=Wrist 2..5=Thumb(M,P,D,T) 6..10=Index(M,P,I,D,T) 11..15=Middle 16..20=Ring 21..25=Little
";

/// Position plus rotation of one tracked transform. Rotation is a
/// quaternion in (x, y, z, w) order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JointPose {
    pub position: [f64; 3],
    pub rotation: [f64; 4],
}

impl JointPose {
    pub const IDENTITY: JointPose = JointPose {
        position: [0.0; 3],
        rotation: [0.0, 0.0, 0.0, 1.0],
    };

    pub fn rotation_norm(&self) -> f64 {
        self.rotation.iter().map(|c| c * c).sum::<f64>().sqrt()
    }
}

impl Default for JointPose {
    fn default() -> Self {
        JointPose::IDENTITY
    }
}

/// One line of the pose file: head plus both hands, 53 transforms total.
#[derive(Debug, Clone, PartialEq)]
pub struct PoseSample {
    pub idx: u64,
    pub t_ms: i64,
    pub head: JointPose,
    pub left_hand: [JointPose; JOINTS_PER_HAND],
    pub right_hand: [JointPose; JOINTS_PER_HAND],
}

impl PoseSample {
    pub fn identity(idx: u64, t_ms: i64) -> PoseSample {
        PoseSample {
            idx,
            t_ms,
            head: JointPose::IDENTITY,
            left_hand: [JointPose::IDENTITY; JOINTS_PER_HAND],
            right_hand: [JointPose::IDENTITY; JOINTS_PER_HAND],
        }
    }

    /// All 53 transforms in serialization order: head, left joints, right
    /// joints.
    pub fn transforms(&self) -> impl Iterator<Item = &JointPose> {
        std::iter::once(&self.head)
            .chain(self.left_hand.iter())
            .chain(self.right_hand.iter())
    }
}

/// An ordered pose log. Frame indices are strictly increasing and
/// timestamps non-decreasing (duplicates are legal at 1 ms resolution).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PoseTrack {
    pub samples: Vec<PoseSample>,
}

impl PoseTrack {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum PoseParseError {
    #[error("line {line}: expected {expected} fields, found {found}")]
    FieldCount {
        line: usize,
        expected: usize,
        found: usize,
    },
    #[error("line {line}, field {col}: cannot parse {value:?} as a number")]
    BadNumber {
        line: usize,
        col: usize,
        value: String,
    },
    #[error("line {line}: frame index {idx} does not increase over {prev}")]
    NonMonotonicIdx { line: usize, idx: u64, prev: u64 },
    #[error("line {line}: timestamp {t_ms} decreases below {prev}")]
    DecreasingTime { line: usize, t_ms: i64, prev: i64 },
}

#[derive(Debug, Error, PartialEq)]
pub enum PoseSerializeError {
    #[error("sample {at}: {reason}")]
    InvariantViolation { at: usize, reason: String },
}

fn parse_int<T: std::str::FromStr>(
    line: usize,
    col: usize,
    token: &str,
) -> Result<T, PoseParseError> {
    // Timestamps are integer milliseconds; sub-millisecond values are
    // rejected rather than silently truncated.
    token.parse().map_err(|_| PoseParseError::BadNumber {
        line,
        col,
        value: token.to_owned(),
    })
}

fn parse_real(line: usize, col: usize, token: &str) -> Result<f64, PoseParseError> {
    let v: f64 = token.parse().map_err(|_| PoseParseError::BadNumber {
        line,
        col,
        value: token.to_owned(),
    })?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(PoseParseError::BadNumber {
            line,
            col,
            value: token.to_owned(),
        })
    }
}

/// Parse a pose file. `#` lines are comments; blank lines are ignored.
pub fn parse_pose_file(text: &str) -> Result<PoseTrack, PoseParseError> {
    let mut samples: Vec<PoseSample> = Vec::new();

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let tokens: Vec<&str> = line.split_whitespace().collect();
        if tokens.len() != FIELDS_PER_LINE {
            return Err(PoseParseError::FieldCount {
                line: line_no,
                expected: FIELDS_PER_LINE,
                found: tokens.len(),
            });
        }

        let frame_idx: u64 = parse_int(line_no, 0, tokens[0])?;
        let t_ms: i64 = parse_int(line_no, 1, tokens[1])?;
        let mut cursor = 2;
        let mut next_joint = |tokens: &[&str]| -> Result<JointPose, PoseParseError> {
            let mut fields = [0.0; 7];
            for (k, field) in fields.iter_mut().enumerate() {
                *field = parse_real(line_no, cursor + k, tokens[cursor + k])?;
            }
            cursor += 7;
            Ok(JointPose {
                position: [fields[0], fields[1], fields[2]],
                rotation: [fields[3], fields[4], fields[5], fields[6]],
            })
        };

        let head = next_joint(&tokens)?;
        let mut left_hand = [JointPose::IDENTITY; JOINTS_PER_HAND];
        for joint in &mut left_hand {
            *joint = next_joint(&tokens)?;
        }
        let mut right_hand = [JointPose::IDENTITY; JOINTS_PER_HAND];
        for joint in &mut right_hand {
            *joint = next_joint(&tokens)?;
        }

        if let Some(prev) = samples.last() {
            if frame_idx <= prev.idx {
                return Err(PoseParseError::NonMonotonicIdx {
                    line: line_no,
                    idx: frame_idx,
                    prev: prev.idx,
                });
            }
            if t_ms < prev.t_ms {
                return Err(PoseParseError::DecreasingTime {
                    line: line_no,
                    t_ms,
                    prev: prev.t_ms,
                });
            }
        }
        samples.push(PoseSample {
            idx: frame_idx,
            t_ms,
            head,
            left_hand,
            right_hand,
        });
    }
    Ok(PoseTrack { samples })
}

/// Serialize a track: the two schema header lines, then one line per
/// sample with all reals at 6 fractional digits.
pub fn serialize_pose_file(track: &PoseTrack) -> Result<String, PoseSerializeError> {
    use std::fmt::Write as _;

    let mut prev: Option<(u64, i64)> = None;
    for (at, sample) in track.samples.iter().enumerate() {
        if let Some((prev_idx, prev_t)) = prev {
            if sample.idx <= prev_idx {
                return Err(PoseSerializeError::InvariantViolation {
                    at,
                    reason: format!("idx {} does not increase over {prev_idx}", sample.idx),
                });
            }
            if sample.t_ms < prev_t {
                return Err(PoseSerializeError::InvariantViolation {
                    at,
                    reason: format!("t_ms {} decreases below {prev_t}", sample.t_ms),
                });
            }
        }
        prev = Some((sample.idx, sample.t_ms));
    }

    let mut out = String::with_capacity(HEADER_LINES.len() + track.samples.len() * 2800);
    out.push_str(HEADER_LINES);
    for sample in &track.samples {
        write!(out, "{} {}", sample.idx, sample.t_ms).unwrap();
        for joint in sample.transforms() {
            for v in joint.position.iter().chain(joint.rotation.iter()) {
                write!(out, " {v:.6}").unwrap();
            }
        }
        out.push('\n');
    }
    Ok(out)
}

/// Round a value to what it will read back as after 6-digit serialization.
pub fn quantize(v: f64) -> f64 {
    format!("{v:.6}").parse().unwrap()
}

/// Quantize every real field of a track to the serialized precision.
pub fn quantize_track(track: &PoseTrack) -> PoseTrack {
    let q = |j: &JointPose| JointPose {
        position: j.position.map(quantize),
        rotation: j.rotation.map(quantize),
    };
    PoseTrack {
        samples: track
            .samples
            .iter()
            .map(|s| PoseSample {
                idx: s.idx,
                t_ms: s.t_ms,
                head: q(&s.head),
                left_hand: s.left_hand.map(|j| q(&j)),
                right_hand: s.right_hand.map(|j| q(&j)),
            })
            .collect(),
    }
}

/// Validate a track: quaternion norms, frame-index gaps, timing gaps
/// (only when a nominal rate is given), and duplicate timestamps.
pub fn validate_pose_track(
    track: &PoseTrack,
    quat_tol: f64,
    max_gap_factor: f64,
    nominal_rate_hz: Option<f64>,
) -> Vec<Finding> {
    let mut findings = Vec::new();

    for sample in &track.samples {
        let mut check = |slot: String, joint: &JointPose| {
            let norm = joint.rotation_norm();
            if (norm - 1.0).abs() > quat_tol {
                findings.push(Finding::new(
                    Severity::Error,
                    FindingCode::QuatNorm,
                    Some("poses.txt"),
                    format!(
                        "sample idx {}: {slot} quaternion norm {norm:.6} outside 1 +/- {quat_tol}",
                        sample.idx
                    ),
                ));
            }
        };
        check("head".to_owned(), &sample.head);
        for (j, joint) in sample.left_hand.iter().enumerate() {
            check(format!("left {}", JOINT_NAMES[j]), joint);
        }
        for (j, joint) in sample.right_hand.iter().enumerate() {
            check(format!("right {}", JOINT_NAMES[j]), joint);
        }
    }

    let max_interval_ms = nominal_rate_hz.map(|rate| max_gap_factor * 1000.0 / rate);
    for pair in track.samples.windows(2) {
        let (a, b) = (&pair[0], &pair[1]);
        if b.idx != a.idx + 1 {
            findings.push(Finding::new(
                Severity::Warning,
                FindingCode::IdxGap,
                Some("poses.txt"),
                format!("frame index jumps from {} to {}", a.idx, b.idx),
            ));
        }
        if let Some(max_interval) = max_interval_ms {
            let dt = (b.t_ms - a.t_ms) as f64;
            if dt > max_interval {
                findings.push(Finding::new(
                    Severity::Warning,
                    FindingCode::TimeGap,
                    Some("poses.txt"),
                    format!(
                        "interval {dt:.0} ms between idx {} and {} exceeds {max_interval:.1} ms",
                        a.idx, b.idx
                    ),
                ));
            }
        }
        if b.t_ms == a.t_ms {
            findings.push(Finding::new(
                Severity::Info,
                FindingCode::TimeDup,
                Some("poses.txt"),
                format!("idx {} and {} share timestamp {} ms", a.idx, b.idx, a.t_ms),
            ));
        }
    }
    findings
}

//! Toolkit for multi-camera egocentric capture sessions: session discovery
//! and validation, log and pose file parsing, MP4 metadata probing, clock
//! offset/drift estimation from anchor observations, and uniform-rate
//! temporal alignment with pose resampling.
//!
//! A session is a folder holding per-camera video files, a `log.txt`
//! describing every stream (frame counts, first/last epoch-millisecond
//! timestamps), and optionally a `poses.txt` with head and 26-joint hand
//! transforms. Streams from independent devices carry independent clocks;
//! [`sync`] fits affine corrections from anchor observations and
//! [`timeline`] maps everything onto one uniform tick grid.
//!
//! [`synth`] fabricates complete sessions with known ground truth so every
//! stage can be verified without capture hardware.

pub mod logparse;
pub mod model;
pub mod mp4probe;
pub mod poseio;
pub mod sync;
pub mod synth;
pub mod timeline;

pub use model::{
    builtin_profiles, merge_sessions, scan_session, validate_session, DeviceProfile, Finding,
    FindingCode, Session, SessionDialect, SessionLog, Severity, StreamMeta, StreamRole,
    TrackingSupport, ValidationReport, VideoFormat,
};
pub use sync::{fit_clock, AnchorObservation, ClockModel, FitMode, ResidualStats};
pub use timeline::{build_timeline, AlignedTimeline};

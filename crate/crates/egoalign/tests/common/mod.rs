//! Shared fixture builders for integration tests.
#![allow(dead_code)] // each test binary uses a different subset

use std::path::Path;

use egoalign::poseio::{self, PoseSample, PoseTrack};

pub const BASIC_LOG: &str = include_str!("../data/session_basic.log");
pub const EXTENDED_LOG: &str = include_str!("../data/session_extended.log");

/// Materialize the basic-dialect fixture as a session folder with zero-byte
/// video files.
pub fn basic_fixture_dir(dir: &Path) {
    std::fs::create_dir_all(dir).unwrap();
    std::fs::write(dir.join("log.txt"), BASIC_LOG).unwrap();
    for name in ["internal.mp4", "usb1.mp4", "usb2.mp4"] {
        std::fs::write(dir.join(name), b"").unwrap();
    }
}

/// Materialize the extended-dialect fixture as a session folder. The pose
/// file is synthesized to match its declared block: 2622 identity samples
/// spanning the declared first/last timestamps.
pub fn extended_fixture_dir(dir: &Path) {
    std::fs::create_dir_all(dir).unwrap();
    std::fs::write(dir.join("log.txt"), EXTENDED_LOG).unwrap();
    for name in ["internal.mp4", "usb1.mp4", "usb2.mp4"] {
        std::fs::write(dir.join(name), b"").unwrap();
    }
    std::fs::write(dir.join("poses.txt"), extended_fixture_poses()).unwrap();
}

pub fn extended_fixture_poses() -> String {
    let (first, span, count) = (1_778_528_808_795i64, 29_358i64, 2622i64);
    let samples = (0..count)
        .map(|i| {
            let t = first + (i as f64 * span as f64 / (count - 1) as f64).round() as i64;
            PoseSample::identity(i as u64, t)
        })
        .collect();
    poseio::serialize_pose_file(&PoseTrack { samples }).unwrap()
}

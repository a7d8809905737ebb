//! End-to-end tests against the compiled binary: exit-code contract, JSON
//! output shapes, and the gen -> sync -> align pipeline.

use std::collections::BTreeMap;
use std::path::Path;
use std::process::{Command, Output};

use egoalign::poseio::{self, PoseSample, PoseTrack};
use egoalign::sync::ClockModel;
use egoalign::timeline::frame_time;
use tempfile::TempDir;

fn egoalign(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_egoalign"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(output: &Output) -> String {
    String::from_utf8_lossy(&output.stdout).into_owned()
}

fn code(output: &Output) -> i32 {
    output.status.code().expect("no signal")
}

/// The extended-dialect session folder: fixture log, zero-byte videos, and
/// a pose file synthesized to match its declared block.
fn extended_fixture_dir(dir: &Path) {
    const LOG: &str = include_str!("../../egoalign/tests/data/session_extended.log");
    std::fs::create_dir_all(dir).unwrap();
    std::fs::write(dir.join("log.txt"), LOG).unwrap();
    for name in ["internal.mp4", "usb1.mp4", "usb2.mp4"] {
        std::fs::write(dir.join(name), b"").unwrap();
    }
    let (first, span, count) = (1_778_528_808_795i64, 29_358i64, 2622i64);
    let samples = (0..count)
        .map(|i| {
            let t = first + (i as f64 * span as f64 / (count - 1) as f64).round() as i64;
            PoseSample::identity(i as u64, t)
        })
        .collect();
    let text = poseio::serialize_pose_file(&PoseTrack { samples }).unwrap();
    std::fs::write(dir.join("poses.txt"), text).unwrap();
}

#[test]
fn generated_session_validates_clean_with_exit_zero() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path().join("session");
    let out = egoalign(&[
        "gen",
        "--device",
        "quest3",
        "--duration",
        "10",
        "--seed",
        "42",
        "--out",
        dir.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{out:?}");

    let out = egoalign(&["validate", dir.to_str().unwrap(), "--profile", "quest3"]);
    assert_eq!(code(&out), 0, "{}", stdout(&out));
    assert!(stdout(&out).contains("0 error(s)"));
}

#[test]
fn validate_reports_rate_deviations_on_the_fixture() {
    let tmp = TempDir::new().unwrap();
    extended_fixture_dir(tmp.path());
    let out = egoalign(&[
        "validate",
        tmp.path().to_str().unwrap(),
        "--profile",
        "pico4ultra",
    ]);
    assert_eq!(code(&out), 0, "warnings only: {}", stdout(&out));
    let text = stdout(&out);
    assert!(text.contains("FPS_DEVIATION"));
    assert!(text.contains("usb1.mp4") && text.contains("usb2.mp4"));
    // The internal camera and the pose log are on-rate.
    for line in text.lines().filter(|l| l.contains("FPS_DEVIATION")) {
        assert!(!line.contains("internal.mp4") && !line.contains("poses.txt"));
    }
}

#[test]
fn validate_json_emits_one_parseable_finding_per_line() {
    let tmp = TempDir::new().unwrap();
    extended_fixture_dir(tmp.path());
    let out = egoalign(&[
        "validate",
        tmp.path().to_str().unwrap(),
        "--profile",
        "pico4ultra",
        "--json",
    ]);
    assert_eq!(code(&out), 0);
    let text = stdout(&out);
    assert!(!text.trim().is_empty());
    let mut saw_deviation = false;
    for line in text.lines() {
        let value: serde_json::Value = serde_json::from_str(line).expect("each line is JSON");
        for key in ["severity", "code", "message"] {
            assert!(value.get(key).is_some(), "missing {key} in {line}");
        }
        if value["code"] == "FPS_DEVIATION" {
            saw_deviation = true;
        }
    }
    assert!(saw_deviation);
}

#[test]
fn validate_missing_directory_exits_three() {
    let out = egoalign(&["validate", "/nonexistent/egoalign-test-dir"]);
    assert_eq!(code(&out), 3);
}

#[test]
fn validate_error_findings_exit_one() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path().join("session");
    egoalign(&[
        "gen",
        "--device",
        "android",
        "--duration",
        "5",
        "--seed",
        "9",
        "--out",
        dir.to_str().unwrap(),
    ]);
    std::fs::remove_file(dir.join("usb1.mp4")).unwrap();
    let out = egoalign(&["validate", dir.to_str().unwrap()]);
    assert_eq!(code(&out), 1);
    assert!(stdout(&out).contains("FILE_MISSING"));
}

#[test]
fn unknown_device_and_unknown_profile_exit_two() {
    let tmp = TempDir::new().unwrap();
    let out = egoalign(&[
        "gen",
        "--device",
        "nosuch",
        "--out",
        tmp.path().join("x").to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 2);

    let dir = tmp.path().join("session");
    egoalign(&[
        "gen",
        "--device",
        "android",
        "--duration",
        "4",
        "--out",
        dir.to_str().unwrap(),
    ]);
    let out = egoalign(&["validate", dir.to_str().unwrap(), "--profile", "nosuch"]);
    assert_eq!(code(&out), 2);
}

#[test]
fn sync_fits_a_constant_offset_file() {
    let tmp = TempDir::new().unwrap();
    let csv = tmp.path().join("anchors.csv");
    std::fs::write(
        &csv,
        "stream,ts_ms,ref_ms\ncam.mp4,1000,1250\ncam.mp4,2000,2250\ncam.mp4,3000,3250\n",
    )
    .unwrap();
    let out = egoalign(&["sync", "--anchors", csv.to_str().unwrap()]);
    assert_eq!(code(&out), 0);
    assert!(
        stdout(&out).contains("offset 250.000 ms"),
        "{}",
        stdout(&out)
    );
}

#[test]
fn sync_errors_on_malformed_csv_and_insufficient_anchors() {
    let tmp = TempDir::new().unwrap();
    let bad = tmp.path().join("bad.csv");
    std::fs::write(&bad, "time,ref\n1,2\n").unwrap();
    let out = egoalign(&["sync", "--anchors", bad.to_str().unwrap()]);
    assert_eq!(code(&out), 2);

    let single = tmp.path().join("single.csv");
    std::fs::write(&single, "stream,ts_ms,ref_ms\ncam.mp4,1000,1250\n").unwrap();
    let out = egoalign(&[
        "sync",
        "--anchors",
        single.to_str().unwrap(),
        "--mode",
        "drift",
    ]);
    assert_eq!(code(&out), 1);
}

#[test]
fn sync_recovers_generator_clocks_into_clocks_json() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path().join("session");
    egoalign(&[
        "gen",
        "--device",
        "quest3",
        "--duration",
        "8",
        "--seed",
        "5",
        "--offset",
        "137",
        "--drift",
        "20",
        "--out",
        dir.to_str().unwrap(),
    ]);
    let clocks_path = tmp.path().join("clocks.json");
    let out = egoalign(&[
        "sync",
        "--anchors",
        dir.join("anchors.csv").to_str().unwrap(),
        "--mode",
        "drift",
        "--out",
        clocks_path.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0);

    let clocks: BTreeMap<String, serde_json::Value> =
        serde_json::from_str(&std::fs::read_to_string(&clocks_path).unwrap()).unwrap();
    let truth = egoalign::synth::load_ground_truth(&dir.join("ground_truth.json")).unwrap();
    assert_eq!(clocks.len(), truth.streams.len());
    for (stream, entry) in &clocks {
        let expected = &truth.streams[stream].clock;
        assert!((entry["offset_ms"].as_f64().unwrap() - expected.offset_ms).abs() < 1e-6);
        assert!((entry["drift_ppm"].as_f64().unwrap() - expected.drift_ppm).abs() < 1e-6);
    }
}

#[test]
fn align_reports_the_fixture_window_and_tick_count() {
    let tmp = TempDir::new().unwrap();
    extended_fixture_dir(tmp.path());
    let out_dir = tmp.path().join("aligned");
    let out = egoalign(&[
        "align",
        tmp.path().to_str().unwrap(),
        "--rate",
        "30",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{out:?}");
    let text = stdout(&out);
    assert!(text.contains("29358 ms"), "{text}");
    assert!(text.contains("881 ticks"), "{text}");

    let jsonl = std::fs::read_to_string(out_dir.join("alignment.jsonl")).unwrap();
    let lines: Vec<&str> = jsonl.lines().collect();
    assert_eq!(lines.len(), 881);
    let first: serde_json::Value = serde_json::from_str(lines[0]).unwrap();
    assert_eq!(first["tick_index"], 0);
    assert_eq!(first["t_ref_ms"], 1_778_528_808_795.0);
    for stream in ["internal.mp4", "usb1.mp4", "usb2.mp4"] {
        let entry = &first["streams"][stream];
        assert!(entry.get("frame").is_some());
        assert!(entry.get("residual_ms").is_some());
        assert!(entry.get("ok").is_some());
    }

    // Resampled poses reuse the pose-file format on the tick grid.
    let resampled = std::fs::read_to_string(out_dir.join("poses_resampled.txt")).unwrap();
    let track = poseio::parse_pose_file(&resampled).unwrap();
    assert_eq!(track.samples.len(), 881);
}

#[test]
fn merged_alignment_matches_the_ground_truth_argmin() {
    let tmp = TempDir::new().unwrap();
    let host_dir = tmp.path().join("host");
    let comp_dir = tmp.path().join("companion");
    egoalign(&[
        "gen",
        "--device",
        "quest3",
        "--duration",
        "6",
        "--seed",
        "60",
        "--out",
        host_dir.to_str().unwrap(),
    ]);
    egoalign(&[
        "gen",
        "--device",
        "android",
        "--duration",
        "6",
        "--seed",
        "61",
        "--offset",
        "137",
        "--no-ego",
        "--out",
        comp_dir.to_str().unwrap(),
    ]);

    let truth_host =
        egoalign::synth::load_ground_truth(&host_dir.join("ground_truth.json")).unwrap();
    let truth_comp =
        egoalign::synth::load_ground_truth(&comp_dir.join("ground_truth.json")).unwrap();

    // One anchor file covering both folders under prefixed stream ids.
    let mut csv = String::from("stream,ts_ms,ref_ms\n");
    for (truth, id) in [
        (&truth_host, &truth_host.session_id),
        (&truth_comp, &truth_comp.session_id),
    ] {
        for anchor in &truth.anchors {
            csv.push_str(&format!(
                "{id}/{},{},{}\n",
                anchor.stream_id, anchor.stream_ts_ms, anchor.ref_ts_ms
            ));
        }
    }
    let anchors_path = tmp.path().join("anchors.csv");
    std::fs::write(&anchors_path, csv).unwrap();
    let clocks_path = tmp.path().join("clocks.json");
    let out = egoalign(&[
        "sync",
        "--anchors",
        anchors_path.to_str().unwrap(),
        "--mode",
        "drift",
        "--out",
        clocks_path.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0);

    let aligned = tmp.path().join("aligned");
    let out = egoalign(&[
        "align",
        host_dir.to_str().unwrap(),
        comp_dir.to_str().unwrap(),
        "--clocks",
        clocks_path.to_str().unwrap(),
        "--rate",
        "30",
        "--out",
        aligned.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{out:?}");

    // Re-derive every tick's nearest frame exhaustively from the ground
    // truth clocks and the declared stream grids.
    let clocks: BTreeMap<String, serde_json::Value> =
        serde_json::from_str(&std::fs::read_to_string(&clocks_path).unwrap()).unwrap();
    let sessions = [
        (
            egoalign::model::scan_session(&host_dir).unwrap(),
            &truth_host,
        ),
        (
            egoalign::model::scan_session(&comp_dir).unwrap(),
            &truth_comp,
        ),
    ];
    let jsonl = std::fs::read_to_string(aligned.join("alignment.jsonl")).unwrap();
    let mut checked = 0;
    for line in jsonl.lines() {
        let row: serde_json::Value = serde_json::from_str(line).unwrap();
        let t = row["t_ref_ms"].as_f64().unwrap();
        for (name, entry) in row["streams"].as_object().unwrap() {
            let (prefix, bare) = name.split_once('/').unwrap();
            let (session, _) = sessions
                .iter()
                .find(|(_, truth)| truth.session_id == prefix)
                .unwrap();
            let meta = session.log.stream(bare).unwrap();
            let c = &clocks[name];
            let clock = ClockModel {
                stream_id: name.clone(),
                offset_ms: c["offset_ms"].as_f64().unwrap(),
                drift_ppm: c["drift_ppm"].as_f64().unwrap(),
                t0_ms: c["t0_ms"].as_f64().unwrap(),
            };
            let mut best = (0u64, f64::INFINITY);
            for i in 0..meta.total_frames {
                let d = (frame_time(meta, &clock, i) - t).abs();
                if d < best.1 {
                    best = (i, d);
                }
            }
            assert_eq!(entry["frame"].as_u64().unwrap(), best.0, "{name} at {t}");
            checked += 1;
        }
    }
    assert!(checked > 500, "expected a real grid, checked {checked}");
}

#[test]
fn disjoint_sessions_exit_one_on_empty_overlap() {
    let tmp = TempDir::new().unwrap();
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    // Seeds place session starts 50000 s apart; 5 s sessions cannot overlap.
    egoalign(&[
        "gen",
        "--device",
        "android",
        "--duration",
        "5",
        "--seed",
        "0",
        "--out",
        a.to_str().unwrap(),
    ]);
    egoalign(&[
        "gen",
        "--device",
        "android",
        "--duration",
        "5",
        "--seed",
        "50000",
        "--out",
        b.to_str().unwrap(),
    ]);
    let out = egoalign(&["align", a.to_str().unwrap(), b.to_str().unwrap()]);
    assert_eq!(code(&out), 1, "{out:?}");
}

#[test]
fn gen_is_deterministic_and_avp_has_one_wrist() {
    let tmp = TempDir::new().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for dir in [&a, &b] {
        let out = egoalign(&[
            "gen",
            "--device",
            "avp",
            "--duration",
            "5",
            "--seed",
            "8",
            "--jitter",
            "1.5",
            "--out",
            dir.to_str().unwrap(),
        ]);
        assert_eq!(code(&out), 0);
    }
    let log_a = std::fs::read(a.join("log.txt")).unwrap();
    let log_b = std::fs::read(b.join("log.txt")).unwrap();
    assert_eq!(log_a, log_b);

    let text = String::from_utf8(log_a).unwrap();
    assert!(text.contains("usb1.mov"));
    assert!(!text.contains("usb2"), "single wrist camera on this host");
}

#[test]
fn align_output_is_deterministic_across_runs() {
    let tmp = TempDir::new().unwrap();
    extended_fixture_dir(tmp.path());
    let (out_a, out_b) = (tmp.path().join("a"), tmp.path().join("b"));
    for out_dir in [&out_a, &out_b] {
        let out = egoalign(&[
            "align",
            tmp.path().to_str().unwrap(),
            "--rate",
            "30",
            "--out",
            out_dir.to_str().unwrap(),
        ]);
        assert_eq!(code(&out), 0);
    }
    for name in ["alignment.jsonl", "poses_resampled.txt"] {
        let a = std::fs::read(out_a.join(name)).unwrap();
        let b = std::fs::read(out_b.join(name)).unwrap();
        assert_eq!(a, b, "{name} differs between identical runs");
    }
}

#[test]
fn scan_json_is_line_delimited() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path().join("session");
    egoalign(&[
        "gen",
        "--device",
        "android",
        "--duration",
        "4",
        "--seed",
        "2",
        "--out",
        dir.to_str().unwrap(),
    ]);
    let out = egoalign(&["scan", dir.to_str().unwrap(), "--json"]);
    assert_eq!(code(&out), 0);
    let text = stdout(&out);
    assert_eq!(text.lines().count(), 3);
    for line in text.lines() {
        let value: serde_json::Value = serde_json::from_str(line).unwrap();
        assert!(value.get("file_name").is_some());
        assert!(value.get("session_id").is_some());
    }
}

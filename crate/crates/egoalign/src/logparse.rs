//! Parser and canonical writer for the two session `log.txt` dialects.
//!
//! The basic dialect spells timestamps as `First frame timestamp: X ms`;
//! the extended dialect adds `Started:`/`Ended:` wall-clock lines and
//! spells the keys as `First frame timestamp (unix ms): X`. The parser is
//! byte-tolerant (free field order, decorative separators, arbitrary
//! whitespace after `:`); the writer emits one canonical form per dialect.

use thiserror::Error;

use crate::model::{SessionDialect, SessionLog, StreamMeta, StreamRole};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum LogParseError {
    #[error("missing 'Recording Session:' header line")]
    MissingHeader,
    #[error("line {line}: block for {file:?} lacks required field '{missing}'")]
    MalformedBlock {
        line: usize,
        file: String,
        missing: &'static str,
    },
    #[error("line {line}: duplicate stream file name {file:?}")]
    DuplicateFile { line: usize, file: String },
    #[error("line {line}: expected an integer for '{key}', got {value:?}")]
    BadInteger {
        line: usize,
        key: String,
        value: String,
    },
    #[error("line {line}: field '{key}' appears before any 'File:' line")]
    FieldOutsideBlock { line: usize, key: String },
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum LogSerializeError {
    #[error("extended dialect requested but the log has no started/ended wall-clock strings")]
    DialectMismatch,
}

/// Collapse interior whitespace runs so `timestamp  (unix ms)` and
/// `timestamp (unix ms)` compare equal.
fn normalize_key(key: &str) -> String {
    key.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn parse_u64(line: usize, key: &str, value: &str) -> Result<u64, LogParseError> {
    value.parse().map_err(|_| LogParseError::BadInteger {
        line,
        key: key.to_owned(),
        value: value.to_owned(),
    })
}

fn parse_i64(line: usize, key: &str, value: &str) -> Result<i64, LogParseError> {
    value.parse().map_err(|_| LogParseError::BadInteger {
        line,
        key: key.to_owned(),
        value: value.to_owned(),
    })
}

/// Strip a trailing bare `ms` unit from a basic-dialect value.
fn strip_ms_suffix(value: &str) -> &str {
    value.strip_suffix("ms").map(str::trim_end).unwrap_or(value)
}

#[derive(Default)]
struct BlockBuilder {
    start_line: usize,
    file_name: String,
    source_label: Option<String>,
    total_frames: Option<u64>,
    first_ts_ms: Option<i64>,
    last_ts_ms: Option<i64>,
    duration_ms: Option<i64>,
    extras: Vec<(String, String)>,
}

impl BlockBuilder {
    fn finish(self) -> Result<StreamMeta, LogParseError> {
        let missing = |field: &'static str| LogParseError::MalformedBlock {
            line: self.start_line,
            file: self.file_name.clone(),
            missing: field,
        };
        let source_label = self.source_label.clone().ok_or_else(|| missing("Source"))?;
        Ok(StreamMeta {
            role: StreamRole::from_source_label(&source_label),
            source_label,
            total_frames: self.total_frames.ok_or_else(|| missing("Total frames"))?,
            first_ts_ms: self
                .first_ts_ms
                .ok_or_else(|| missing("First frame timestamp"))?,
            last_ts_ms: self
                .last_ts_ms
                .ok_or_else(|| missing("Last frame timestamp"))?,
            duration_ms: self.duration_ms.ok_or_else(|| missing("Duration"))?,
            file_name: self.file_name,
            extras: self.extras,
        })
    }
}

/// Parse a session log in either dialect.
///
/// Dialect is auto-detected: extended iff a `Started:` line appears before
/// the separator or any timestamp key carries `(unix ms)`. Both key
/// spellings are accepted in either dialect.
pub fn parse_session_log(text: &str) -> Result<SessionLog, LogParseError> {
    let mut session_id = None;
    let mut started = None;
    let mut ended = None;
    let mut saw_unix_ms_key = false;
    let mut streams: Vec<StreamMeta> = Vec::new();
    let mut block: Option<BlockBuilder> = None;

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.chars().all(|c| c == '=') {
            continue;
        }
        let Some((key, value)) = line.split_once(':') else {
            continue; // stray decoration; tolerated
        };
        let key = normalize_key(key);
        let value = value.trim();

        match key.as_str() {
            "Recording Session" => {
                if session_id.is_none() {
                    session_id = Some(value.to_owned());
                }
            }
            "Started" => started = Some(value.to_owned()),
            "Ended" => ended = Some(value.to_owned()),
            "File" => {
                if let Some(done) = block.take() {
                    streams.push(done.finish()?);
                }
                if streams.iter().any(|s| s.file_name == value) {
                    return Err(LogParseError::DuplicateFile {
                        line: line_no,
                        file: value.to_owned(),
                    });
                }
                block = Some(BlockBuilder {
                    start_line: line_no,
                    file_name: value.to_owned(),
                    ..BlockBuilder::default()
                });
            }
            _ => {
                let Some(b) = block.as_mut() else {
                    // Header-area lines other than the known keys are
                    // ignored; block fields before any File: line are not.
                    if matches!(
                        key.as_str(),
                        "Source"
                            | "Total frames"
                            | "First frame timestamp"
                            | "First frame timestamp (unix ms)"
                            | "Last frame timestamp"
                            | "Last frame timestamp (unix ms)"
                            | "Duration"
                            | "Duration (ms)"
                    ) {
                        return Err(LogParseError::FieldOutsideBlock { line: line_no, key });
                    }
                    continue;
                };
                match key.as_str() {
                    "Source" => b.source_label = Some(value.to_owned()),
                    "Total frames" => b.total_frames = Some(parse_u64(line_no, &key, value)?),
                    "First frame timestamp" => {
                        b.first_ts_ms = Some(parse_i64(line_no, &key, strip_ms_suffix(value))?)
                    }
                    "First frame timestamp (unix ms)" => {
                        saw_unix_ms_key = true;
                        b.first_ts_ms = Some(parse_i64(line_no, &key, value)?)
                    }
                    "Last frame timestamp" => {
                        b.last_ts_ms = Some(parse_i64(line_no, &key, strip_ms_suffix(value))?)
                    }
                    "Last frame timestamp (unix ms)" => {
                        saw_unix_ms_key = true;
                        b.last_ts_ms = Some(parse_i64(line_no, &key, value)?)
                    }
                    "Duration" => {
                        b.duration_ms = Some(parse_i64(line_no, &key, strip_ms_suffix(value))?)
                    }
                    "Duration (ms)" => b.duration_ms = Some(parse_i64(line_no, &key, value)?),
                    _ => b.extras.push((key, value.to_owned())),
                }
            }
        }
    }
    let session_id = session_id.ok_or(LogParseError::MissingHeader)?;
    if let Some(done) = block.take() {
        streams.push(done.finish()?);
    }
    let dialect = if started.is_some() || saw_unix_ms_key {
        SessionDialect::Extended
    } else {
        SessionDialect::Basic
    };
    Ok(SessionLog {
        session_id,
        dialect,
        started_wallclock: started,
        ended_wallclock: ended,
        streams,
    })
}

/// Serialize a session log in the requested dialect, reproducing the
/// canonical key spellings and column padding of that dialect.
pub fn serialize_session_log(
    log: &SessionLog,
    dialect: SessionDialect,
) -> Result<String, LogSerializeError> {
    let mut out = String::new();
    out.push_str(&format!("Recording Session: {}\n", log.session_id));
    match dialect {
        SessionDialect::Extended => {
            let started = log
                .started_wallclock
                .as_deref()
                .ok_or(LogSerializeError::DialectMismatch)?;
            out.push_str(&format!("Started:  {started}\n"));
            if let Some(ended) = &log.ended_wallclock {
                out.push_str(&format!("Ended:    {ended}\n"));
            }
        }
        SessionDialect::Basic => {}
    }
    out.push_str(&"=".repeat(32));
    out.push('\n');

    for stream in &log.streams {
        out.push('\n');
        out.push_str(&format!("File: {}\n", stream.file_name));
        out.push_str(&format!("  Source: {}\n", stream.source_label));
        out.push_str(&format!("  Total frames: {}\n", stream.total_frames));
        match dialect {
            SessionDialect::Basic => {
                out.push_str(&format!(
                    "  First frame timestamp: {} ms\n",
                    stream.first_ts_ms
                ));
                out.push_str(&format!(
                    "  Last frame timestamp: {} ms\n",
                    stream.last_ts_ms
                ));
                out.push_str(&format!("  Duration: {} ms\n", stream.duration_ms));
            }
            SessionDialect::Extended => {
                out.push_str(&format!(
                    "  First frame timestamp (unix ms): {}\n",
                    stream.first_ts_ms
                ));
                // Extra space keeps the (unix ms) columns aligned.
                out.push_str(&format!(
                    "  Last frame timestamp  (unix ms): {}\n",
                    stream.last_ts_ms
                ));
                out.push_str(&format!("  Duration (ms): {}\n", stream.duration_ms));
            }
        }
        for (key, value) in &stream.extras {
            out.push_str(&format!("  {key}: {value}\n"));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASIC: &str = include_str!("../tests/data/session_basic.log");
    const EXTENDED: &str = include_str!("../tests/data/session_extended.log");

    #[test]
    fn parses_basic_dialect_fixture() {
        let log = parse_session_log(BASIC).unwrap();
        assert_eq!(log.session_id, "20260511_162515");
        assert_eq!(log.dialect, SessionDialect::Basic);
        assert!(log.started_wallclock.is_none());
        assert_eq!(log.streams.len(), 3);

        let internal = log.stream("internal.mp4").unwrap();
        assert_eq!(internal.source_label, "Internal Camera");
        assert_eq!(internal.role, StreamRole::Ego);
        assert_eq!(internal.total_frames, 763);
        assert_eq!(internal.first_ts_ms, 1_778_531_115_762);
        assert_eq!(internal.last_ts_ms, 1_778_531_141_168);
        assert_eq!(internal.duration_ms, 25_406);

        let usb2 = log.stream("usb2.mp4").unwrap();
        assert_eq!(usb2.total_frames, 483);
        assert_eq!(usb2.role, StreamRole::Wrist);
        // Block order is preserved: internal, usb2, usb1.
        assert_eq!(log.streams[1].file_name, "usb2.mp4");
        assert_eq!(log.streams[2].file_name, "usb1.mp4");
    }

    #[test]
    fn parses_extended_dialect_fixture() {
        let log = parse_session_log(EXTENDED).unwrap();
        assert_eq!(log.session_id, "20260512_044648");
        assert_eq!(log.dialect, SessionDialect::Extended);
        assert_eq!(
            log.started_wallclock.as_deref(),
            Some("2026-05-12 04:46:48.572")
        );
        assert_eq!(
            log.ended_wallclock.as_deref(),
            Some("2026-05-12 04:47:18.443")
        );
        assert_eq!(log.streams.len(), 4);

        let poses = log.stream("poses.txt").unwrap();
        assert_eq!(poses.role, StreamRole::Poses);
        assert_eq!(poses.total_frames, 2622);
        assert_eq!(poses.first_ts_ms, 1_778_528_808_795);
        assert_eq!(poses.last_ts_ms, 1_778_528_838_153);
        assert_eq!(poses.duration_ms, 29_358);

        let internal = log.stream("internal.mp4").unwrap();
        assert_eq!(internal.total_frames, 2623);
        assert_eq!(internal.duration_ms, 29_842);
    }

    #[test]
    fn duration_identity_holds_for_every_fixture_block() {
        for text in [BASIC, EXTENDED] {
            let log = parse_session_log(text).unwrap();
            for stream in &log.streams {
                assert_eq!(
                    stream.duration_ms,
                    stream.last_ts_ms - stream.first_ts_ms,
                    "{} violates the duration identity",
                    stream.file_name
                );
            }
        }
    }

    #[test]
    fn header_alone_yields_empty_streams() {
        let log = parse_session_log("Recording Session: 20260101_000000\n").unwrap();
        assert_eq!(log.session_id, "20260101_000000");
        assert!(log.streams.is_empty());
        assert_eq!(log.dialect, SessionDialect::Basic);
    }

    #[test]
    fn missing_header_is_an_error() {
        assert_eq!(
            parse_session_log("File: a.mp4\n").unwrap_err(),
            LogParseError::MissingHeader
        );
        assert_eq!(
            parse_session_log("").unwrap_err(),
            LogParseError::MissingHeader
        );
    }

    #[test]
    fn malformed_block_reports_missing_field_and_line() {
        let text = "Recording Session: 20260101_000000\n\nFile: a.mp4\n  Source: USB Camera 1\n";
        match parse_session_log(text).unwrap_err() {
            LogParseError::MalformedBlock {
                line,
                file,
                missing,
            } => {
                assert_eq!(line, 3);
                assert_eq!(file, "a.mp4");
                assert_eq!(missing, "Total frames");
            }
            other => panic!("expected MalformedBlock, got {other:?}"),
        }
    }

    #[test]
    fn bad_integer_reports_line() {
        let text = "Recording Session: 20260101_000000\nFile: a.mp4\n  Source: USB Camera 1\n  Total frames: lots\n";
        match parse_session_log(text).unwrap_err() {
            LogParseError::BadInteger { line, value, .. } => {
                assert_eq!(line, 4);
                assert_eq!(value, "lots");
            }
            other => panic!("expected BadInteger, got {other:?}"),
        }
    }

    #[test]
    fn duplicate_file_names_are_rejected() {
        let text = "Recording Session: 20260101_000000\n\
                    File: a.mp4\n  Source: USB Camera 1\n  Total frames: 1\n\
                    \x20 First frame timestamp: 0 ms\n  Last frame timestamp: 0 ms\n  Duration: 0 ms\n\
                    File: a.mp4\n  Source: USB Camera 2\n  Total frames: 1\n\
                    \x20 First frame timestamp: 0 ms\n  Last frame timestamp: 0 ms\n  Duration: 0 ms\n";
        match parse_session_log(text).unwrap_err() {
            LogParseError::DuplicateFile { file, .. } => assert_eq!(file, "a.mp4"),
            other => panic!("expected DuplicateFile, got {other:?}"),
        }
    }

    #[test]
    fn whitespace_and_field_order_are_insignificant() {
        let text = "Recording Session:    20260101_000000\n\n\n\
                    File:   a.mp4\n\
                    \x20 Duration:   100 ms\n\
                    \x20 Total frames:  7\n\
                    \x20 Last frame timestamp: 1100 ms\n\
                    \x20 First frame timestamp: 1000 ms\n\
                    \x20 Source:   USB Camera 1\n";
        let log = parse_session_log(text).unwrap();
        let s = &log.streams[0];
        assert_eq!(
            (s.total_frames, s.first_ts_ms, s.last_ts_ms, s.duration_ms),
            (7, 1000, 1100, 100)
        );
    }

    #[test]
    fn mixed_key_spellings_parse_in_one_block() {
        let text = "Recording Session: 20260101_000000\n\
                    File: a.mp4\n  Source: USB Camera 1\n  Total frames: 2\n\
                    \x20 First frame timestamp (unix ms): 1000\n\
                    \x20 Last frame timestamp: 1100 ms\n\
                    \x20 Duration: 100 ms\n";
        let log = parse_session_log(text).unwrap();
        assert_eq!(
            log.dialect,
            SessionDialect::Extended,
            "(unix ms) key forces extended"
        );
        assert_eq!(log.streams[0].first_ts_ms, 1000);
        assert_eq!(log.streams[0].last_ts_ms, 1100);
    }

    #[test]
    fn unknown_block_keys_are_preserved() {
        let text = "Recording Session: 20260101_000000\n\
                    File: a.mp4\n  Source: USB Camera 1\n  Total frames: 2\n\
                    \x20 First frame timestamp: 1000 ms\n  Last frame timestamp: 1100 ms\n\
                    \x20 Duration: 100 ms\n  Codec: h264\n";
        let log = parse_session_log(text).unwrap();
        assert_eq!(
            log.streams[0].extras,
            vec![("Codec".to_owned(), "h264".to_owned())]
        );
        let text2 = serialize_session_log(&log, SessionDialect::Basic).unwrap();
        assert!(text2.contains("  Codec: h264\n"));
        assert_eq!(parse_session_log(&text2).unwrap(), log);
    }

    #[test]
    fn fixtures_round_trip_byte_identically() {
        let basic = parse_session_log(BASIC).unwrap();
        assert_eq!(
            serialize_session_log(&basic, SessionDialect::Basic).unwrap(),
            BASIC
        );
        let extended = parse_session_log(EXTENDED).unwrap();
        assert_eq!(
            serialize_session_log(&extended, SessionDialect::Extended).unwrap(),
            EXTENDED
        );
    }

    #[test]
    fn empty_log_serializes_to_header_and_separator() {
        let log = SessionLog {
            session_id: "20260101_000000".into(),
            dialect: SessionDialect::Basic,
            started_wallclock: None,
            ended_wallclock: None,
            streams: Vec::new(),
        };
        let text = serialize_session_log(&log, SessionDialect::Basic).unwrap();
        assert_eq!(
            text,
            format!("Recording Session: 20260101_000000\n{}\n", "=".repeat(32))
        );
        assert_eq!(parse_session_log(&text).unwrap(), log);
    }

    #[test]
    fn extended_serialization_requires_wallclock() {
        let log = SessionLog {
            session_id: "20260101_000000".into(),
            dialect: SessionDialect::Basic,
            started_wallclock: None,
            ended_wallclock: None,
            streams: Vec::new(),
        };
        assert!(matches!(
            serialize_session_log(&log, SessionDialect::Extended),
            Err(LogSerializeError::DialectMismatch)
        ));
    }
}

//! Per-stream clock correction from anchor observations.
//!
//! Streams recorded by independent devices carry independent clocks. An
//! anchor observation pairs a device timestamp with a reference-clock
//! reading of the same instant (e.g. a shared millisecond timer captured
//! in frame). The correction is affine:
//!
//! `ref(ts) = ts + offset_ms + drift_ppm * (ts - t0_ms) / 1e6`
//!
//! Offset-only fits use the median of `ref - ts` so an occasional misread
//! timer digit cannot move the estimate; offset-plus-drift fits use
//! ordinary least squares with `t0` pinned to the earliest anchor.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// One (device timestamp, reference timestamp) pair for a stream.
///
/// Times are milliseconds, stored as reals: ms-resolution timer readings
/// are integers, but sub-millisecond anchors from synthetic ground truth
/// are kept exact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnchorObservation {
    pub stream_id: String,
    pub stream_ts_ms: f64,
    pub ref_ts_ms: f64,
}

/// Affine map from one stream's device clock to the reference clock.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClockModel {
    pub stream_id: String,
    pub offset_ms: f64,
    /// Parts per million; zero exactly when fitted in offset-only mode.
    pub drift_ppm: f64,
    /// Reference origin for the drift term.
    pub t0_ms: f64,
}

impl ClockModel {
    pub fn identity(stream_id: impl Into<String>) -> ClockModel {
        ClockModel {
            stream_id: stream_id.into(),
            offset_ms: 0.0,
            drift_ppm: 0.0,
            t0_ms: 0.0,
        }
    }

    pub fn is_identity(&self) -> bool {
        self.offset_ms == 0.0 && self.drift_ppm == 0.0
    }
}

/// Map a device timestamp (ms) to reference milliseconds.
pub fn apply_clock(model: &ClockModel, ts_ms: f64) -> f64 {
    ts_ms + model.offset_ms + model.drift_ppm * (ts_ms - model.t0_ms) / 1e6
}

/// Invert the affine map: device timestamp whose corrected value is
/// `ref_ms`.
pub fn invert_clock(model: &ClockModel, ref_ms: f64) -> f64 {
    let slope = 1.0 + model.drift_ppm / 1e6;
    (ref_ms - model.offset_ms + model.drift_ppm * model.t0_ms / 1e6) / slope
}

/// Fit mode for `fit_clock`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FitMode {
    OffsetOnly,
    OffsetDrift,
}

/// Residual summary in milliseconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResidualStats {
    pub count: usize,
    pub max_abs_ms: f64,
    pub rms_ms: f64,
}

#[derive(Debug, Error, PartialEq)]
pub enum SyncError {
    #[error("{mode:?} needs at least {needed} anchors, got {got}")]
    InsufficientAnchors {
        mode: FitMode,
        needed: usize,
        got: usize,
    },
    #[error("all anchors share one device timestamp; drift is unidentifiable")]
    DegenerateTimes,
    #[error("anchors mix stream ids {0:?} and {1:?}")]
    StreamMismatch(String, String),
    #[error("no anchors")]
    EmptyAnchors,
    #[error("line {line}: {reason}")]
    CsvFormat { line: usize, reason: String },
}

fn single_stream_id(anchors: &[AnchorObservation]) -> Result<&str, SyncError> {
    let first = anchors.first().ok_or(SyncError::EmptyAnchors)?;
    for anchor in anchors {
        if anchor.stream_id != first.stream_id {
            return Err(SyncError::StreamMismatch(
                first.stream_id.clone(),
                anchor.stream_id.clone(),
            ));
        }
    }
    Ok(&first.stream_id)
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(|a, b| a.total_cmp(b));
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        (values[n / 2 - 1] + values[n / 2]) / 2.0
    }
}

/// Fit a clock model for one stream's anchors.
///
/// Offset-only needs one anchor; offset-plus-drift needs two with distinct
/// device timestamps. Returns the model together with its residual stats.
pub fn fit_clock(
    anchors: &[AnchorObservation],
    mode: FitMode,
) -> Result<(ClockModel, ResidualStats), SyncError> {
    let needed = match mode {
        FitMode::OffsetOnly => 1,
        FitMode::OffsetDrift => 2,
    };
    if anchors.len() < needed {
        return Err(SyncError::InsufficientAnchors {
            mode,
            needed,
            got: anchors.len(),
        });
    }
    let stream_id = single_stream_id(anchors)?.to_owned();
    let t0 = anchors
        .iter()
        .map(|a| a.stream_ts_ms)
        .fold(f64::INFINITY, f64::min);

    let model = match mode {
        FitMode::OffsetOnly => {
            let mut deltas: Vec<f64> = anchors
                .iter()
                .map(|a| a.ref_ts_ms - a.stream_ts_ms)
                .collect();
            ClockModel {
                stream_id,
                offset_ms: median(&mut deltas),
                drift_ppm: 0.0,
                t0_ms: t0,
            }
        }
        FitMode::OffsetDrift => {
            // OLS on y = offset + drift * x with x = (ts - t0)/1e6,
            // y = ref - ts. Centering on t0 keeps the system well
            // conditioned for epoch-scale timestamps.
            let n = anchors.len() as f64;
            let xs: Vec<f64> = anchors
                .iter()
                .map(|a| (a.stream_ts_ms - t0) / 1e6)
                .collect();
            let ys: Vec<f64> = anchors
                .iter()
                .map(|a| a.ref_ts_ms - a.stream_ts_ms)
                .collect();
            let x_mean = xs.iter().sum::<f64>() / n;
            let y_mean = ys.iter().sum::<f64>() / n;
            let sxx: f64 = xs.iter().map(|x| (x - x_mean) * (x - x_mean)).sum();
            if sxx == 0.0 {
                return Err(SyncError::DegenerateTimes);
            }
            let sxy: f64 = xs
                .iter()
                .zip(&ys)
                .map(|(x, y)| (x - x_mean) * (y - y_mean))
                .sum();
            let drift_ppm = sxy / sxx;
            ClockModel {
                stream_id,
                offset_ms: y_mean - drift_ppm * x_mean,
                drift_ppm,
                t0_ms: t0,
            }
        }
    };
    let stats = clock_residuals(&model, anchors)?;
    Ok((model, stats))
}

/// Residuals of anchors under a model: `ref - apply_clock(model, ts)`.
pub fn clock_residuals(
    model: &ClockModel,
    anchors: &[AnchorObservation],
) -> Result<ResidualStats, SyncError> {
    let stream_id = single_stream_id(anchors)?;
    if stream_id != model.stream_id {
        return Err(SyncError::StreamMismatch(
            model.stream_id.clone(),
            stream_id.to_owned(),
        ));
    }
    let mut max_abs: f64 = 0.0;
    let mut sum_sq = 0.0;
    for anchor in anchors {
        let residual = anchor.ref_ts_ms - apply_clock(model, anchor.stream_ts_ms);
        max_abs = max_abs.max(residual.abs());
        sum_sq += residual * residual;
    }
    Ok(ResidualStats {
        count: anchors.len(),
        max_abs_ms: max_abs,
        rms_ms: (sum_sq / anchors.len() as f64).sqrt(),
    })
}

/// Parse an anchor CSV: header `stream,ts_ms,ref_ms`, one observation per
/// row, LF line endings.
pub fn parse_anchor_csv(text: &str) -> Result<Vec<AnchorObservation>, SyncError> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or(SyncError::CsvFormat {
        line: 1,
        reason: "empty file".into(),
    })?;
    if header.trim() != "stream,ts_ms,ref_ms" {
        return Err(SyncError::CsvFormat {
            line: 1,
            reason: format!("expected header 'stream,ts_ms,ref_ms', got {header:?}"),
        });
    }
    let mut anchors = Vec::new();
    for (idx, raw) in lines {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 3 {
            return Err(SyncError::CsvFormat {
                line: line_no,
                reason: format!("expected 3 fields, found {}", fields.len()),
            });
        }
        let number = |s: &str| -> Result<f64, SyncError> {
            let v: f64 = s.trim().parse().map_err(|_| SyncError::CsvFormat {
                line: line_no,
                reason: format!("cannot parse {s:?} as a number"),
            })?;
            if v.is_finite() {
                Ok(v)
            } else {
                Err(SyncError::CsvFormat {
                    line: line_no,
                    reason: format!("non-finite value {s:?}"),
                })
            }
        };
        anchors.push(AnchorObservation {
            stream_id: fields[0].trim().to_owned(),
            stream_ts_ms: number(fields[1])?,
            ref_ts_ms: number(fields[2])?,
        });
    }
    Ok(anchors)
}

/// Serialize anchors in the CSV contract format.
pub fn serialize_anchor_csv(anchors: &[AnchorObservation]) -> String {
    let mut out = String::from("stream,ts_ms,ref_ms\n");
    for anchor in anchors {
        out.push_str(&format!(
            "{},{},{}\n",
            anchor.stream_id, anchor.stream_ts_ms, anchor.ref_ts_ms
        ));
    }
    out
}

/// Group anchors by stream id, preserving first-seen order within groups.
pub fn group_by_stream(anchors: &[AnchorObservation]) -> BTreeMap<String, Vec<AnchorObservation>> {
    let mut groups: BTreeMap<String, Vec<AnchorObservation>> = BTreeMap::new();
    for anchor in anchors {
        groups
            .entry(anchor.stream_id.clone())
            .or_default()
            .push(anchor.clone());
    }
    groups
}

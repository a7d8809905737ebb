//! Minimal ISO base media file format walker. Reads container metadata
//! (movie/media timescales, durations, sample tables) without touching
//! sample data, for cross-checking against session log declarations.
//!
//! Only `mvhd`, `mdhd`, and `stts` are interpreted; everything else is
//! skipped by size. QuickTime `.mov` files share the walked boxes and are
//! handled identically. Fragmented files are rejected.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{Finding, FindingCode, Severity, StreamMeta};

/// Header of one box: 4-character type plus payload size.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BoxHeader {
    pub box_type: [u8; 4],
    /// Payload bytes, excluding the header itself.
    pub payload_size: u64,
    /// 8 for a 32-bit size, 16 when a 64-bit largesize follows.
    pub header_len: u8,
}

impl BoxHeader {
    pub fn type_str(&self) -> String {
        String::from_utf8_lossy(&self.box_type).into_owned()
    }
}

/// Per-track metadata recovered from `mdhd` and `stts`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrackMeta {
    pub media_timescale: u32,
    pub media_duration_ticks: u64,
    pub sample_count: u64,
    /// (sample count, per-sample delta in media ticks) runs.
    pub stts_entries: Vec<(u32, u32)>,
}

impl TrackMeta {
    pub fn duration_ms(&self) -> f64 {
        if self.media_timescale == 0 {
            return 0.0;
        }
        self.media_duration_ticks as f64 * 1000.0 / self.media_timescale as f64
    }
}

/// Container metadata recovered from the `moov` tree.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Mp4Meta {
    pub movie_timescale: u32,
    pub movie_duration_ticks: u64,
    pub tracks: Vec<TrackMeta>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ProbeError {
    #[error("truncated box at offset {0}")]
    Truncated(usize),
    #[error("box at offset {0} declares size 0 (extends to end of file); unsupported")]
    ZeroSize(usize),
    #[error("box at offset {offset} declares invalid size {size}")]
    InvalidSize { offset: usize, size: u64 },
    #[error("box at offset {offset} overruns its container by {overrun} bytes")]
    SizeOverrun { offset: usize, overrun: u64 },
    #[error("no moov box found")]
    NoMoov,
    #[error("fragmented files (moof) are not supported")]
    FragmentedUnsupported,
    #[error("{box_type} version {version} is not supported")]
    BadVersion { box_type: String, version: u8 },
}

fn be_u32(bytes: &[u8], at: usize) -> Result<u32, ProbeError> {
    let chunk = bytes
        .get(at..at + 4)
        .ok_or(ProbeError::Truncated(at))?
        .try_into()
        .unwrap();
    Ok(u32::from_be_bytes(chunk))
}

fn be_u64(bytes: &[u8], at: usize) -> Result<u64, ProbeError> {
    let chunk = bytes
        .get(at..at + 8)
        .ok_or(ProbeError::Truncated(at))?
        .try_into()
        .unwrap();
    Ok(u64::from_be_bytes(chunk))
}

/// Read one box header at `offset`. A size field of 1 means a 64-bit
/// largesize follows; 0 (box extends to end of file) is rejected.
pub fn read_box_header(bytes: &[u8], offset: usize) -> Result<BoxHeader, ProbeError> {
    let size32 = be_u32(bytes, offset)? as u64;
    let box_type: [u8; 4] = bytes
        .get(offset + 4..offset + 8)
        .ok_or(ProbeError::Truncated(offset + 4))?
        .try_into()
        .unwrap();

    let (total_size, header_len) = match size32 {
        0 => return Err(ProbeError::ZeroSize(offset)),
        1 => (be_u64(bytes, offset + 8)?, 16u8),
        n => (n, 8u8),
    };
    if total_size < header_len as u64 {
        return Err(ProbeError::InvalidSize {
            offset,
            size: total_size,
        });
    }
    let end = offset as u64 + total_size;
    if end > bytes.len() as u64 {
        return Err(ProbeError::SizeOverrun {
            offset,
            overrun: end - bytes.len() as u64,
        });
    }
    Ok(BoxHeader {
        box_type,
        payload_size: total_size - header_len as u64,
        header_len,
    })
}

/// Iterate direct children of `bytes[start..end]`, calling `visit` with
/// each header and its payload slice. Never reads past `end`.
fn walk_children<F>(bytes: &[u8], start: usize, end: usize, mut visit: F) -> Result<(), ProbeError>
where
    F: FnMut(&BoxHeader, &[u8]) -> Result<(), ProbeError>,
{
    let mut offset = start;
    while offset < end {
        if end - offset < 8 {
            return Err(ProbeError::Truncated(offset));
        }
        let header = read_box_header(&bytes[..end], offset)?;
        let payload_start = offset + header.header_len as usize;
        let payload_end = payload_start + header.payload_size as usize;
        visit(&header, &bytes[payload_start..payload_end])?;
        offset = payload_end;
    }
    Ok(())
}

fn full_box_version(payload: &[u8]) -> Result<u8, ProbeError> {
    payload.first().copied().ok_or(ProbeError::Truncated(0))
}

/// mvhd: version 0 carries 32-bit timescale/duration after two 32-bit
/// times; version 1 widens the times and duration to 64 bits.
fn parse_mvhd(payload: &[u8]) -> Result<(u32, u64), ProbeError> {
    match full_box_version(payload)? {
        0 => Ok((be_u32(payload, 12)?, be_u32(payload, 16)? as u64)),
        1 => Ok((be_u32(payload, 20)?, be_u64(payload, 24)?)),
        version => Err(ProbeError::BadVersion {
            box_type: "mvhd".into(),
            version,
        }),
    }
}

/// mdhd has the same layout as mvhd up to the duration field.
fn parse_mdhd(payload: &[u8]) -> Result<(u32, u64), ProbeError> {
    match full_box_version(payload)? {
        0 => Ok((be_u32(payload, 12)?, be_u32(payload, 16)? as u64)),
        1 => Ok((be_u32(payload, 20)?, be_u64(payload, 24)?)),
        version => Err(ProbeError::BadVersion {
            box_type: "mdhd".into(),
            version,
        }),
    }
}

fn parse_stts(payload: &[u8]) -> Result<Vec<(u32, u32)>, ProbeError> {
    let version = full_box_version(payload)?;
    if version != 0 {
        return Err(ProbeError::BadVersion {
            box_type: "stts".into(),
            version,
        });
    }
    let entry_count = be_u32(payload, 4)? as usize;
    let mut entries = Vec::with_capacity(entry_count.min(4096));
    for i in 0..entry_count {
        let at = 8 + i * 8;
        entries.push((be_u32(payload, at)?, be_u32(payload, at + 4)?));
    }
    Ok(entries)
}

/// Walk the container and recover movie and per-track metadata.
///
/// Unknown boxes are skipped by size, and an `mdat` appearing before
/// `moov` is handled by scanning every top-level box.
pub fn probe_mp4(bytes: &[u8]) -> Result<Mp4Meta, ProbeError> {
    let mut movie: Option<(u32, u64)> = None;
    let mut tracks: Vec<TrackMeta> = Vec::new();
    let mut saw_moov = false;

    walk_children(bytes, 0, bytes.len(), |header, payload| {
        match &header.box_type {
            b"moof" => return Err(ProbeError::FragmentedUnsupported),
            b"moov" => {
                saw_moov = true;
                walk_children(payload, 0, payload.len(), |child, child_payload| {
                    match &child.box_type {
                        b"mvhd" => movie = Some(parse_mvhd(child_payload)?),
                        b"trak" => tracks.push(parse_trak(child_payload)?),
                        _ => {}
                    }
                    Ok(())
                })?;
            }
            _ => {}
        }
        Ok(())
    })?;

    if !saw_moov {
        return Err(ProbeError::NoMoov);
    }
    let (movie_timescale, movie_duration_ticks) = movie.ok_or(ProbeError::NoMoov)?;
    Ok(Mp4Meta {
        movie_timescale,
        movie_duration_ticks,
        tracks,
    })
}

fn parse_trak(payload: &[u8]) -> Result<TrackMeta, ProbeError> {
    let mut media: Option<(u32, u64)> = None;
    let mut stts: Option<Vec<(u32, u32)>> = None;

    // trak -> mdia -> { mdhd, minf -> stbl -> stts }
    walk_children(payload, 0, payload.len(), |child, child_payload| {
        if &child.box_type != b"mdia" {
            return Ok(());
        }
        walk_children(child_payload, 0, child_payload.len(), |m, m_payload| {
            match &m.box_type {
                b"mdhd" => media = Some(parse_mdhd(m_payload)?),
                b"minf" => {
                    walk_children(m_payload, 0, m_payload.len(), |s, s_payload| {
                        if &s.box_type != b"stbl" {
                            return Ok(());
                        }
                        walk_children(s_payload, 0, s_payload.len(), |t, t_payload| {
                            if &t.box_type == b"stts" {
                                stts = Some(parse_stts(t_payload)?);
                            }
                            Ok(())
                        })
                    })?;
                }
                _ => {}
            }
            Ok(())
        })
    })?;

    let (media_timescale, media_duration_ticks) = media.unwrap_or((0, 0));
    let stts_entries = stts.unwrap_or_default();
    let sample_count = stts_entries.iter().map(|(count, _)| *count as u64).sum();
    Ok(TrackMeta {
        media_timescale,
        media_duration_ticks,
        sample_count,
        stts_entries,
    })
}

/// Compare probed container metadata against a stream's log declaration.
pub fn cross_check_mp4(meta: &Mp4Meta, stream: &StreamMeta, dur_tol_ms: i64) -> Vec<Finding> {
    let mut findings = Vec::new();
    for (i, track) in meta.tracks.iter().enumerate() {
        if track.sample_count != stream.total_frames {
            findings.push(Finding::new(
                Severity::Error,
                FindingCode::Mp4Frames,
                Some(&stream.file_name),
                format!(
                    "container track {i} holds {} samples but the log declares {}",
                    track.sample_count, stream.total_frames
                ),
            ));
        }
        let container_ms = track.duration_ms();
        let delta = container_ms - stream.duration_ms as f64;
        if delta.abs() > dur_tol_ms as f64 {
            findings.push(Finding::new(
                Severity::Warning,
                FindingCode::Mp4Duration,
                Some(&stream.file_name),
                format!(
                    "container duration {container_ms:.0} ms differs from declared {} ms by more \
                     than {dur_tol_ms} ms",
                    stream.duration_ms
                ),
            ));
        }
    }
    findings
}

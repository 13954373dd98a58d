//! JSON Lines trace format.
//!
//! Line 1 is a header `{"detector", "grid": {"heights", "proposals"}, "split"}`.
//! Every following line is one frame record
//! `{"video", "frame", "width", "height", "gts", "outputs"[, "sparse"]}`
//! with `outputs` listed in grid enumeration order. Field order as written
//! here is the canonical form; `save_trace(load_trace(x))` reproduces it
//! byte for byte.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::{DetectionTrace, FrameRecord, Split, Video};
use crate::error::{DsaError, Result};
use crate::lattice::{ApproxConfig, ConfigGrid, GridSpec};
use crate::metrics::{BBox, Detection, GroundTruth};

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    detector: String,
    grid: GridSpec,
    split: Split,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct OutputEntry {
    config: ApproxConfig,
    dets: Vec<Detection>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FrameLine {
    video: String,
    frame: u32,
    width: u32,
    height: u32,
    gts: Vec<GroundTruth>,
    outputs: Vec<OutputEntry>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    sparse: bool,
}

/// Reads and fully validates a trace.
pub fn load_trace<R: BufRead>(source: R) -> Result<DetectionTrace> {
    let mut header: Option<(Header, ConfigGrid)> = None;
    let mut videos: Vec<Video> = Vec::new();

    for (idx, line) in source.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let malformed = |e: serde_json::Error| DsaError::Malformed { line: line_no, message: e.to_string() };

        let Some((_, grid)) = &header else {
            let h: Header = serde_json::from_str(&line).map_err(malformed)?;
            let grid = ConfigGrid::from_spec(&h.grid)
                .map_err(|e| DsaError::Malformed { line: line_no, message: e.to_string() })?;
            header = Some((h, grid));
            continue;
        };

        let raw: FrameLine = serde_json::from_str(&line).map_err(malformed)?;
        let record = into_record(raw, grid)?;

        match videos.last_mut() {
            Some(v) if v.id == record.video => {
                let expected = v.frames.len() as u32;
                if record.frame != expected {
                    return Err(DsaError::NonContiguous { video: record.video, expected, found: record.frame });
                }
                v.frames.push(record);
            }
            _ => {
                if videos.iter().any(|v| v.id == record.video) {
                    let expected = videos.iter().find(|v| v.id == record.video).map_or(0, |v| v.frames.len());
                    return Err(DsaError::NonContiguous {
                        video: record.video,
                        expected: expected as u32,
                        found: record.frame,
                    });
                }
                if record.frame != 0 {
                    return Err(DsaError::NonContiguous { video: record.video, expected: 0, found: record.frame });
                }
                videos.push(Video { id: record.video.clone(), frames: vec![record] });
            }
        }
    }

    let (h, grid) = header.ok_or(DsaError::Malformed { line: 0, message: "missing header line".into() })?;
    Ok(DetectionTrace { detector: h.detector, grid, split: h.split, videos })
}

fn into_record(raw: FrameLine, grid: &ConfigGrid) -> Result<FrameRecord> {
    let bad = |message: String| DsaError::InvalidFrame { video: raw.video.clone(), frame: raw.frame, message };
    if raw.width == 0 || raw.height == 0 {
        return Err(bad("frame dimensions must be positive".into()));
    }
    let (w, h) = (f64::from(raw.width), f64::from(raw.height));
    for (i, gt) in raw.gts.iter().enumerate() {
        check_box(&gt.bbox, w, h).map_err(|m| bad(format!("ground truth {i}: {m}")))?;
    }
    let mut outputs = BTreeMap::new();
    for entry in &raw.outputs {
        if !grid.contains(entry.config) {
            return Err(bad(format!("config {} is not a member of the grid", entry.config)));
        }
        for (i, det) in entry.dets.iter().enumerate() {
            check_box(&det.bbox, w, h).map_err(|m| bad(format!("config {} detection {i}: {m}", entry.config)))?;
            if !(0.0..=1.0).contains(&det.score) {
                return Err(bad(format!("config {} detection {i}: score {} outside [0, 1]", entry.config, det.score)));
            }
        }
        if outputs.insert(entry.config, entry.dets.clone()).is_some() {
            return Err(bad(format!("config {} listed twice", entry.config)));
        }
    }
    if !raw.sparse {
        if let Some(missing) = grid.configs().iter().find(|c| !outputs.contains_key(c)) {
            return Err(bad(format!("dense record is missing config {missing}")));
        }
    }
    Ok(FrameRecord {
        video: raw.video,
        frame: raw.frame,
        width: raw.width,
        height: raw.height,
        gts: raw.gts,
        outputs,
        sparse: raw.sparse,
    })
}

fn check_box(b: &BBox, width: f64, height: f64) -> std::result::Result<(), String> {
    if !b.is_valid() {
        return Err(format!("invalid box {:?}", [b.x_min, b.y_min, b.x_max, b.y_max]));
    }
    if !b.within(width, height) {
        return Err(format!("box {:?} outside frame bounds {width}x{height}", [b.x_min, b.y_min, b.x_max, b.y_max]));
    }
    Ok(())
}

/// Structural validation of an in-memory trace, with the same diagnostics
/// as [`load_trace`].
pub(crate) fn validate_trace(trace: &DetectionTrace) -> Result<()> {
    let mut seen = std::collections::BTreeSet::new();
    for video in &trace.videos {
        if !seen.insert(video.id.as_str()) {
            return Err(DsaError::NonContiguous { video: video.id.clone(), expected: 0, found: 0 });
        }
        for (i, f) in video.frames.iter().enumerate() {
            if f.video != video.id || f.frame != i as u32 {
                return Err(DsaError::NonContiguous { video: video.id.clone(), expected: i as u32, found: f.frame });
            }
            into_record(to_line(f, &trace.grid), &trace.grid)?;
        }
    }
    Ok(())
}

fn to_line(f: &FrameRecord, grid: &ConfigGrid) -> FrameLine {
    let mut outputs: Vec<OutputEntry> = grid
        .configs()
        .iter()
        .filter_map(|c| f.outputs.get(c).map(|dets| OutputEntry { config: *c, dets: dets.clone() }))
        .collect();
    // off-grid keys have no canonical slot; keep them so validation can report them
    outputs.extend(
        f.outputs
            .iter()
            .filter(|(c, _)| !grid.contains(**c))
            .map(|(c, dets)| OutputEntry { config: *c, dets: dets.clone() }),
    );
    FrameLine {
        video: f.video.clone(),
        frame: f.frame,
        width: f.width,
        height: f.height,
        gts: f.gts.clone(),
        outputs,
        sparse: f.sparse,
    }
}

/// Writes the canonical serialization.
pub fn save_trace<W: Write>(trace: &DetectionTrace, mut sink: W) -> Result<()> {
    let header = Header { detector: trace.detector.clone(), grid: trace.grid.spec(), split: trace.split };
    serde_json::to_writer(&mut sink, &header)?;
    sink.write_all(b"\n")?;
    for frame in trace.frames() {
        serde_json::to_writer(&mut sink, &to_line(frame, &trace.grid))?;
        sink.write_all(b"\n")?;
    }
    sink.flush()?;
    Ok(())
}

pub fn trace_to_string(trace: &DetectionTrace) -> String {
    let mut buf = Vec::new();
    save_trace(trace, &mut buf).expect("writing to a Vec cannot fail");
    String::from_utf8(buf).expect("serde_json emits UTF-8")
}

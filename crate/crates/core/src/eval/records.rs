//! JSON-lines mask records: one `{frame, class, score, rle}` object per line.

use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Detection, DetectionSet, Mask, Rle};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaskRecord {
    pub frame: String,
    pub class: u16,
    pub score: f64,
    pub rle: Rle,
}

impl MaskRecord {
    pub fn from_detection(frame: &str, d: &Detection) -> Self {
        MaskRecord {
            frame: frame.to_string(),
            class: d.class,
            score: d.score,
            rle: d.mask.to_rle(),
        }
    }
}

/// Serializes detections as JSON lines in frame order.
pub fn to_jsonl(set: &DetectionSet) -> String {
    let mut out = String::new();
    for (frame, dets) in set.frames() {
        for d in dets {
            out.push_str(&serde_json::to_string(&MaskRecord::from_detection(frame, d)).expect("record serializes"));
            out.push('\n');
        }
    }
    out
}

pub fn write_jsonl(path: &Path, set: &DetectionSet) -> Result<()> {
    crate::dataio::atomic_write(path, to_jsonl(set).as_bytes())
}

/// Parses JSON lines into `set`, naming the offending line on error.
pub fn read_jsonl_into(path: &Path, set: &mut DetectionSet) -> Result<()> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = BufReader::new(file);
    let mut offset = 0u64;
    for (lineno, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let len = line.len() as u64 + 1;
        if !line.trim().is_empty() {
            let rec: MaskRecord = serde_json::from_str(&line)
                .map_err(|e| Error::format(path, Some(offset), format!("line {}: {e}", lineno + 1)))?;
            let mask = Mask::from_rle(&rec.rle)
                .map_err(|e| Error::format(path, Some(offset), format!("line {}: {e}", lineno + 1)))?;
            set.push(
                rec.frame,
                Detection {
                    mask,
                    class: rec.class,
                    score: rec.score,
                },
            )
            .map_err(|e| Error::format(path, Some(offset), format!("line {}: {e}", lineno + 1)))?;
        }
        offset += len;
    }
    Ok(())
}

pub fn read_jsonl(path: &Path) -> Result<DetectionSet> {
    let mut set = DetectionSet::new();
    read_jsonl_into(path, &mut set)?;
    Ok(set)
}

/// Writes into any sink; used by tools streaming records to stdout.
pub fn write_jsonl_to(mut w: impl Write, set: &DetectionSet) -> std::io::Result<()> {
    w.write_all(to_jsonl(set).as_bytes())
}

//! JSON Lines reading and writing for the canonical interchange formats.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::fsutil;
use crate::{Error, Result};

/// Reads one record per non-empty line, reporting the 1-based line number
/// on parse failure.
pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let raw = fsutil::read_to_string(path)?;
    let mut out = Vec::new();
    for (i, line) in raw.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let record = serde_json::from_str(line).map_err(|e| Error::JsonLine {
            path: path.to_path_buf(),
            line: i + 1,
            source: e,
        })?;
        out.push(record);
    }
    Ok(out)
}

/// Serializes records one per line and writes the file atomically.
pub fn write_jsonl<T: Serialize>(path: &Path, records: &[T]) -> Result<()> {
    fsutil::write_atomic(path, to_jsonl_bytes(records)?.as_slice())
}

pub fn to_jsonl_bytes<T: Serialize>(records: &[T]) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    for record in records {
        serde_json::to_writer(&mut buf, record).map_err(|e| Error::Json {
            path: "<buffer>".into(),
            source: e,
        })?;
        buf.push(b'\n');
    }
    Ok(buf)
}

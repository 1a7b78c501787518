//! Embedding interchange: JSON Lines and the EMB1 binary cache.
//!
//! JSONL rows look like `{"id": "...", "vec": [..]}`. The binary cache is
//! magic `EMB1`, u32 dimension, u64 count, the id table (u32 length +
//! UTF-8 bytes each), then row-major f32 little-endian values. Loading
//! sniffs the magic bytes, so either format can be passed anywhere an
//! embedding file is expected.

use std::path::Path;

use serde::{Deserialize, Serialize};

use gdr_core::denseindex::{EmbeddingEntry, EmbeddingSet};

use crate::{fsutil, jsonl, Error, Result};

const MAGIC: &[u8; 4] = b"EMB1";

#[derive(Serialize, Deserialize)]
struct EmbeddingRow {
    id: String,
    vec: Vec<f32>,
}

/// Loads an embedding set from JSONL or the EMB1 binary cache.
pub fn load_embeddings(path: &Path) -> Result<EmbeddingSet> {
    let bytes = fsutil::read_bytes(path)?;
    if bytes.len() >= 4 && &bytes[..4] == MAGIC {
        return decode_binary(path, &bytes);
    }
    let rows: Vec<EmbeddingRow> = jsonl::read_jsonl(path)?;
    let entries: Vec<EmbeddingEntry> = rows
        .into_iter()
        .map(|row| EmbeddingEntry {
            id: row.id,
            vector: row.vec,
        })
        .collect();
    EmbeddingSet::from_entries(entries).map_err(Error::from)
}

/// Writes the JSONL interchange form.
pub fn save_embeddings_jsonl(path: &Path, set: &EmbeddingSet) -> Result<()> {
    let rows: Vec<EmbeddingRow> = set
        .entries
        .iter()
        .map(|entry| EmbeddingRow {
            id: entry.id.clone(),
            vec: entry.vector.clone(),
        })
        .collect();
    jsonl::write_jsonl(path, &rows)
}

/// Writes the EMB1 binary cache.
pub fn save_embeddings_binary(path: &Path, set: &EmbeddingSet) -> Result<()> {
    let mut buf = Vec::with_capacity(16 + set.entries.len() * (set.dim * 4 + 16));
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&(set.dim as u32).to_le_bytes());
    buf.extend_from_slice(&(set.entries.len() as u64).to_le_bytes());
    for entry in &set.entries {
        buf.extend_from_slice(&(entry.id.len() as u32).to_le_bytes());
        buf.extend_from_slice(entry.id.as_bytes());
    }
    for entry in &set.entries {
        for value in &entry.vector {
            buf.extend_from_slice(&value.to_le_bytes());
        }
    }
    fsutil::write_atomic(path, &buf)
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Option<&'a [u8]> {
        let end = self.pos.checked_add(n)?;
        let slice = self.bytes.get(self.pos..end)?;
        self.pos = end;
        Some(slice)
    }

    fn u32_le(&mut self) -> Option<u32> {
        self.take(4)
            .map(|b| u32::from_le_bytes(b.try_into().unwrap()))
    }

    fn u64_le(&mut self) -> Option<u64> {
        self.take(8)
            .map(|b| u64::from_le_bytes(b.try_into().unwrap()))
    }
}

fn decode_binary(path: &Path, bytes: &[u8]) -> Result<EmbeddingSet> {
    let corrupt = |message: &str| Error::Format {
        path: path.to_path_buf(),
        message: message.to_string(),
    };
    let mut cursor = Cursor { bytes, pos: 4 };
    let dim = cursor.u32_le().ok_or_else(|| corrupt("truncated header"))? as usize;
    let count = cursor.u64_le().ok_or_else(|| corrupt("truncated header"))? as usize;

    let mut ids = Vec::with_capacity(count);
    for _ in 0..count {
        let len = cursor
            .u32_le()
            .ok_or_else(|| corrupt("truncated id table"))? as usize;
        let raw = cursor
            .take(len)
            .ok_or_else(|| corrupt("truncated id table"))?;
        let id = std::str::from_utf8(raw)
            .map_err(|_| corrupt("id table is not UTF-8"))?
            .to_string();
        ids.push(id);
    }

    let mut entries = Vec::with_capacity(count);
    for id in ids {
        let mut vector = Vec::with_capacity(dim);
        for _ in 0..dim {
            let raw = cursor
                .take(4)
                .ok_or_else(|| corrupt("truncated vector data"))?;
            vector.push(f32::from_le_bytes(raw.try_into().unwrap()));
        }
        entries.push(EmbeddingEntry { id, vector });
    }
    if cursor.pos != bytes.len() {
        return Err(corrupt("trailing bytes after vector data"));
    }
    EmbeddingSet::from_entries(entries).map_err(Error::from)
}

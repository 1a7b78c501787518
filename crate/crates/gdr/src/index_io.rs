//! BM25 index persistence: the BMIX binary format plus a JSON sidecar of
//! build metadata.
//!
//! Layout (all integers little-endian): magic `BMIX`, u32 format version,
//! f64 k1, f64 b, u64 passage count, the id table (u32 length + UTF-8
//! bytes each), u32 token length per passage, u64 term count, then per
//! term: u32 length + UTF-8 bytes, u64 posting count, and (u32 ordinal,
//! u32 tf) pairs sorted by ordinal.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use gdr_core::lexindex::{Bm25Index, Bm25Params, Posting};

use crate::{fsutil, Error, Result};

const MAGIC: &[u8; 4] = b"BMIX";
const FORMAT_VERSION: u32 = 1;

/// Build provenance stored next to the index.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IndexMeta {
    pub format_version: u32,
    pub passage_count: usize,
    pub term_count: usize,
    pub params: Bm25Params,
    /// SHA-256 of the passage corpus file the index was built from.
    pub corpus_hash: String,
}

pub fn sidecar_path(index_path: &Path) -> PathBuf {
    let mut name = index_path.as_os_str().to_os_string();
    name.push(".meta.json");
    PathBuf::from(name)
}

/// Serializes the index and writes it plus its metadata sidecar.
pub fn save_bm25(path: &Path, index: &Bm25Index, corpus_hash: &str) -> Result<()> {
    let mut buf = Vec::new();
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    buf.extend_from_slice(&index.params.k1.to_le_bytes());
    buf.extend_from_slice(&index.params.b.to_le_bytes());
    buf.extend_from_slice(&(index.id_table.len() as u64).to_le_bytes());
    for id in &index.id_table {
        buf.extend_from_slice(&(id.len() as u32).to_le_bytes());
        buf.extend_from_slice(id.as_bytes());
    }
    for &len in &index.doc_lengths {
        buf.extend_from_slice(&len.to_le_bytes());
    }
    buf.extend_from_slice(&(index.postings.len() as u64).to_le_bytes());
    for (term, postings) in &index.postings {
        buf.extend_from_slice(&(term.len() as u32).to_le_bytes());
        buf.extend_from_slice(term.as_bytes());
        buf.extend_from_slice(&(postings.len() as u64).to_le_bytes());
        for posting in postings {
            buf.extend_from_slice(&posting.ordinal.to_le_bytes());
            buf.extend_from_slice(&posting.tf.to_le_bytes());
        }
    }
    fsutil::write_atomic(path, &buf)?;

    let meta = IndexMeta {
        format_version: FORMAT_VERSION,
        passage_count: index.id_table.len(),
        term_count: index.postings.len(),
        params: index.params,
        corpus_hash: corpus_hash.to_string(),
    };
    let json = serde_json::to_vec_pretty(&meta).map_err(|e| Error::Json {
        path: sidecar_path(path),
        source: e,
    })?;
    fsutil::write_atomic(&sidecar_path(path), &json)
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

    fn f64_le(&mut self) -> Option<f64> {
        self.take(8)
            .map(|b| f64::from_le_bytes(b.try_into().unwrap()))
    }

    fn string(&mut self) -> Option<String> {
        let len = self.u32_le()? as usize;
        let raw = self.take(len)?;
        std::str::from_utf8(raw).ok().map(str::to_string)
    }
}

/// Reads an index back and revalidates its invariants.
pub fn load_bm25(path: &Path) -> Result<Bm25Index> {
    let bytes = fsutil::read_bytes(path)?;
    let corrupt = |message: &str| Error::Format {
        path: path.to_path_buf(),
        message: message.to_string(),
    };

    if bytes.len() < 4 || &bytes[..4] != MAGIC {
        return Err(corrupt("not a BMIX index file"));
    }
    let mut cursor = Cursor {
        bytes: &bytes,
        pos: 4,
    };
    let version = cursor.u32_le().ok_or_else(|| corrupt("truncated header"))?;
    if version != FORMAT_VERSION {
        return Err(corrupt("unsupported format version"));
    }
    let k1 = cursor.f64_le().ok_or_else(|| corrupt("truncated header"))?;
    let b = cursor.f64_le().ok_or_else(|| corrupt("truncated header"))?;
    let n_docs = cursor.u64_le().ok_or_else(|| corrupt("truncated header"))? as usize;

    let mut id_table = Vec::with_capacity(n_docs);
    for _ in 0..n_docs {
        id_table.push(
            cursor
                .string()
                .ok_or_else(|| corrupt("truncated id table"))?,
        );
    }
    let mut doc_lengths = Vec::with_capacity(n_docs);
    for _ in 0..n_docs {
        doc_lengths.push(
            cursor
                .u32_le()
                .ok_or_else(|| corrupt("truncated doc lengths"))?,
        );
    }
    let n_terms = cursor
        .u64_le()
        .ok_or_else(|| corrupt("truncated term count"))? as usize;
    let mut postings = BTreeMap::new();
    for _ in 0..n_terms {
        let term = cursor
            .string()
            .ok_or_else(|| corrupt("truncated term table"))?;
        let n_postings = cursor
            .u64_le()
            .ok_or_else(|| corrupt("truncated postings"))? as usize;
        let mut list = Vec::with_capacity(n_postings);
        for _ in 0..n_postings {
            let ordinal = cursor
                .u32_le()
                .ok_or_else(|| corrupt("truncated postings"))?;
            let tf = cursor
                .u32_le()
                .ok_or_else(|| corrupt("truncated postings"))?;
            list.push(Posting { ordinal, tf });
        }
        postings.insert(term, list);
    }
    if cursor.pos != bytes.len() {
        return Err(corrupt("trailing bytes after postings"));
    }

    if doc_lengths.is_empty() {
        return Err(corrupt("empty index"));
    }
    let avgdl = doc_lengths.iter().map(|&l| l as f64).sum::<f64>() / doc_lengths.len() as f64;
    let index = Bm25Index {
        params: Bm25Params { k1, b },
        postings,
        doc_lengths,
        avgdl,
        id_table,
    };
    index.validate()?;
    Ok(index)
}

pub fn load_meta(index_path: &Path) -> Result<IndexMeta> {
    let path = sidecar_path(index_path);
    let raw = fsutil::read_to_string(&path)?;
    serde_json::from_str(&raw).map_err(|e| Error::Json { path, source: e })
}

#[cfg(test)]
mod tests {
    use super::*;
    use gdr_core::corpus::TextRange;
    use gdr_core::lexindex::build_bm25;
    use gdr_core::Passage;
    use std::num::NonZeroUsize;

    fn passage(id: &str, body: &str) -> Passage {
        Passage {
            passage_id: id.into(),
            doc_id: "d".into(),
            domain: "ssa".into(),
            title_path: vec![],
            body: body.into(),
            rendered_text: body.into(),
            token_count: 0,
            source_range: TextRange::new(0, 0),
        }
    }

    #[test]
    fn roundtrip_preserves_search_results() {
        let corpus = vec![
            passage("p0", "cat sat on the mat"),
            passage("p1", "dog ran in the park"),
            passage("p2", "cat cat dog"),
        ];
        let index = build_bm25(&corpus, Bm25Params::default()).unwrap();

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("index.bmix");
        save_bm25(&path, &index, "deadbeef").unwrap();
        let back = load_bm25(&path).unwrap();
        assert_eq!(back, index);

        let k = NonZeroUsize::new(3).unwrap();
        let a = gdr_core::lexindex::bm25_search(&index, "cat dog", k);
        let b = gdr_core::lexindex::bm25_search(&back, "cat dog", k);
        assert_eq!(a, b);

        let meta = load_meta(&path).unwrap();
        assert_eq!(meta.passage_count, 3);
        assert_eq!(meta.corpus_hash, "deadbeef");
        assert_eq!(meta.params, Bm25Params::default());
    }

    #[test]
    fn wrong_magic_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("index.bmix");
        std::fs::write(&path, b"NOPE....").unwrap();
        let err = load_bm25(&path).unwrap_err();
        assert!(err.to_string().contains("not a BMIX"), "{err}");
    }

    #[test]
    fn truncation_rejected() {
        let corpus = vec![passage("p0", "alpha beta"), passage("p1", "gamma")];
        let index = build_bm25(&corpus, Bm25Params::default()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("index.bmix");
        save_bm25(&path, &index, "x").unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        bytes.truncate(bytes.len() - 5);
        std::fs::write(&path, &bytes).unwrap();
        assert!(load_bm25(&path).is_err());
    }
}

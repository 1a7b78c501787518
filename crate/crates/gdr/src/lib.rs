//! IO, file formats and ingestion for the grounded-dialogue retrieval
//! toolkit.
//!
//! This crate wraps the pure algorithms of [`gdr_core`] with everything
//! that touches the filesystem: schema adapters for the upstream dataset
//! layout, canonical JSON Lines interchange, index and embedding
//! persistence, run files, evaluation reports and the `gdr` command-line
//! interface.
//!
//! All outputs are written atomically (temp file + rename) and carry a
//! SHA-256 content hash of their inputs, either inline (run file header,
//! report JSON) or in a `.meta.json` sidecar for plain JSONL outputs.

use std::path::PathBuf;

pub mod adapters;
pub mod embed_io;
pub mod fsutil;
pub mod index_io;
pub mod jsonl;
pub mod report;
pub mod runfile;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}:{line}: {source}", path.display())]
    JsonLine {
        path: PathBuf,
        line: usize,
        #[source]
        source: serde_json::Error,
    },
    #[error("{}: {source}", path.display())]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("{}: {message}", path.display())]
    Ingest { path: PathBuf, message: String },
    #[error("{}: {message}", path.display())]
    Format { path: PathBuf, message: String },
    #[error(transparent)]
    Corpus(#[from] gdr_core::corpus::CorpusError),
    #[error(transparent)]
    Dialogue(#[from] gdr_core::dialogue::DialogueError),
    #[error(transparent)]
    Bm25(#[from] gdr_core::lexindex::Bm25Error),
    #[error(transparent)]
    Dense(#[from] gdr_core::denseindex::DenseError),
    #[error(transparent)]
    Retrieve(#[from] gdr_core::retrieve::RetrieveError),
    #[error(transparent)]
    Metrics(#[from] gdr_core::metrics::MetricsError),
    #[error(transparent)]
    Flowgen(#[from] gdr_core::flowgen::FlowgenError),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn ingest(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Ingest {
            path: path.into(),
            message: message.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

//! Core algorithms for open-retrieval, document-grounded dialogue.
//!
//! This crate holds the pure, allocation-only parts of the toolkit:
//!
//! - [`text`]: tokenization and normalization shared by indexing and metrics
//! - [`corpus`]: structured source documents and the two passage
//!   segmentation strategies (token window and structure-based)
//! - [`lexindex`]: an Okapi BM25 inverted index over a passage corpus
//! - [`denseindex`]: exact maximum-inner-product search over externally
//!   supplied embeddings
//! - [`dialogue`]: the dialogue data model, task-instance extraction and
//!   dialogue-query string construction
//! - [`retrieve`]: retrieval orchestration and the current-turn re-ranking
//!   union
//! - [`metrics`]: recall@k, token-F1, exact match and corpus BLEU
//! - [`flowgen`]: rule-based composition of multi-document dialogue flows
//!
//! Everything here is deterministic: the same inputs (and seeds, where
//! randomness is involved) produce byte-identical outputs. File formats,
//! ingestion adapters and the command-line interface live in the `gdr`
//! companion crate.
//!
//! The crate is `no_std`-compatible with `alloc`; the default `std` feature
//! only forwards to dependencies.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod corpus;
pub mod denseindex;
pub mod dialogue;
pub mod flowgen;
pub mod lexindex;
pub mod metrics;
pub mod retrieve;
pub mod rng;
pub mod text;

pub use corpus::{Passage, SegmentationMode, SourceDocument, SpanNode, TextRange};
pub use dialogue::{DialQuery, DialTurn, Dialogue, GroundingRef, Role};
pub use retrieve::{HitSource, RetrievalRun, ScoredHit};

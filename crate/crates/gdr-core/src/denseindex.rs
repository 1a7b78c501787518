//! Exact maximum-inner-product search over externally supplied embeddings.
//!
//! No encoder runs in-process: passage and query vectors arrive through
//! the embedding interchange files handled by the companion crate. The
//! index is a flat row matrix and search is an exhaustive exact scan,
//! never an approximation. Scores accumulate in f64 left to right over
//! the components, so results are bit-reproducible.

use alloc::string::String;
use alloc::vec::Vec;
use core::num::NonZeroUsize;

use serde::{Deserialize, Serialize};

use crate::retrieve::{HitSource, ScoredHit};

/// An ordered collection of id/vector pairs with a single dimensionality.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingSet {
    pub dim: usize,
    pub entries: Vec<EmbeddingEntry>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingEntry {
    pub id: String,
    pub vector: Vec<f32>,
}

impl EmbeddingSet {
    /// Builds a set from entries, inferring the dimension from the first
    /// row and rejecting dimension mismatches and duplicate ids.
    pub fn from_entries(entries: Vec<EmbeddingEntry>) -> Result<Self, DenseError> {
        let Some(first) = entries.first() else {
            return Err(DenseError::Empty);
        };
        let dim = first.vector.len();
        if dim == 0 {
            return Err(DenseError::ZeroDim {
                id: first.id.clone(),
            });
        }
        let mut seen: alloc::collections::BTreeSet<&str> = alloc::collections::BTreeSet::new();
        for entry in &entries {
            if entry.vector.len() != dim {
                return Err(DenseError::DimensionMismatch {
                    id: entry.id.clone(),
                    expected: dim,
                    got: entry.vector.len(),
                });
            }
            if !seen.insert(entry.id.as_str()) {
                return Err(DenseError::DuplicateId {
                    id: entry.id.clone(),
                });
            }
        }
        Ok(Self { dim, entries })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Flat exact inner-product index.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseIndex {
    dim: usize,
    /// Row-major vector storage, one row per id.
    matrix: Vec<f32>,
    id_table: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum DenseError {
    #[error("embedding set is empty")]
    Empty,
    #[error("embedding `{id}` has zero dimension")]
    ZeroDim { id: String },
    #[error("embedding `{id}` has {got} components, expected {expected}")]
    DimensionMismatch {
        id: String,
        expected: usize,
        got: usize,
    },
    #[error("duplicate embedding id `{id}`")]
    DuplicateId { id: String },
    #[error("query vector has {got} components, expected {expected}")]
    QueryDimensionMismatch { expected: usize, got: usize },
}

impl DenseIndex {
    pub fn build(set: &EmbeddingSet) -> Result<Self, DenseError> {
        if set.entries.is_empty() {
            return Err(DenseError::Empty);
        }
        let mut matrix = Vec::with_capacity(set.entries.len() * set.dim);
        let mut id_table = Vec::with_capacity(set.entries.len());
        for entry in &set.entries {
            if entry.vector.len() != set.dim {
                return Err(DenseError::DimensionMismatch {
                    id: entry.id.clone(),
                    expected: set.dim,
                    got: entry.vector.len(),
                });
            }
            matrix.extend_from_slice(&entry.vector);
            id_table.push(entry.id.clone());
        }
        Ok(Self {
            dim: set.dim,
            matrix,
            id_table,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.id_table.len()
    }

    pub fn is_empty(&self) -> bool {
        self.id_table.is_empty()
    }

    pub fn ids(&self) -> &[String] {
        &self.id_table
    }

    /// Exact inner product of the query against one stored row, summed
    /// left to right in f64.
    fn score_row(&self, row: usize, query: &[f32]) -> f64 {
        let offset = row * self.dim;
        let stored = &self.matrix[offset..offset + self.dim];
        let mut acc = 0.0f64;
        for (q, v) in query.iter().zip(stored) {
            acc += *q as f64 * *v as f64;
        }
        acc
    }

    /// Returns exactly `min(k, n)` hits sorted by inner product descending,
    /// ties broken by id ascending. Zero and negative scores are returned;
    /// exhaustiveness, not score sign, decides membership.
    pub fn search(&self, query: &[f32], k: NonZeroUsize) -> Result<Vec<ScoredHit>, DenseError> {
        if query.len() != self.dim {
            return Err(DenseError::QueryDimensionMismatch {
                expected: self.dim,
                got: query.len(),
            });
        }
        let mut hits: Vec<ScoredHit> = (0..self.id_table.len())
            .map(|row| ScoredHit {
                passage_id: self.id_table[row].clone(),
                score: self.score_row(row, query),
                rank: 0,
                source: HitSource::FullQuery,
            })
            .collect();
        hits.sort_by(|a, b| {
            b.score
                .total_cmp(&a.score)
                .then_with(|| a.passage_id.cmp(&b.passage_id))
        });
        hits.truncate(k.get());
        for (i, hit) in hits.iter_mut().enumerate() {
            hit.rank = (i + 1) as u32;
        }
        Ok(hits)
    }
}

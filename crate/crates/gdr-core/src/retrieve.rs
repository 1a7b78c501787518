//! Retrieval orchestration over either index and the current-turn
//! re-ranking union.
//!
//! Re-ranking never compares scores across the two hit lists (they may
//! come from different encoders); the merge is positional: a round-robin
//! walk starting from the full-query list, skipping passages already
//! emitted, stopping at `k`.

use alloc::collections::BTreeMap;
use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec::Vec;
use core::num::NonZeroUsize;

use serde::{Deserialize, Serialize};

use crate::denseindex::{DenseError, DenseIndex};
use crate::dialogue::DialQuery;
use crate::lexindex::{bm25_search, Bm25Index};

/// Which query string produced a hit.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HitSource {
    FullQuery,
    CurrentTurn,
}

impl HitSource {
    pub fn as_str(&self) -> &'static str {
        match self {
            HitSource::FullQuery => "full_query",
            HitSource::CurrentTurn => "current_turn",
        }
    }
}

/// One ranked retrieval result.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoredHit {
    pub passage_id: String,
    pub score: f64,
    /// 1-based rank within its result list.
    pub rank: u32,
    pub source: HitSource,
}

/// Descriptor of how a run was produced, echoed into the run file header.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunConfig {
    pub retriever: String,
    pub segmentation: String,
    pub rerank: String,
    pub k: usize,
}

/// Ranked, scored hits per query.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RetrievalRun {
    pub config: RunConfig,
    pub results: BTreeMap<String, Vec<ScoredHit>>,
}

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum RetrieveError {
    #[error("query embeddings missing for {} query id(s): {}", ids.len(), ids.join(", "))]
    MissingQueryEmbeddings { ids: Vec<String> },
    #[error(transparent)]
    Dense(#[from] DenseError),
}

/// Alternative merge policies for combining the two hit lists.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MergePolicy {
    /// Alternate full-query and current-turn hits, full first.
    #[default]
    RoundRobin,
    /// All full-query hits, then current-turn hits.
    ConcatDedupe,
}

/// Runs BM25 retrieval for every query; the rendered query string comes
/// from `render`, and every hit is tagged with `source`.
pub fn retrieve_all_bm25<F>(
    index: &Bm25Index,
    queries: &[DialQuery],
    k: NonZeroUsize,
    render: F,
    source: HitSource,
) -> BTreeMap<String, Vec<ScoredHit>>
where
    F: Fn(&DialQuery) -> String,
{
    let mut results = BTreeMap::new();
    for query in queries {
        let rendered = render(query);
        let mut hits = bm25_search(index, &rendered, k);
        for hit in &mut hits {
            hit.source = source;
        }
        results.insert(query.query_id.clone(), hits);
    }
    results
}

/// Runs dense retrieval for every query, looking up each query's vector
/// in `embeddings` by query id. Fails up front listing every missing id.
pub fn retrieve_all_dense(
    index: &DenseIndex,
    queries: &[DialQuery],
    embeddings: &BTreeMap<String, Vec<f32>>,
    k: NonZeroUsize,
    source: HitSource,
) -> Result<BTreeMap<String, Vec<ScoredHit>>, RetrieveError> {
    let missing: Vec<String> = queries
        .iter()
        .filter(|q| !embeddings.contains_key(&q.query_id))
        .map(|q| q.query_id.clone())
        .collect();
    if !missing.is_empty() {
        return Err(RetrieveError::MissingQueryEmbeddings { ids: missing });
    }

    let mut results = BTreeMap::new();
    for query in queries {
        let vector = &embeddings[&query.query_id];
        let mut hits = index.search(vector, k)?;
        for hit in &mut hits {
            hit.source = source;
        }
        results.insert(query.query_id.clone(), hits);
    }
    Ok(results)
}

/// Combines full-query and current-turn hit lists into the top-k unique
/// passages with the round-robin policy: `full[0], current[0], full[1],
/// current[1], ...` skipping already-emitted passage ids. Each emitted hit
/// keeps its originating score and source; ranks are reassigned 1..n.
pub fn rerank_union(full: &[ScoredHit], current: &[ScoredHit], k: NonZeroUsize) -> Vec<ScoredHit> {
    merge_hits(full, current, k, MergePolicy::RoundRobin)
}

/// Merge with an explicit policy; see [`rerank_union`].
pub fn merge_hits(
    full: &[ScoredHit],
    current: &[ScoredHit],
    k: NonZeroUsize,
    policy: MergePolicy,
) -> Vec<ScoredHit> {
    let ordered: Vec<&ScoredHit> = match policy {
        MergePolicy::RoundRobin => {
            let mut ordered = Vec::with_capacity(full.len() + current.len());
            let mut fi = full.iter();
            let mut ci = current.iter();
            loop {
                let f = fi.next();
                let c = ci.next();
                if f.is_none() && c.is_none() {
                    break;
                }
                if let Some(f) = f {
                    ordered.push(f);
                }
                if let Some(c) = c {
                    ordered.push(c);
                }
            }
            ordered
        }
        MergePolicy::ConcatDedupe => full.iter().chain(current.iter()).collect(),
    };

    let mut seen: BTreeSet<&str> = BTreeSet::new();
    let mut out = Vec::with_capacity(k.get().min(ordered.len()));
    for hit in ordered {
        if out.len() == k.get() {
            break;
        }
        if seen.insert(hit.passage_id.as_str()) {
            let mut hit = hit.clone();
            hit.rank = (out.len() + 1) as u32;
            out.push(hit);
        }
    }
    out
}

/// Applies the merge per query over two result maps. Queries present in
/// only one map merge against an empty list.
pub fn rerank_results(
    full: &BTreeMap<String, Vec<ScoredHit>>,
    current: &BTreeMap<String, Vec<ScoredHit>>,
    k: NonZeroUsize,
    policy: MergePolicy,
) -> BTreeMap<String, Vec<ScoredHit>> {
    let mut out = BTreeMap::new();
    let ids: BTreeSet<&String> = full.keys().chain(current.keys()).collect();
    for id in ids {
        let f = full.get(id).map(Vec::as_slice).unwrap_or(&[]);
        let c = current.get(id).map(Vec::as_slice).unwrap_or(&[]);
        out.insert(id.clone(), merge_hits(f, c, k, policy));
    }
    out
}

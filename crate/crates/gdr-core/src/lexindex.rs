//! Okapi BM25 inverted index over a passage corpus.
//!
//! The index is built once over the `rendered_text` of every passage and
//! is immutable afterwards, so any number of concurrent searches are safe.
//! Scoring uses the non-negative idf form `ln(1 + (N - df + 0.5) / (df +
//! 0.5))`, which keeps every returned score strictly positive, and query
//! terms are deduplicated (no query-side term frequency).

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use core::num::NonZeroUsize;

use serde::{Deserialize, Serialize};

use crate::corpus::Passage;
use crate::retrieve::{HitSource, ScoredHit};
use crate::text;

/// BM25 free parameters.
///
/// The defaults follow the common open-QA reproduction setting; the
/// classic Robertson parameters are available as [`Bm25Params::CLASSIC`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bm25Params {
    pub k1: f64,
    pub b: f64,
}

impl Default for Bm25Params {
    fn default() -> Self {
        Self { k1: 0.9, b: 0.4 }
    }
}

impl Bm25Params {
    pub const CLASSIC: Bm25Params = Bm25Params { k1: 1.2, b: 0.75 };

    pub fn validate(&self) -> Result<(), Bm25Error> {
        let k1_ok = self.k1.is_finite() && self.k1 >= 0.0;
        let b_ok = self.b.is_finite() && (0.0..=1.0).contains(&self.b);
        if !k1_ok || !b_ok {
            return Err(Bm25Error::InvalidParams {
                k1: self.k1,
                b: self.b,
            });
        }
        Ok(())
    }
}

/// One posting: which passage a term occurs in and how often.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Posting {
    pub ordinal: u32,
    pub tf: u32,
}

/// Immutable inverted index.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bm25Index {
    pub params: Bm25Params,
    /// term -> postings sorted by passage ordinal.
    pub postings: BTreeMap<String, Vec<Posting>>,
    /// Per-passage index token counts.
    pub doc_lengths: Vec<u32>,
    /// Mean of `doc_lengths`.
    pub avgdl: f64,
    /// ordinal -> passage id.
    pub id_table: Vec<String>,
}

impl Bm25Index {
    pub fn n_docs(&self) -> usize {
        self.id_table.len()
    }

    /// Revalidates the structural invariants, for indexes read back from
    /// persistence.
    pub fn validate(&self) -> Result<(), Bm25Error> {
        self.params.validate()?;
        if self.id_table.is_empty() || self.id_table.len() != self.doc_lengths.len() {
            return Err(Bm25Error::Corrupt("id table / doc length mismatch"));
        }
        let expected_avgdl =
            self.doc_lengths.iter().map(|&l| l as f64).sum::<f64>() / self.doc_lengths.len() as f64;
        if (self.avgdl - expected_avgdl).abs() > 1e-9 {
            return Err(Bm25Error::Corrupt(
                "stored avgdl does not match doc lengths",
            ));
        }
        for postings in self.postings.values() {
            if postings.windows(2).any(|w| w[0].ordinal >= w[1].ordinal) {
                return Err(Bm25Error::Corrupt("postings not sorted by ordinal"));
            }
            if postings
                .iter()
                .any(|p| p.tf == 0 || p.ordinal as usize >= self.id_table.len())
            {
                return Err(Bm25Error::Corrupt("posting out of range"));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum Bm25Error {
    #[error("cannot build an index over an empty passage list")]
    EmptyCorpus,
    #[error("invalid BM25 parameters: k1={k1}, b={b}")]
    InvalidParams { k1: f64, b: f64 },
    #[error("corrupt index: {0}")]
    Corrupt(&'static str),
}

/// Builds an index over the rendered text of `passages`.
pub fn build_bm25(passages: &[Passage], params: Bm25Params) -> Result<Bm25Index, Bm25Error> {
    params.validate()?;
    if passages.is_empty() {
        return Err(Bm25Error::EmptyCorpus);
    }

    let mut postings: BTreeMap<String, Vec<Posting>> = BTreeMap::new();
    let mut doc_lengths = Vec::with_capacity(passages.len());
    let mut id_table = Vec::with_capacity(passages.len());

    for (ordinal, passage) in passages.iter().enumerate() {
        let tokens = text::index_tokenize(&passage.rendered_text);
        doc_lengths.push(tokens.len() as u32);
        id_table.push(passage.passage_id.clone());

        let mut tf: BTreeMap<String, u32> = BTreeMap::new();
        for token in tokens {
            *tf.entry(token).or_insert(0) += 1;
        }
        for (term, freq) in tf {
            postings.entry(term).or_default().push(Posting {
                ordinal: ordinal as u32,
                tf: freq,
            });
        }
    }

    let avgdl = doc_lengths.iter().map(|&l| l as f64).sum::<f64>() / doc_lengths.len() as f64;

    Ok(Bm25Index {
        params,
        postings,
        doc_lengths,
        avgdl,
        id_table,
    })
}

/// Scores the query against the index and returns the top `k` passages.
///
/// Hits are sorted by score descending with ties broken by passage id
/// ascending; passages containing no query term are never returned, so
/// every score is strictly positive. A query with no indexed terms yields
/// an empty list.
pub fn bm25_search(index: &Bm25Index, query_text: &str, k: NonZeroUsize) -> Vec<ScoredHit> {
    let mut terms = text::index_tokenize(query_text);
    terms.sort_unstable();
    terms.dedup();

    let n = index.n_docs() as f64;
    let k1 = index.params.k1;
    let b = index.params.b;

    // Dense accumulator over ordinals; every contribution is positive, so
    // a nonzero cell means the passage shares a term with the query.
    let mut scores = alloc::vec![0.0f64; index.n_docs()];
    for term in &terms {
        let Some(postings) = index.postings.get(term) else {
            continue;
        };
        let df = postings.len() as f64;
        let idf = libm::log(1.0 + (n - df + 0.5) / (df + 0.5));
        for posting in postings {
            let tf = posting.tf as f64;
            let dl = index.doc_lengths[posting.ordinal as usize] as f64;
            let denom = tf + k1 * (1.0 - b + b * dl / index.avgdl);
            scores[posting.ordinal as usize] += idf * tf * (k1 + 1.0) / denom;
        }
    }

    let mut candidates: Vec<(u32, f64)> = scores
        .into_iter()
        .enumerate()
        .filter(|(_, score)| *score > 0.0)
        .map(|(ordinal, score)| (ordinal as u32, score))
        .collect();
    // Total order (ids are unique), so unstable selection stays
    // deterministic.
    let by_score_then_id = |a: &(u32, f64), b: &(u32, f64)| {
        b.1.total_cmp(&a.1)
            .then_with(|| index.id_table[a.0 as usize].cmp(&index.id_table[b.0 as usize]))
    };
    if candidates.len() > k.get() {
        candidates.select_nth_unstable_by(k.get() - 1, by_score_then_id);
        candidates.truncate(k.get());
    }
    candidates.sort_unstable_by(by_score_then_id);

    candidates
        .into_iter()
        .enumerate()
        .map(|(i, (ordinal, score))| ScoredHit {
            passage_id: index.id_table[ordinal as usize].clone(),
            score,
            rank: (i + 1) as u32,
            source: HitSource::FullQuery,
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{make_passage_id, TextRange};
    use alloc::format;
    use alloc::string::ToString;
    use alloc::vec;

    fn nz(n: usize) -> NonZeroUsize {
        NonZeroUsize::new(n).unwrap()
    }

    fn passage(id: &str, body: &str) -> Passage {
        Passage {
            passage_id: id.to_string(),
            doc_id: "d".to_string(),
            domain: "ssa".to_string(),
            title_path: Vec::new(),
            body: body.to_string(),
            rendered_text: body.to_string(),
            token_count: text::count_index_tokens(body),
            source_range: TextRange::new(0, body.len()),
        }
    }

    #[test]
    fn build_single_passage_postings() {
        let index = build_bm25(&[passage("p0", "a b a")], Bm25Params::default()).unwrap();
        assert_eq!(index.postings["a"], vec![Posting { ordinal: 0, tf: 2 }]);
        assert_eq!(index.postings["b"], vec![Posting { ordinal: 0, tf: 1 }]);
        assert_eq!(index.avgdl, 3.0);
        assert_eq!(index.doc_lengths, vec![3]);
    }

    #[test]
    fn identical_texts_identical_lengths() {
        let index = build_bm25(
            &[
                passage("p0", "same text here"),
                passage("p1", "same text here"),
            ],
            Bm25Params::default(),
        )
        .unwrap();
        assert_eq!(index.doc_lengths[0], index.doc_lengths[1]);
    }

    #[test]
    fn build_empty_corpus_is_an_error() {
        assert_eq!(
            build_bm25(&[], Bm25Params::default()),
            Err(Bm25Error::EmptyCorpus)
        );
    }

    #[test]
    fn invalid_params_rejected() {
        assert!(build_bm25(&[passage("p", "x")], Bm25Params { k1: -0.1, b: 0.4 }).is_err());
        assert!(build_bm25(&[passage("p", "x")], Bm25Params { k1: 0.9, b: 1.5 }).is_err());
    }

    #[test]
    fn unknown_terms_return_empty() {
        let index = build_bm25(&[passage("p0", "cat sat")], Bm25Params::default()).unwrap();
        assert!(bm25_search(&index, "zebra quantum", nz(5)).is_empty());
        assert!(bm25_search(&index, "", nz(5)).is_empty());
    }

    // Scores below were evaluated independently from the formula:
    //   idf(t) = ln(1 + (N - df + 0.5) / (df + 0.5))
    //   score  = sum idf * tf (k1+1) / (tf + k1 (1 - b + b dl/avgdl))
    // with k1 = 0.9, b = 0.4 over the corpus {cat sat, dog sat, cat cat}.
    #[test]
    fn search_matches_hand_computed_scores() {
        let corpus = [
            passage("p0", "cat sat"),
            passage("p1", "dog sat"),
            passage("p2", "cat cat"),
        ];
        let index = build_bm25(&corpus, Bm25Params::default()).unwrap();
        let hits = bm25_search(&index, "cat", nz(3));
        assert_eq!(hits.len(), 2);
        assert_eq!(hits[0].passage_id, "p2");
        assert_eq!(hits[1].passage_id, "p0");
        // idf(cat) = ln(1.6); p2 multiplier 2*1.9/2.9, p0 multiplier 1.
        assert!((hits[0].score - 0.615866824528895).abs() < 1e-12);
        assert!((hits[1].score - 0.47000362924573563).abs() < 1e-12);
        assert_eq!(hits[0].rank, 1);
        assert_eq!(hits[1].rank, 2);
    }

    #[test]
    fn multi_term_scores_sum_per_term() {
        let corpus = [
            passage("p0", "cat sat"),
            passage("p1", "dog sat"),
            passage("p2", "cat cat"),
        ];
        let index = build_bm25(&corpus, Bm25Params::default()).unwrap();
        let hits = bm25_search(&index, "cat sat", nz(3));
        assert_eq!(hits.len(), 3);
        // Query terms are deduplicated: "cat cat" scores like "cat".
        let dedup = bm25_search(&index, "cat cat", nz(3));
        let single = bm25_search(&index, "cat", nz(3));
        assert_eq!(dedup, single);
        for hit in &hits {
            assert!(hit.score > 0.0);
        }
    }

    #[test]
    fn ties_break_by_passage_id() {
        let corpus = [passage("pb", "cat"), passage("pa", "cat")];
        let index = build_bm25(&corpus, Bm25Params::default()).unwrap();
        let hits = bm25_search(&index, "cat", nz(2));
        assert_eq!(hits[0].passage_id, "pa");
        assert_eq!(hits[1].passage_id, "pb");
    }

    #[test]
    fn k_limits_results_and_is_a_prefix() {
        let corpus: Vec<Passage> = (0..20)
            .map(|i| {
                passage(
                    &make_passage_id("d", "token", i),
                    &format!("term{i} shared"),
                )
            })
            .collect();
        let index = build_bm25(&corpus, Bm25Params::default()).unwrap();
        let all = bm25_search(&index, "shared term3 term7", nz(20));
        for k in 1..=20 {
            let topk = bm25_search(&index, "shared term3 term7", nz(k));
            assert_eq!(topk.len(), k.min(all.len()));
            for (a, b) in topk.iter().zip(all.iter()) {
                assert_eq!(a.passage_id, b.passage_id);
            }
        }
    }

    #[test]
    fn self_retrieval_with_unique_vocabulary() {
        let corpus: Vec<Passage> = (0..30)
            .map(|i| {
                let body = format!("uniq{i}a uniq{i}b uniq{i}c");
                passage(&format!("p{i:02}"), &body)
            })
            .collect();
        let index = build_bm25(&corpus, Bm25Params::default()).unwrap();
        for p in &corpus {
            let hits = bm25_search(&index, &p.rendered_text, nz(1));
            assert_eq!(hits[0].passage_id, p.passage_id);
        }
    }

    #[test]
    fn search_is_deterministic() {
        let corpus: Vec<Passage> = (0..10)
            .map(|i| passage(&format!("p{i}"), &format!("alpha beta{} gamma", i % 3)))
            .collect();
        let index = build_bm25(&corpus, Bm25Params::default()).unwrap();
        let a = bm25_search(&index, "alpha beta0", nz(10));
        let b = bm25_search(&index, "alpha beta0", nz(10));
        assert_eq!(a, b);
    }

    #[test]
    fn roundtrip_validate() {
        let corpus = [passage("p0", "cat sat"), passage("p1", "dog ran")];
        let index = build_bm25(&corpus, Bm25Params::default()).unwrap();
        index.validate().unwrap();
    }
}

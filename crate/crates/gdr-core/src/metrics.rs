//! Retrieval and generation evaluation: recall@k, token-F1, exact match,
//! corpus BLEU.
//!
//! Recall is computed at passage level: the positives for a query are all
//! passages of the referenced document whose source range overlaps the
//! gold grounding span. A document-level mode is available by mapping hit
//! passage ids onto their document ids before scoring.
//!
//! Token-F1 and exact match follow the SQuAD convention via
//! [`text::squad_normalize`]; BLEU follows the reference SacreBLEU
//! defaults: 13a tokenization, case sensitive, clipped n-gram precisions
//! up to order 4 pooled over the corpus, exponential (halving) smoothing
//! for zero precision counts, and the standard brevity penalty.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::num::NonZeroUsize;

use serde::{Deserialize, Serialize};

use crate::corpus::{Passage, SourceDocument, TextRange};
use crate::dialogue::DialQuery;
use crate::retrieve::RetrievalRun;
use crate::text;

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum MetricsError {
    #[error("query `{query_id}` references unknown doc `{doc_id}`")]
    UnresolvedDoc { query_id: String, doc_id: String },
    #[error("query `{query_id}` references unknown span `{span_id}` of doc `{doc_id}`")]
    UnresolvedSpan {
        query_id: String,
        doc_id: String,
        span_id: String,
    },
    #[error("recall over zero eligible queries")]
    NoEligibleQueries,
    #[error("predictions and references differ in length: {preds} vs {refs}")]
    LengthMismatch { preds: usize, refs: usize },
    #[error("metric input is empty")]
    EmptyInput,
}

/// Passages grouped by owning document, for positive-set resolution.
pub struct PassageCatalog<'a> {
    by_doc: BTreeMap<&'a str, Vec<&'a Passage>>,
}

impl<'a> PassageCatalog<'a> {
    pub fn new(passages: &'a [Passage]) -> Self {
        let mut by_doc: BTreeMap<&str, Vec<&Passage>> = BTreeMap::new();
        for passage in passages {
            by_doc
                .entry(passage.doc_id.as_str())
                .or_default()
                .push(passage);
        }
        Self { by_doc }
    }

    pub fn passages_of(&self, doc_id: &str) -> &[&'a Passage] {
        self.by_doc.get(doc_id).map(Vec::as_slice).unwrap_or(&[])
    }
}

/// The passages a retrieval hit may legitimately match for this query:
/// every passage of the referenced document whose source range overlaps a
/// gold grounding range. A reference without an explicit char range is
/// resolved through its span id first.
///
/// An empty gold grounding yields an empty set (the caller excludes such
/// queries from recall denominators); an unresolvable document or span id
/// is an error naming the query.
pub fn positive_passages(
    query: &DialQuery,
    docs: &BTreeMap<String, SourceDocument>,
    catalog: &PassageCatalog<'_>,
) -> Result<BTreeSet<String>, MetricsError> {
    let mut positives = BTreeSet::new();
    for gref in &query.gold_grounding {
        let doc = docs
            .get(&gref.doc_id)
            .ok_or_else(|| MetricsError::UnresolvedDoc {
                query_id: query.query_id.clone(),
                doc_id: gref.doc_id.clone(),
            })?;
        let range: TextRange = match gref.char_range {
            Some(range) => range,
            None => {
                doc.find_span(&gref.span_id)
                    .ok_or_else(|| MetricsError::UnresolvedSpan {
                        query_id: query.query_id.clone(),
                        doc_id: gref.doc_id.clone(),
                        span_id: gref.span_id.clone(),
                    })?
                    .range
            }
        };
        for passage in catalog.passages_of(&gref.doc_id) {
            if passage.source_range.overlaps(&range) {
                positives.insert(passage.passage_id.clone());
            }
        }
    }
    Ok(positives)
}

/// Document ids referenced by the gold grounding, for document-level
/// recall.
pub fn positive_documents(query: &DialQuery) -> BTreeSet<String> {
    query
        .gold_grounding
        .iter()
        .map(|gref| gref.doc_id.clone())
        .collect()
}

/// Fraction of queries whose top-k hits intersect their positive set.
///
/// Queries with an empty positive set are excluded from the denominator;
/// if no query remains the recall is undefined and an error is returned.
pub fn recall_at_k(
    run: &RetrievalRun,
    positives: &BTreeMap<String, BTreeSet<String>>,
    k: NonZeroUsize,
) -> Result<f64, MetricsError> {
    let mut eligible = 0usize;
    let mut found = 0usize;
    for (query_id, hits) in &run.results {
        let Some(positive) = positives.get(query_id) else {
            continue;
        };
        if positive.is_empty() {
            continue;
        }
        eligible += 1;
        if hits
            .iter()
            .take(k.get())
            .any(|h| positive.contains(&h.passage_id))
        {
            found += 1;
        }
    }
    if eligible == 0 {
        return Err(MetricsError::NoEligibleQueries);
    }
    Ok(found as f64 / eligible as f64)
}

fn count_tokens(tokens: &[String]) -> BTreeMap<&str, u64> {
    let mut counts: BTreeMap<&str, u64> = BTreeMap::new();
    for token in tokens {
        *counts.entry(token.as_str()).or_insert(0) += 1;
    }
    counts
}

fn f1_single(pred_tokens: &[String], gold_tokens: &[String]) -> f64 {
    if pred_tokens.is_empty() || gold_tokens.is_empty() {
        return if pred_tokens == gold_tokens { 1.0 } else { 0.0 };
    }
    let pred_counts = count_tokens(pred_tokens);
    let gold_counts = count_tokens(gold_tokens);
    let overlap: u64 = pred_counts
        .iter()
        .filter_map(|(token, &count)| gold_counts.get(token).map(|&g| count.min(g)))
        .sum();
    if overlap == 0 {
        return 0.0;
    }
    let precision = overlap as f64 / pred_tokens.len() as f64;
    let recall = overlap as f64 / gold_tokens.len() as f64;
    2.0 * precision * recall / (precision + recall)
}

/// SQuAD-style token F1 between a prediction and the best-matching gold.
/// Returns 0 for an empty gold list.
pub fn token_f1(pred: &str, golds: &[String]) -> f64 {
    let pred_tokens = text::squad_normalize(pred);
    golds
        .iter()
        .map(|gold| f1_single(&pred_tokens, &text::squad_normalize(gold)))
        .fold(0.0, f64::max)
}

/// SQuAD-style exact match: normalized equality against any gold.
pub fn exact_match(pred: &str, golds: &[String]) -> bool {
    let pred_norm = text::squad_normalize(pred);
    golds
        .iter()
        .any(|gold| text::squad_normalize(gold) == pred_norm)
}

const MAX_NGRAM_ORDER: usize = 4;
const LOG_ZERO: f64 = -9_999_999_999.0;

fn ngram_counts(tokens: &[String], order: usize) -> BTreeMap<&[String], u64> {
    let mut counts: BTreeMap<&[String], u64> = BTreeMap::new();
    if tokens.len() >= order {
        for gram in tokens.windows(order) {
            *counts.entry(gram).or_insert(0) += 1;
        }
    }
    counts
}

/// Corpus-level BLEU in `[0, 100]`, matching the reference SacreBLEU
/// defaults (13a tokenization, case sensitive, exponential smoothing).
/// One reference per prediction; lists must be non-empty and equal length.
pub fn corpus_bleu(preds: &[String], refs: &[String]) -> Result<f64, MetricsError> {
    if preds.len() != refs.len() {
        return Err(MetricsError::LengthMismatch {
            preds: preds.len(),
            refs: refs.len(),
        });
    }
    if preds.is_empty() {
        return Err(MetricsError::EmptyInput);
    }

    let mut correct = [0u64; MAX_NGRAM_ORDER];
    let mut total = [0u64; MAX_NGRAM_ORDER];
    let mut sys_len = 0usize;
    let mut ref_len = 0usize;

    for (pred, reference) in preds.iter().zip(refs) {
        let pred_tokens = text::tokenize_13a(pred);
        let ref_tokens = text::tokenize_13a(reference);
        sys_len += pred_tokens.len();
        ref_len += ref_tokens.len();

        for order in 1..=MAX_NGRAM_ORDER {
            if pred_tokens.len() >= order {
                total[order - 1] += (pred_tokens.len() - order + 1) as u64;
            }
            let pred_grams = ngram_counts(&pred_tokens, order);
            if pred_grams.is_empty() {
                continue;
            }
            let ref_grams = ngram_counts(&ref_tokens, order);
            let clipped: u64 = pred_grams
                .iter()
                .filter_map(|(gram, &count)| ref_grams.get(gram).map(|&r| count.min(r)))
                .sum();
            correct[order - 1] += clipped;
        }
    }

    // Precision computation mirrors the reference implementation: zero
    // matches at every order short-circuit to 0 (no smoothing); otherwise
    // stop at the first order with no candidate n-grams and halve the
    // smoothing denominator at each zero-match order.
    if correct.iter().all(|&c| c == 0) {
        return Ok(0.0);
    }
    let mut precisions = [0.0f64; MAX_NGRAM_ORDER];
    let mut smooth = 1.0f64;
    for order in 0..MAX_NGRAM_ORDER {
        if total[order] == 0 {
            break;
        }
        if correct[order] == 0 {
            smooth *= 2.0;
            precisions[order] = 100.0 / (smooth * total[order] as f64);
        } else {
            precisions[order] = 100.0 * correct[order] as f64 / total[order] as f64;
        }
    }

    let brevity_penalty = if sys_len < ref_len {
        if sys_len == 0 {
            0.0
        } else {
            libm::exp(1.0 - ref_len as f64 / sys_len as f64)
        }
    } else {
        1.0
    };

    let log_sum: f64 = precisions
        .iter()
        .map(|&p| if p == 0.0 { LOG_ZERO } else { libm::log(p) })
        .sum();
    Ok(brevity_penalty * libm::exp(log_sum / MAX_NGRAM_ORDER as f64))
}

/// Aggregate metric values over one query population.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricBlock {
    pub n_queries: usize,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub recall_at: BTreeMap<usize, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub f1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub em: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bleu: Option<f64>,
}

/// Full evaluation report: overall numbers plus a per-domain breakdown.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub overall: MetricBlock,
    /// Queries excluded from recall denominators (empty positive sets).
    pub n_excluded: usize,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub per_domain: BTreeMap<String, MetricBlock>,
}

/// Computes recall@k for every k over the run, overall and per domain.
///
/// `domains` maps query ids to their domain label; queries absent from the
/// map count only toward the overall block.
pub fn evaluate_retrieval(
    run: &RetrievalRun,
    positives: &BTreeMap<String, BTreeSet<String>>,
    ks: &[NonZeroUsize],
    domains: &BTreeMap<String, String>,
) -> Result<EvalReport, MetricsError> {
    let mut report = EvalReport::default();

    let eligible: Vec<&String> = run
        .results
        .keys()
        .filter(|id| positives.get(*id).is_some_and(|p| !p.is_empty()))
        .collect();
    report.n_excluded = run.results.len() - eligible.len();
    report.overall.n_queries = eligible.len();

    for &k in ks {
        report
            .overall
            .recall_at
            .insert(k.get(), recall_at_k(run, positives, k)?);
    }

    let mut by_domain: BTreeMap<&str, RetrievalRun> = BTreeMap::new();
    for (query_id, hits) in &run.results {
        if let Some(domain) = domains.get(query_id) {
            by_domain
                .entry(domain.as_str())
                .or_insert_with(|| RetrievalRun {
                    config: run.config.clone(),
                    results: BTreeMap::new(),
                })
                .results
                .insert(query_id.clone(), hits.clone());
        }
    }
    for (domain, domain_run) in by_domain {
        let mut block = MetricBlock {
            n_queries: domain_run
                .results
                .keys()
                .filter(|id| positives.get(*id).is_some_and(|p| !p.is_empty()))
                .count(),
            ..MetricBlock::default()
        };
        if block.n_queries == 0 {
            continue;
        }
        for &k in ks {
            block
                .recall_at
                .insert(k.get(), recall_at_k(&domain_run, positives, k)?);
        }
        report.per_domain.insert(domain.to_string(), block);
    }

    Ok(report)
}

/// A generation prediction paired with its gold target and domain.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GenerationPair {
    pub prediction: String,
    pub reference: String,
    pub domain: String,
}

/// Mean token-F1 and exact match plus corpus BLEU, overall and per domain.
pub fn evaluate_generation(pairs: &[GenerationPair]) -> Result<EvalReport, MetricsError> {
    if pairs.is_empty() {
        return Err(MetricsError::EmptyInput);
    }

    fn block(pairs: &[&GenerationPair]) -> Result<MetricBlock, MetricsError> {
        let n = pairs.len();
        let mut f1_sum = 0.0;
        let mut em_sum = 0usize;
        let mut preds = Vec::with_capacity(n);
        let mut refs = Vec::with_capacity(n);
        for pair in pairs {
            let golds = [pair.reference.clone()];
            f1_sum += token_f1(&pair.prediction, &golds);
            em_sum += exact_match(&pair.prediction, &golds) as usize;
            preds.push(pair.prediction.clone());
            refs.push(pair.reference.clone());
        }
        Ok(MetricBlock {
            n_queries: n,
            recall_at: BTreeMap::new(),
            f1: Some(f1_sum / n as f64),
            em: Some(em_sum as f64 / n as f64),
            bleu: Some(corpus_bleu(&preds, &refs)?),
        })
    }

    let all: Vec<&GenerationPair> = pairs.iter().collect();
    let mut report = EvalReport {
        overall: block(&all)?,
        ..EvalReport::default()
    };

    let mut by_domain: BTreeMap<&str, Vec<&GenerationPair>> = BTreeMap::new();
    for pair in pairs {
        by_domain
            .entry(pair.domain.as_str())
            .or_default()
            .push(pair);
    }
    for (domain, members) in by_domain {
        report
            .per_domain
            .insert(domain.to_string(), block(&members)?);
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::retrieve::{HitSource, RunConfig, ScoredHit};
    use alloc::vec;

    fn nz(n: usize) -> NonZeroUsize {
        NonZeroUsize::new(n).unwrap()
    }

    fn golds(gs: &[&str]) -> Vec<String> {
        gs.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn f1_identity_and_empty_cases() {
        assert_eq!(token_f1("same words", &golds(&["same words"])), 1.0);
        assert_eq!(token_f1("", &golds(&["x"])), 0.0);
        assert_eq!(token_f1("x", &golds(&[""])), 0.0);
        assert_eq!(token_f1("", &golds(&[""])), 1.0);
        assert_eq!(token_f1("x", &[]), 0.0);
    }

    // Values verified against the published SQuAD evaluation script.
    #[test]
    fn f1_matches_reference_script() {
        // "a" is an article and is dropped: pred tokens {b, c},
        // gold tokens {b, c, d}; P = 1, R = 2/3, F1 = 0.8.
        assert!((token_f1("a b c", &golds(&["b c d"])) - 0.8).abs() < 1e-12);
        // No articles: P = 2/3, R = 2/3, F1 = 2/3.
        assert!((token_f1("x b c", &golds(&["b c d"])) - 2.0 / 3.0).abs() < 1e-12);
        // "the" dropped from the prediction: P = 1, R = 2/3, F1 = 0.8.
        assert!((token_f1("the quick fox", &golds(&["quick brown fox"])) - 0.8).abs() < 1e-12);
    }

    #[test]
    fn f1_multiset_clipping() {
        // pred {b: 2}, gold {b: 1}: overlap 1, P = 1/2, R = 1, F1 = 2/3.
        assert!((token_f1("b b", &golds(&["b"])) - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn f1_max_over_golds_and_symmetry() {
        let gs = golds(&["nothing shared", "b c d"]);
        assert!((token_f1("b c", &gs) - 0.8).abs() < 1e-12);
        // Symmetric in (pred, single gold).
        let a = token_f1("b c", &golds(&["b c d"]));
        let b = token_f1("b c d", &golds(&["b c"]));
        assert_eq!(a, b);
    }

    #[test]
    fn exact_match_normalizes() {
        assert!(exact_match("The Answer!", &golds(&["answer"])));
        assert!(!exact_match("answer one", &golds(&["answer"])));
        assert!(exact_match("", &golds(&[""])));
        assert!(exact_match("U.S. agency", &golds(&["us agency"])));
    }

    #[test]
    fn em_implies_f1_one() {
        let cases = [("The Answer!", "answer"), ("a b", "b"), ("", "")];
        for (pred, gold) in cases {
            let gs = golds(&[gold]);
            if exact_match(pred, &gs) {
                assert_eq!(token_f1(pred, &gs), 1.0, "pred={pred:?} gold={gold:?}");
            }
        }
    }

    #[test]
    fn bleu_identity_is_100() {
        let texts = golds(&["the cat sat on the mat", "a long sentence with many words"]);
        let score = corpus_bleu(&texts, &texts).unwrap();
        assert!((score - 100.0).abs() < 1e-9);
    }

    // Reference value computed with SacreBLEU 2.6.0 on the same pair.
    #[test]
    fn bleu_matches_reference_on_single_pair() {
        let preds = golds(&["the cat sat on the mat"]);
        let refs = golds(&["the cat was sitting on the mat"]);
        let score = corpus_bleu(&preds, &refs).unwrap();
        assert!((score - 32.159351091190125).abs() < 1e-4, "got {score}");
    }

    #[test]
    fn bleu_disjoint_single_tokens_is_zero() {
        let score = corpus_bleu(&golds(&["a"]), &golds(&["b"])).unwrap();
        assert_eq!(score, 0.0);
    }

    #[test]
    fn bleu_is_permutation_invariant() {
        let preds = golds(&["one two three", "four five", "six seven eight nine"]);
        let refs = golds(&["one two four", "four five", "six seven nine eight"]);
        let base = corpus_bleu(&preds, &refs).unwrap();
        let perm = [2usize, 0, 1];
        let preds_p: Vec<String> = perm.iter().map(|&i| preds[i].clone()).collect();
        let refs_p: Vec<String> = perm.iter().map(|&i| refs[i].clone()).collect();
        let permuted = corpus_bleu(&preds_p, &refs_p).unwrap();
        assert!((base - permuted).abs() < 1e-12);
    }

    #[test]
    fn bleu_length_mismatch_is_error() {
        assert!(matches!(
            corpus_bleu(&golds(&["a", "b"]), &golds(&["a"])),
            Err(MetricsError::LengthMismatch { preds: 2, refs: 1 })
        ));
        assert!(matches!(
            corpus_bleu(&[], &[]),
            Err(MetricsError::EmptyInput)
        ));
    }

    fn run_with(results: &[(&str, &[&str])]) -> RetrievalRun {
        let mut run = RetrievalRun {
            config: RunConfig::default(),
            results: BTreeMap::new(),
        };
        for (query_id, ids) in results {
            let hits = ids
                .iter()
                .enumerate()
                .map(|(i, id)| ScoredHit {
                    passage_id: id.to_string(),
                    score: 1.0 / (i + 1) as f64,
                    rank: (i + 1) as u32,
                    source: HitSource::FullQuery,
                })
                .collect();
            run.results.insert(query_id.to_string(), hits);
        }
        run
    }

    fn positives_of(list: &[(&str, &[&str])]) -> BTreeMap<String, BTreeSet<String>> {
        list.iter()
            .map(|(q, ids)| {
                (
                    q.to_string(),
                    ids.iter().map(|s| s.to_string()).collect::<BTreeSet<_>>(),
                )
            })
            .collect()
    }

    #[test]
    fn recall_single_query() {
        let run = run_with(&[("q1", &["B", "A"])]);
        let positives = positives_of(&[("q1", &["A"])]);
        assert_eq!(recall_at_k(&run, &positives, nz(1)).unwrap(), 0.0);
        assert_eq!(recall_at_k(&run, &positives, nz(2)).unwrap(), 1.0);
    }

    #[test]
    fn recall_excludes_empty_positive_sets() {
        let run = run_with(&[("q1", &["A"]), ("q2", &["B"])]);
        let positives = positives_of(&[("q1", &["A"]), ("q2", &[])]);
        assert_eq!(recall_at_k(&run, &positives, nz(1)).unwrap(), 1.0);

        let none = positives_of(&[("q1", &[]), ("q2", &[])]);
        assert!(matches!(
            recall_at_k(&run, &none, nz(1)),
            Err(MetricsError::NoEligibleQueries)
        ));
    }

    #[test]
    fn recall_is_monotone_in_k() {
        let run = run_with(&[
            ("q1", &["x", "A"]),
            ("q2", &["A", "y"]),
            ("q3", &["z", "w"]),
        ]);
        let positives = positives_of(&[("q1", &["A"]), ("q2", &["A"]), ("q3", &["A"])]);
        let mut previous = 0.0;
        for k in 1..4 {
            let r = recall_at_k(&run, &positives, nz(k)).unwrap();
            assert!(r >= previous);
            previous = r;
        }
    }

    fn doc(doc_id: &str, body: &str, spans: Vec<(&str, usize, usize)>) -> SourceDocument {
        SourceDocument {
            doc_id: doc_id.to_string(),
            domain: "ssa".to_string(),
            title: doc_id.to_string(),
            body: body.to_string(),
            spans: spans
                .into_iter()
                .map(|(id, start, end)| crate::corpus::SpanNode {
                    span_id: id.to_string(),
                    tag: "p".to_string(),
                    range: TextRange::new(start, end),
                    text: body[start..end].to_string(),
                    title: String::new(),
                    parent_titles: vec![],
                })
                .collect(),
            url: None,
            hyperlinks: vec![],
        }
    }

    fn passage_at(doc_id: &str, idx: usize, start: usize, end: usize) -> Passage {
        Passage {
            passage_id: crate::corpus::make_passage_id(doc_id, "token", idx),
            doc_id: doc_id.to_string(),
            domain: "ssa".to_string(),
            title_path: vec![],
            body: String::new(),
            rendered_text: String::new(),
            token_count: 0,
            source_range: TextRange::new(start, end),
        }
    }

    fn query_grounded(
        query_id: &str,
        doc_id: &str,
        span_id: &str,
        range: Option<TextRange>,
    ) -> DialQuery {
        DialQuery {
            query_id: query_id.to_string(),
            current_turn: String::new(),
            history: vec![],
            gold_grounding: vec![crate::dialogue::GroundingRef {
                doc_id: doc_id.to_string(),
                span_id: span_id.to_string(),
                char_range: range,
            }],
            gold_span_text: String::new(),
            gold_response: String::new(),
            domain: "ssa".to_string(),
        }
    }

    #[test]
    fn positives_by_overlap_and_span_resolution() {
        let body = "0123456789abcdefghij";
        let document = doc("D", body, vec![("s1", 2, 8)]);
        let mut docs = BTreeMap::new();
        docs.insert("D".to_string(), document);
        // Two passages splitting the body at byte 5: the span 2..8
        // straddles both.
        let passages = vec![passage_at("D", 0, 0, 5), passage_at("D", 1, 5, 20)];
        let catalog = PassageCatalog::new(&passages);

        let by_range = query_grounded("q:1", "D", "s1", Some(TextRange::new(2, 8)));
        let got = positive_passages(&by_range, &docs, &catalog).unwrap();
        assert_eq!(got.len(), 2);

        // Span entirely inside the second passage.
        let inside = query_grounded("q:2", "D", "s1", Some(TextRange::new(6, 8)));
        let got = positive_passages(&inside, &docs, &catalog).unwrap();
        assert_eq!(got, BTreeSet::from([passages[1].passage_id.clone()]));

        // No char range: resolved through the span id (2..8, straddles).
        let via_span = query_grounded("q:3", "D", "s1", None);
        let got = positive_passages(&via_span, &docs, &catalog).unwrap();
        assert_eq!(got.len(), 2);

        // Unknown doc is an error naming the query.
        let bad = query_grounded("q:4", "NOPE", "s1", None);
        assert!(matches!(
            positive_passages(&bad, &docs, &catalog),
            Err(MetricsError::UnresolvedDoc { .. })
        ));

        // Empty grounding: empty positive set.
        let mut empty = query_grounded("q:5", "D", "s1", None);
        empty.gold_grounding.clear();
        assert!(positive_passages(&empty, &docs, &catalog)
            .unwrap()
            .is_empty());
    }

    #[test]
    fn evaluate_retrieval_reports_per_domain() {
        let run = run_with(&[("q1", &["A"]), ("q2", &["B"]), ("q3", &["C"])]);
        let positives = positives_of(&[("q1", &["A"]), ("q2", &["x"]), ("q3", &[])]);
        let mut domains = BTreeMap::new();
        domains.insert("q1".to_string(), "ssa".to_string());
        domains.insert("q2".to_string(), "dmv".to_string());
        domains.insert("q3".to_string(), "dmv".to_string());

        let report = evaluate_retrieval(&run, &positives, &[nz(1)], &domains).unwrap();
        assert_eq!(report.overall.n_queries, 2);
        assert_eq!(report.n_excluded, 1);
        assert_eq!(report.overall.recall_at[&1], 0.5);
        assert_eq!(report.per_domain["ssa"].recall_at[&1], 1.0);
        assert_eq!(report.per_domain["dmv"].recall_at[&1], 0.0);
    }

    #[test]
    fn evaluate_generation_aggregates() {
        let pairs = vec![
            GenerationPair {
                prediction: "the answer".to_string(),
                reference: "answer".to_string(),
                domain: "ssa".to_string(),
            },
            GenerationPair {
                prediction: "something else".to_string(),
                reference: "entirely different".to_string(),
                domain: "dmv".to_string(),
            },
        ];
        let report = evaluate_generation(&pairs).unwrap();
        assert_eq!(report.overall.n_queries, 2);
        assert_eq!(report.overall.em, Some(0.5));
        assert!((report.overall.f1.unwrap() - 0.5).abs() < 1e-12);
        assert!(report.overall.bleu.is_some());
        assert_eq!(report.per_domain["ssa"].em, Some(1.0));
        assert_eq!(report.per_domain["dmv"].em, Some(0.0));
    }

    #[test]
    fn passage_doc_id_mapping_for_document_recall() {
        assert_eq!(crate::corpus::passage_doc_id("D::token::3"), "D");
    }
}

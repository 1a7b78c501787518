//! Property suites for the library's structural invariants.

use std::collections::BTreeSet;
use std::num::NonZeroUsize;

use proptest::prelude::*;

use gdr_core::corpus::{segment_by_tokens, SourceDocument, TextRange};
use gdr_core::dialogue::{render_query, DialQuery};
use gdr_core::lexindex::{bm25_search, build_bm25, Bm25Params};
use gdr_core::retrieve::{rerank_union, HitSource, ScoredHit};
use gdr_core::text;
use gdr_core::Passage;

fn nz(n: usize) -> NonZeroUsize {
    NonZeroUsize::new(n).unwrap()
}

fn doc(body: &str) -> SourceDocument {
    SourceDocument {
        doc_id: "d".into(),
        domain: "ssa".into(),
        title: "t".into(),
        body: body.into(),
        spans: vec![],
        url: None,
        hyperlinks: vec![],
    }
}

fn passage(id: String, body: String) -> Passage {
    Passage {
        passage_id: id,
        doc_id: "d".into(),
        domain: "ssa".into(),
        title_path: vec![],
        rendered_text: body.clone(),
        body,
        token_count: 0,
        source_range: TextRange::new(0, 0),
    }
}

proptest! {
    #[test]
    fn index_tokens_have_no_whitespace_or_empties(s in "\\PC{0,200}") {
        for tok in text::index_tokenize(&s) {
            prop_assert!(!tok.is_empty());
            prop_assert!(!tok.chars().any(char::is_whitespace));
        }
    }

    #[test]
    fn index_tokenize_join_fixed_point(s in "\\PC{0,200}") {
        let once = text::index_tokenize(&s);
        let again = text::index_tokenize(&once.join(" "));
        prop_assert_eq!(once, again);
    }

    #[test]
    fn squad_normalize_idempotent(s in "\\PC{0,200}") {
        let once = text::squad_normalize(&s);
        let again = text::squad_normalize(&once.join(" "));
        prop_assert_eq!(once, again);
    }

    #[test]
    fn truncation_respects_budget(s in "\\PC{0,300}", budget in 1usize..40) {
        let cut = text::truncate_to_tokens(&s, budget);
        prop_assert!(text::count_index_tokens(cut) <= budget);
        prop_assert!(s.starts_with(cut));
    }

    #[test]
    fn token_windows_cover_body_exactly_once(
        body in "[a-zA-Z0-9 ,.()'\\-]{0,400}",
        window in 1usize..12,
    ) {
        let d = doc(&body);
        let passages = segment_by_tokens(&d, nz(window));
        // Ranges tile [0, body.len()) with no gaps or overlaps.
        let mut cursor = 0usize;
        for p in &passages {
            prop_assert_eq!(p.source_range.start, cursor);
            cursor = p.source_range.end;
        }
        if text::count_index_tokens(&body) == 0 {
            prop_assert!(passages.is_empty());
        } else {
            prop_assert_eq!(cursor, body.len());
        }
        // Per-passage token sequences concatenate to the body's sequence,
        // all but the last passage hold exactly `window` tokens, and the
        // stored count matches a recount.
        let mut concat = Vec::new();
        for (i, p) in passages.iter().enumerate() {
            let toks = text::index_tokenize(&p.rendered_text);
            prop_assert_eq!(toks.len(), p.token_count);
            if i + 1 < passages.len() {
                prop_assert_eq!(toks.len(), window);
            } else {
                prop_assert!(toks.len() <= window && !toks.is_empty());
            }
            concat.extend(toks);
        }
        prop_assert_eq!(concat, text::index_tokenize(&body));
    }

    #[test]
    fn bm25_scores_positive_and_prefix_monotone(
        bodies in proptest::collection::vec("[a-z]{1,6}( [a-z]{1,6}){0,10}", 1..20),
        query in "[a-z]{1,6}( [a-z]{1,6}){0,5}",
    ) {
        let passages: Vec<Passage> = bodies
            .iter()
            .enumerate()
            .map(|(i, b)| passage(format!("p{i:03}"), b.clone()))
            .collect();
        let index = build_bm25(&passages, Bm25Params::default()).unwrap();
        let full = bm25_search(&index, &query, nz(passages.len()));
        for hit in &full {
            prop_assert!(hit.score > 0.0);
        }
        for k in 1..=passages.len() {
            let topk = bm25_search(&index, &query, nz(k));
            prop_assert_eq!(topk.len(), k.min(full.len()));
            for (a, b) in topk.iter().zip(full.iter()) {
                prop_assert_eq!(&a.passage_id, &b.passage_id);
                prop_assert_eq!(a.score, b.score);
            }
        }
    }

    #[test]
    fn rerank_union_properties(
        full_ids in proptest::collection::vec(0u8..30, 0..15),
        current_ids in proptest::collection::vec(0u8..30, 0..15),
        k in 1usize..20,
    ) {
        let mk = |ids: &[u8], source: HitSource| -> Vec<ScoredHit> {
            let mut seen = BTreeSet::new();
            ids.iter()
                .filter(|id| seen.insert(**id))
                .enumerate()
                .map(|(i, id)| ScoredHit {
                    passage_id: format!("p{id:02}"),
                    score: 1.0 / (i + 1) as f64,
                    rank: (i + 1) as u32,
                    source,
                })
                .collect()
        };
        let full = mk(&full_ids, HitSource::FullQuery);
        let current = mk(&current_ids, HitSource::CurrentTurn);

        let merged = rerank_union(&full, &current, nz(k));

        // Unique, bounded, and exactly min(k, |union|) long.
        let union: BTreeSet<&str> = full
            .iter()
            .chain(current.iter())
            .map(|h| h.passage_id.as_str())
            .collect();
        let got: Vec<&str> = merged.iter().map(|h| h.passage_id.as_str()).collect();
        let got_set: BTreeSet<&str> = got.iter().copied().collect();
        prop_assert_eq!(got_set.len(), got.len());
        prop_assert_eq!(merged.len(), k.min(union.len()));
        for id in &got {
            prop_assert!(union.contains(id));
        }
        // Ranks are 1..n without gaps.
        for (i, hit) in merged.iter().enumerate() {
            prop_assert_eq!(hit.rank as usize, i + 1);
        }
        // Prefix property in k.
        let next = rerank_union(&full, &current, nz(k + 1));
        for (a, b) in merged.iter().zip(next.iter()) {
            prop_assert_eq!(&a.passage_id, &b.passage_id);
        }
        // Identical lists collapse to top-k of full.
        let same = rerank_union(&full, &full, nz(k));
        let expect: Vec<&str> = full.iter().take(k).map(|h| h.passage_id.as_str()).collect();
        let got_same: Vec<&str> = same.iter().map(|h| h.passage_id.as_str()).collect();
        prop_assert_eq!(got_same, expect);
    }

    #[test]
    fn render_query_budget_and_shape(
        current in "[a-z ]{0,60}",
        history in proptest::collection::vec("[a-z ]{0,40}", 0..6),
        budget in 1usize..64,
    ) {
        let q = DialQuery {
            query_id: "q:1".into(),
            current_turn: current.clone(),
            history: history.clone(),
            gold_grounding: vec![],
            gold_span_text: String::new(),
            gold_response: String::new(),
            domain: "ssa".into(),
        };
        let rendered = render_query(&q, nz(budget), "[SEP]");
        prop_assert!(text::count_index_tokens(&rendered) <= budget);

        let unbounded = render_query(&q, nz(100_000), "[SEP]");
        prop_assert!(unbounded.starts_with(&current));
        prop_assert_eq!(unbounded.matches("[SEP]").count(), history.len());
    }

    #[test]
    fn em_implies_f1_one(pred in "\\PC{0,40}", gold in "\\PC{0,40}") {
        let golds = [gold];
        if gdr_core::metrics::exact_match(&pred, &golds) {
            prop_assert_eq!(gdr_core::metrics::token_f1(&pred, &golds), 1.0);
        }
    }
}

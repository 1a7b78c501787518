//! Structured source documents and passage segmentation.
//!
//! A [`SourceDocument`] carries the raw body text of one document plus its
//! mark-up spans (paragraphs, lists, titles) as flat, offset-addressed
//! [`SpanNode`]s. Two segmentation strategies turn documents into
//! retrievable [`Passage`]s:
//!
//! - token windows: fixed-size chunks of index tokens, no titles;
//! - structure: one passage per paragraph-level mark-up unit, prefixed
//!   with its hierarchical section titles.
//!
//! Passage ids are deterministic functions of `(doc_id, mode, index)`, so
//! re-running segmentation on the same corpus always reproduces the same
//! ids regardless of file naming or record order.

use alloc::borrow::ToOwned;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::num::NonZeroUsize;

use serde::{Deserialize, Serialize};

use crate::text;

/// Half-open byte-offset range into a UTF-8 document body.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TextRange {
    pub start: usize,
    pub end: usize,
}

impl TextRange {
    pub fn new(start: usize, end: usize) -> Self {
        Self { start, end }
    }

    pub fn len(&self) -> usize {
        self.end.saturating_sub(self.start)
    }

    pub fn is_empty(&self) -> bool {
        self.end <= self.start
    }

    /// Half-open interval overlap.
    pub fn overlaps(&self, other: &TextRange) -> bool {
        self.start < other.end && other.start < self.end
    }

    pub fn contains_range(&self, other: &TextRange) -> bool {
        self.start <= other.start && other.end <= self.end
    }
}

/// One mark-up span of a document: a paragraph, list, list item or title.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpanNode {
    pub span_id: String,
    /// Mark-up tag name, e.g. "p", "ul", "li", "h2", "title".
    pub tag: String,
    #[serde(rename = "char_range")]
    pub range: TextRange,
    /// Text content; always equals the body slice at `range`.
    pub text: String,
    /// Section title this span sits under, possibly empty.
    #[serde(default)]
    pub title: String,
    /// Ancestor titles from root to leaf, not including `title`.
    #[serde(default)]
    pub parent_titles: Vec<String>,
}

/// A structured source document with optional linkage metadata.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceDocument {
    pub doc_id: String,
    pub domain: String,
    pub title: String,
    pub body: String,
    pub spans: Vec<SpanNode>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub url: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub hyperlinks: Vec<String>,
}

impl SourceDocument {
    /// Checks the structural invariants: span ranges lie inside the body
    /// on character boundaries, are non-empty, sorted by start offset, and
    /// each span's text equals its body slice.
    pub fn validate(&self) -> Result<(), CorpusError> {
        let mut prev_start = 0usize;
        for (i, span) in self.spans.iter().enumerate() {
            if span.range.is_empty() || span.range.end > self.body.len() {
                return Err(CorpusError::SpanOutOfRange {
                    doc_id: self.doc_id.clone(),
                    span_id: span.span_id.clone(),
                });
            }
            let slice = self
                .body
                .get(span.range.start..span.range.end)
                .ok_or_else(|| CorpusError::SpanOutOfRange {
                    doc_id: self.doc_id.clone(),
                    span_id: span.span_id.clone(),
                })?;
            if slice != span.text {
                return Err(CorpusError::SpanTextMismatch {
                    doc_id: self.doc_id.clone(),
                    span_id: span.span_id.clone(),
                });
            }
            if i > 0 && span.range.start < prev_start {
                return Err(CorpusError::SpansUnsorted {
                    doc_id: self.doc_id.clone(),
                });
            }
            prev_start = span.range.start;
        }
        Ok(())
    }

    pub fn find_span(&self, span_id: &str) -> Option<&SpanNode> {
        self.spans.iter().find(|s| s.span_id == span_id)
    }
}

/// How a document is cut into passages.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SegmentationMode {
    TokenWindow {
        window: NonZeroUsize,
    },
    Structure {
        max_structure_tokens: Option<NonZeroUsize>,
    },
}

pub const DEFAULT_WINDOW: usize = 100;

impl SegmentationMode {
    pub fn token_window() -> Self {
        SegmentationMode::TokenWindow {
            window: NonZeroUsize::new(DEFAULT_WINDOW).unwrap(),
        }
    }

    pub fn structure() -> Self {
        SegmentationMode::Structure {
            max_structure_tokens: None,
        }
    }

    /// Short tag used in passage ids and file metadata.
    pub fn tag(&self) -> &'static str {
        match self {
            SegmentationMode::TokenWindow { .. } => "token",
            SegmentationMode::Structure { .. } => "struct",
        }
    }
}

/// A retrievable text unit produced by segmenting a document.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Passage {
    /// Deterministic id: `doc_id + "::" + mode + "::" + index`.
    pub passage_id: String,
    pub doc_id: String,
    pub domain: String,
    /// Hierarchical section titles, root to leaf; empty for token windows.
    pub title_path: Vec<String>,
    pub body: String,
    /// Titles joined by " / ", then " // ", then the body; the body alone
    /// when there are no titles.
    pub rendered_text: String,
    pub token_count: usize,
    /// The body bytes of the source document this passage covers.
    #[serde(rename = "source_char_range")]
    pub source_range: TextRange,
}

pub fn make_passage_id(doc_id: &str, mode_tag: &str, index: usize) -> String {
    format!("{doc_id}::{mode_tag}::{index}")
}

/// Recovers the document id from a passage id (the part before the two
/// trailing `::`-separated components).
pub fn passage_doc_id(passage_id: &str) -> &str {
    let mut it = passage_id.rsplitn(3, "::");
    let last = it.next();
    let mid = it.next();
    match (it.next(), mid, last) {
        (Some(doc), Some(_), Some(_)) => doc,
        _ => passage_id,
    }
}

pub fn render_passage_text(title_path: &[String], body: &str) -> String {
    if title_path.is_empty() {
        body.to_owned()
    } else {
        format!("{} // {}", title_path.join(" / "), body)
    }
}

/// Errors raised while validating or segmenting documents.
#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum CorpusError {
    #[error("duplicate doc_id `{doc_id}`")]
    DuplicateDocId { doc_id: String },
    #[error("span `{span_id}` of doc `{doc_id}` lies outside the document body")]
    SpanOutOfRange { doc_id: String, span_id: String },
    #[error("span `{span_id}` of doc `{doc_id}` does not match its body slice")]
    SpanTextMismatch { doc_id: String, span_id: String },
    #[error("spans of doc `{doc_id}` are not sorted by start offset")]
    SpansUnsorted { doc_id: String },
}

/// Non-fatal observations made during segmentation.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusWarning {
    pub doc_id: String,
    pub message: String,
}

/// Options for structure segmentation, normally supplied by the ingestion
/// adapter.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StructureOptions {
    /// Tags that start a content passage. A span with one of these tags
    /// whose range is contained in an already accepted span is absorbed by
    /// it (list items under their list).
    pub content_tags: Vec<String>,
}

impl Default for StructureOptions {
    fn default() -> Self {
        Self {
            content_tags: ["p", "ul", "ol", "li"]
                .iter()
                .map(|s| s.to_string())
                .collect(),
        }
    }
}

/// Byte-offset cut points that partition `[0, total_len)` into windows of
/// at most `window` tokens. Cuts fall on token starts, so re-tokenizing a
/// slice yields exactly its window's tokens.
fn window_ranges(spans: &[text::TokenSpan], window: usize, total_len: usize) -> Vec<TextRange> {
    if spans.is_empty() {
        return Vec::new();
    }
    let n_windows = spans.len().div_ceil(window);
    let mut out = Vec::with_capacity(n_windows);
    let mut cut = 0usize;
    for w in 0..n_windows {
        let end = if w + 1 == n_windows {
            total_len
        } else {
            spans[(w + 1) * window].start
        };
        out.push(TextRange::new(cut, end));
        cut = end;
    }
    out
}

/// Splits a document body into fixed-size token windows.
///
/// All passages except possibly the last hold exactly `window` index
/// tokens; their source ranges partition the whole body. An empty body
/// yields no passages.
pub fn segment_by_tokens(doc: &SourceDocument, window: NonZeroUsize) -> Vec<Passage> {
    let spans = text::index_token_spans(&doc.body);
    let ranges = window_ranges(&spans, window.get(), doc.body.len());
    let w = window.get();
    ranges
        .iter()
        .enumerate()
        .map(|(idx, range)| {
            let body = doc.body[range.start..range.end].to_string();
            let token_count = spans.len().min((idx + 1) * w) - idx * w;
            Passage {
                passage_id: make_passage_id(&doc.doc_id, "token", idx),
                doc_id: doc.doc_id.clone(),
                domain: doc.domain.clone(),
                title_path: Vec::new(),
                rendered_text: body.clone(),
                body,
                token_count,
                source_range: *range,
            }
        })
        .collect()
}

/// Splits a document along its paragraph-level mark-up spans, attaching
/// hierarchical titles to each passage.
///
/// One passage per accepted content span; spans contained in an accepted
/// span are absorbed (a list and its items form one passage). When
/// `max_structure_tokens` is set, oversize passages are sub-split by token
/// window over their body while keeping the same title path.
pub fn segment_by_structure(
    doc: &SourceDocument,
    max_structure_tokens: Option<NonZeroUsize>,
    opts: &StructureOptions,
) -> (Vec<Passage>, Vec<CorpusWarning>) {
    let mut warnings = Vec::new();
    let mut accepted: Vec<&SpanNode> = Vec::new();
    for span in &doc.spans {
        if !opts.content_tags.iter().any(|t| t == &span.tag) {
            continue;
        }
        if let Some(last) = accepted.last() {
            if last.range.contains_range(&span.range) {
                continue; // absorbed, e.g. an li under its ul
            }
            if last.range.overlaps(&span.range) {
                warnings.push(CorpusWarning {
                    doc_id: doc.doc_id.clone(),
                    message: format!(
                        "content span `{}` partially overlaps `{}`; skipped",
                        span.span_id, last.span_id
                    ),
                });
                continue;
            }
        }
        accepted.push(span);
    }

    if accepted.is_empty() {
        warnings.push(CorpusWarning {
            doc_id: doc.doc_id.clone(),
            message: "document has no content spans".to_string(),
        });
        return (Vec::new(), warnings);
    }

    let mut passages = Vec::with_capacity(accepted.len());
    let mut index = 0usize;
    for span in accepted {
        let mut title_path: Vec<String> = span
            .parent_titles
            .iter()
            .chain(core::iter::once(&span.title))
            .filter(|t| !t.trim().is_empty())
            .cloned()
            .collect();
        title_path
            .iter_mut()
            .for_each(|t| *t = t.trim().to_string());

        let body = &doc.body[span.range.start..span.range.end];
        let sub_ranges = match max_structure_tokens {
            Some(cap) => {
                let token_spans = text::index_token_spans(body);
                if token_spans.len() > cap.get() {
                    window_ranges(&token_spans, cap.get(), body.len())
                } else {
                    alloc::vec![TextRange::new(0, body.len())]
                }
            }
            None => alloc::vec![TextRange::new(0, body.len())],
        };

        for sub in sub_ranges {
            let sub_body = body[sub.start..sub.end].to_string();
            let rendered = render_passage_text(&title_path, &sub_body);
            let token_count = text::count_index_tokens(&rendered);
            passages.push(Passage {
                passage_id: make_passage_id(&doc.doc_id, "struct", index),
                doc_id: doc.doc_id.clone(),
                domain: doc.domain.clone(),
                title_path: title_path.clone(),
                body: sub_body,
                rendered_text: rendered,
                token_count,
                source_range: TextRange::new(
                    span.range.start + sub.start,
                    span.range.start + sub.end,
                ),
            });
            index += 1;
        }
    }
    (passages, warnings)
}

/// A segmented corpus with the warnings gathered along the way.
#[derive(Clone, Debug, Default)]
pub struct CorpusBuild {
    pub passages: Vec<Passage>,
    pub warnings: Vec<CorpusWarning>,
}

/// Segments every document with the given mode, in input order.
pub fn segment_corpus(
    docs: &[SourceDocument],
    mode: &SegmentationMode,
    opts: &StructureOptions,
) -> CorpusBuild {
    let mut build = CorpusBuild::default();
    for doc in docs {
        match mode {
            SegmentationMode::TokenWindow { window } => {
                build.passages.extend(segment_by_tokens(doc, *window));
            }
            SegmentationMode::Structure {
                max_structure_tokens,
            } => {
                let (passages, warnings) = segment_by_structure(doc, *max_structure_tokens, opts);
                build.passages.extend(passages);
                build.warnings.extend(warnings);
            }
        }
    }
    build
}

//! Schema adapters: upstream dataset layouts to the canonical model.
//!
//! Two input layouts are supported for both documents and dialogues:
//!
//! - canonical JSON Lines, one record per line, the toolkit's own schema;
//! - the MultiDoc2Dial v1.0 release layout: a single JSON object keyed
//!   `doc_data` (documents) or `dial_data` (dialogues), nested by domain.
//!
//! Upstream span offsets count Unicode scalar values; the adapter
//! converts them to byte offsets into the UTF-8 body and cross-checks the
//! span text, so offset-unit mistakes surface as ingestion errors naming
//! the span.

use std::collections::BTreeSet;
use std::path::Path;

use serde_json::Value;

use gdr_core::corpus::{SourceDocument, SpanNode, TextRange};
use gdr_core::dialogue::{DialTurn, Dialogue, GroundingRef, Role};

use crate::{fsutil, jsonl, Error, Result};

/// Input layout selection. `Auto` sniffs the upstream layout by its
/// top-level key and falls back to canonical JSONL.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum InputFormat {
    #[default]
    Auto,
    Canonical,
    MultiDoc2Dial,
}

impl std::str::FromStr for InputFormat {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "auto" => Ok(InputFormat::Auto),
            "canonical" => Ok(InputFormat::Canonical),
            "multidoc2dial" => Ok(InputFormat::MultiDoc2Dial),
            other => Err(format!(
                "unknown format `{other}` (expected auto, canonical or multidoc2dial)"
            )),
        }
    }
}

/// Maps char offsets (Python string indices) to byte offsets.
struct CharIndex {
    byte_of_char: Vec<usize>,
}

impl CharIndex {
    fn new(text: &str) -> Self {
        let mut byte_of_char: Vec<usize> = text.char_indices().map(|(b, _)| b).collect();
        byte_of_char.push(text.len());
        Self { byte_of_char }
    }

    fn byte(&self, char_offset: usize) -> Option<usize> {
        self.byte_of_char.get(char_offset).copied()
    }
}

fn str_field<'v>(value: &'v Value, key: &str) -> Option<&'v str> {
    value.get(key).and_then(Value::as_str)
}

fn usize_field(value: &Value, key: &str) -> Option<usize> {
    value.get(key).and_then(Value::as_u64).map(|v| v as usize)
}

/// Accepts the parent-title shapes seen across dataset revisions: a list
/// of strings, a list of objects with a `text` field, a single string, a
/// string-serialized list (JSON or Python repr with single quotes), or
/// null.
fn parse_parent_titles(value: Option<&Value>) -> Vec<String> {
    match value {
        Some(Value::Array(items)) => items
            .iter()
            .filter_map(|item| match item {
                Value::String(s) => Some(s.clone()),
                Value::Object(_) => str_field(item, "text").map(str::to_string),
                _ => None,
            })
            .filter(|s| !s.trim().is_empty())
            .collect(),
        Some(Value::String(s)) if !s.trim().is_empty() => {
            let trimmed = s.trim();
            if trimmed.starts_with('[') && trimmed.ends_with(']') {
                if let Some(titles) = parse_serialized_title_list(trimmed) {
                    return titles;
                }
            }
            vec![s.clone()]
        }
        _ => Vec::new(),
    }
}

/// Re-parses a title list that arrived as a string. Tries the text as
/// JSON first; if it looks like a Python repr (single quotes, no double
/// quotes inside), retries with quotes swapped.
fn parse_serialized_title_list(text: &str) -> Option<Vec<String>> {
    let reparse = |candidate: &str| -> Option<Vec<String>> {
        let value: Value = serde_json::from_str(candidate).ok()?;
        value
            .is_array()
            .then(|| parse_parent_titles(Some(&value)))
    };
    if let Some(titles) = reparse(text) {
        return Some(titles);
    }
    if text.contains('\'') && !text.contains('"') {
        return reparse(&text.replace('\'', "\""));
    }
    None
}

fn adapt_document(path: &Path, domain: &str, key: &str, raw: &Value) -> Result<SourceDocument> {
    let doc_id = str_field(raw, "doc_id").unwrap_or(key).to_string();
    let body = str_field(raw, "doc_text")
        .ok_or_else(|| Error::ingest(path, format!("doc `{doc_id}` has no doc_text")))?
        .to_string();
    let title = str_field(raw, "title").unwrap_or(&doc_id).to_string();
    let chars = CharIndex::new(&body);

    let mut spans: Vec<SpanNode> = Vec::new();
    if let Some(Value::Object(span_map)) = raw.get("spans") {
        for (span_key, span_raw) in span_map {
            let span_id = str_field(span_raw, "id_sp").unwrap_or(span_key).to_string();
            let (Some(start_char), Some(end_char)) = (
                usize_field(span_raw, "start_sp"),
                usize_field(span_raw, "end_sp"),
            ) else {
                return Err(Error::ingest(
                    path,
                    format!("span `{span_id}` of doc `{doc_id}` lacks start_sp/end_sp"),
                ));
            };
            let (Some(start), Some(end)) = (chars.byte(start_char), chars.byte(end_char)) else {
                return Err(Error::ingest(
                    path,
                    format!("span `{span_id}` of doc `{doc_id}` lies outside the body"),
                ));
            };
            if start >= end {
                return Err(Error::ingest(
                    path,
                    format!("span `{span_id}` of doc `{doc_id}` is empty or inverted"),
                ));
            }
            let text = body[start..end].to_string();
            if let Some(upstream_text) = str_field(span_raw, "text_sp") {
                if upstream_text != text {
                    return Err(Error::ingest(
                        path,
                        format!(
                            "span `{span_id}` of doc `{doc_id}` text does not match its offsets"
                        ),
                    ));
                }
            }
            spans.push(SpanNode {
                span_id,
                tag: str_field(span_raw, "tag").unwrap_or("p").to_string(),
                range: TextRange::new(start, end),
                text,
                title: str_field(span_raw, "title").unwrap_or("").to_string(),
                parent_titles: parse_parent_titles(span_raw.get("parent_titles")),
            });
        }
    }
    // Containers precede their contents: ascending start, descending end,
    // so a list span sorts before the items it covers.
    spans.sort_by_key(|s| (s.range.start, std::cmp::Reverse(s.range.end)));

    let url = str_field(raw, "url")
        .or_else(|| str_field(raw, "doc_url"))
        .map(str::to_string);
    let hyperlinks = match raw.get("hyperlinks") {
        Some(Value::Array(items)) => items
            .iter()
            .filter_map(Value::as_str)
            .map(str::to_string)
            .collect(),
        _ => Vec::new(),
    };

    let doc = SourceDocument {
        doc_id,
        domain: domain.to_string(),
        title,
        body,
        spans,
        url,
        hyperlinks,
    };
    doc.validate()?;
    Ok(doc)
}

fn finalize_documents(path: &Path, mut docs: Vec<SourceDocument>) -> Result<Vec<SourceDocument>> {
    docs.sort_by(|a, b| a.doc_id.cmp(&b.doc_id));
    let mut seen: BTreeSet<&str> = BTreeSet::new();
    for doc in &docs {
        if !seen.insert(&doc.doc_id) {
            return Err(Error::ingest(
                path,
                format!("duplicate doc_id `{}`", doc.doc_id),
            ));
        }
    }
    for doc in &docs {
        doc.validate()?;
    }
    Ok(docs)
}

/// Loads documents in any supported layout, returning them sorted by
/// doc_id with all invariants checked.
pub fn load_documents(path: &Path, format: InputFormat) -> Result<Vec<SourceDocument>> {
    let raw = fsutil::read_to_string(path)?;
    let parse_upstream = |value: &Value| -> Result<Vec<SourceDocument>> {
        let doc_data = value
            .get("doc_data")
            .and_then(Value::as_object)
            .ok_or_else(|| Error::ingest(path, "missing doc_data object"))?;
        let mut docs = Vec::new();
        for (domain, by_id) in doc_data {
            let by_id = by_id.as_object().ok_or_else(|| {
                Error::ingest(path, format!("doc_data[{domain}] is not an object"))
            })?;
            for (key, doc_raw) in by_id {
                docs.push(adapt_document(path, domain, key, doc_raw)?);
            }
        }
        finalize_documents(path, docs)
    };

    match format {
        InputFormat::MultiDoc2Dial => {
            let value: Value = serde_json::from_str(&raw).map_err(|e| Error::Json {
                path: path.to_path_buf(),
                source: e,
            })?;
            parse_upstream(&value)
        }
        InputFormat::Canonical => finalize_documents(path, jsonl::read_jsonl(path)?),
        InputFormat::Auto => {
            if let Ok(value) = serde_json::from_str::<Value>(&raw) {
                if value.get("doc_data").is_some() {
                    return parse_upstream(&value);
                }
            }
            finalize_documents(path, jsonl::read_jsonl(path)?)
        }
    }
}

fn adapt_turn(path: &Path, dial_id: &str, raw: &Value) -> Result<DialTurn> {
    let turn_id = usize_field(raw, "turn_id")
        .ok_or_else(|| Error::ingest(path, format!("turn of `{dial_id}` lacks turn_id")))?
        as u32;
    let role = match str_field(raw, "role") {
        Some("user") => Role::User,
        Some("agent") => Role::Agent,
        other => {
            return Err(Error::ingest(
                path,
                format!("turn {turn_id} of `{dial_id}` has unknown role {other:?}"),
            ))
        }
    };
    let references = match raw.get("references") {
        Some(Value::Array(items)) => {
            let mut refs = Vec::new();
            for item in items {
                let Some(doc_id) = str_field(item, "doc_id") else {
                    continue;
                };
                let span_id = str_field(item, "id_sp")
                    .or_else(|| str_field(item, "sp_id"))
                    .or_else(|| str_field(item, "span_id"))
                    .unwrap_or("")
                    .to_string();
                let char_range = match (usize_field(item, "start"), usize_field(item, "end")) {
                    (Some(start), Some(end)) => Some(TextRange::new(start, end)),
                    _ => None,
                };
                refs.push(GroundingRef {
                    doc_id: doc_id.to_string(),
                    span_id,
                    char_range,
                });
            }
            refs
        }
        _ => Vec::new(),
    };
    Ok(DialTurn {
        turn_id,
        role,
        da: str_field(raw, "da").unwrap_or("").to_string(),
        utterance: str_field(raw, "utterance").unwrap_or("").to_string(),
        references,
    })
}

fn adapt_dialogue(path: &Path, domain: &str, raw: &Value) -> Result<Dialogue> {
    let dial_id = str_field(raw, "dial_id")
        .ok_or_else(|| Error::ingest(path, "dialogue lacks dial_id"))?
        .to_string();
    let turns_raw = raw
        .get("turns")
        .and_then(Value::as_array)
        .ok_or_else(|| Error::ingest(path, format!("dialogue `{dial_id}` lacks turns")))?;
    let mut turns = Vec::with_capacity(turns_raw.len());
    for turn_raw in turns_raw {
        turns.push(adapt_turn(path, &dial_id, turn_raw)?);
    }
    let dialogue = Dialogue {
        dial_id,
        domain: domain.to_string(),
        turns,
    };
    dialogue.validate()?;
    Ok(dialogue)
}

fn finalize_dialogues(path: &Path, dialogues: Vec<Dialogue>) -> Result<Vec<Dialogue>> {
    let mut seen: BTreeSet<&str> = BTreeSet::new();
    for dialogue in &dialogues {
        if !seen.insert(&dialogue.dial_id) {
            return Err(Error::ingest(
                path,
                format!("duplicate dial_id `{}`", dialogue.dial_id),
            ));
        }
        dialogue.validate()?;
    }
    Ok(dialogues)
}

/// Loads dialogues in any supported layout, in stable input order.
pub fn load_dialogues(path: &Path, format: InputFormat) -> Result<Vec<Dialogue>> {
    let raw = fsutil::read_to_string(path)?;
    let parse_upstream = |value: &Value| -> Result<Vec<Dialogue>> {
        let dial_data = value
            .get("dial_data")
            .and_then(Value::as_object)
            .ok_or_else(|| Error::ingest(path, "missing dial_data object"))?;
        let mut dialogues = Vec::new();
        for (domain, list) in dial_data {
            let list = list.as_array().ok_or_else(|| {
                Error::ingest(path, format!("dial_data[{domain}] is not an array"))
            })?;
            for dialogue_raw in list {
                dialogues.push(adapt_dialogue(path, domain, dialogue_raw)?);
            }
        }
        finalize_dialogues(path, dialogues)
    };

    match format {
        InputFormat::MultiDoc2Dial => {
            let value: Value = serde_json::from_str(&raw).map_err(|e| Error::Json {
                path: path.to_path_buf(),
                source: e,
            })?;
            parse_upstream(&value)
        }
        InputFormat::Canonical => finalize_dialogues(path, jsonl::read_jsonl(path)?),
        InputFormat::Auto => {
            if let Ok(value) = serde_json::from_str::<Value>(&raw) {
                if value.get("dial_data").is_some() {
                    return parse_upstream(&value);
                }
            }
            finalize_dialogues(path, jsonl::read_jsonl(path)?)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(path: &Path, content: &str) {
        std::fs::write(path, content).unwrap();
    }

    #[test]
    fn upstream_documents_with_char_offsets() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("docs.json");
        // Body contains a two-byte character before the span, so char and
        // byte offsets differ.
        write(
            &path,
            r#"{"doc_data": {"dmv": {"Doc A#1": {
                "doc_id": "Doc A#1", "title": "Doc A",
                "doc_text": "é intro. Content paragraph here.",
                "spans": {
                    "1": {"id_sp": "1", "tag": "p", "start_sp": 9, "end_sp": 32,
                           "text_sp": "Content paragraph here.",
                           "title": "Section", "parent_titles": [{"text": "Top"}]}
                }
            }}}}"#,
        );
        let docs = load_documents(&path, InputFormat::Auto).unwrap();
        assert_eq!(docs.len(), 1);
        let doc = &docs[0];
        assert_eq!(doc.domain, "dmv");
        assert_eq!(doc.spans.len(), 1);
        let span = &doc.spans[0];
        assert_eq!(span.text, "Content paragraph here.");
        assert_eq!(&doc.body[span.range.start..span.range.end], span.text);
        assert_eq!(span.parent_titles, vec!["Top".to_string()]);
        assert_eq!(span.title, "Section");
    }

    #[test]
    fn container_spans_sort_before_their_items() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("docs.json");
        // A list and its first item start at the same offset; the list
        // must come first so segmentation absorbs the items into it.
        write(
            &path,
            r#"{"doc_data": {"dmv": {"D": {
                "doc_text": "* one\n* two",
                "spans": {
                    "2": {"id_sp": "2", "tag": "li", "start_sp": 0, "end_sp": 5, "text_sp": "* one"},
                    "1": {"id_sp": "1", "tag": "ul", "start_sp": 0, "end_sp": 11, "text_sp": "* one\n* two"},
                    "3": {"id_sp": "3", "tag": "li", "start_sp": 6, "end_sp": 11, "text_sp": "* two"}
                }
            }}}}"#,
        );
        let docs = load_documents(&path, InputFormat::Auto).unwrap();
        assert_eq!(docs[0].spans[0].span_id, "1");
        assert_eq!(docs[0].spans[0].tag, "ul");

        let (passages, warnings) = gdr_core::corpus::segment_by_structure(
            &docs[0],
            None,
            &gdr_core::corpus::StructureOptions::default(),
        );
        assert!(warnings.is_empty(), "{warnings:?}");
        assert_eq!(passages.len(), 1);
        assert_eq!(passages[0].body, "* one\n* two");
    }

    #[test]
    fn upstream_span_text_mismatch_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("docs.json");
        write(
            &path,
            r#"{"doc_data": {"dmv": {"D": {
                "doc_text": "0123456789",
                "spans": {"1": {"id_sp": "s1", "tag": "p", "start_sp": 0, "end_sp": 4, "text_sp": "xxxx"}}
            }}}}"#,
        );
        let err = load_documents(&path, InputFormat::Auto).unwrap_err();
        assert!(err.to_string().contains("s1"), "{err}");
    }

    #[test]
    fn upstream_span_out_of_range_names_span() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("docs.json");
        write(
            &path,
            r#"{"doc_data": {"dmv": {"D": {
                "doc_text": "short",
                "spans": {"1": {"id_sp": "s9", "tag": "p", "start_sp": 2, "end_sp": 99}}
            }}}}"#,
        );
        let err = load_documents(&path, InputFormat::Auto).unwrap_err();
        assert!(err.to_string().contains("s9"), "{err}");
    }

    #[test]
    fn parent_titles_shape_variants() {
        let parse = |v: serde_json::Value| parse_parent_titles(Some(&v));
        assert_eq!(parse(serde_json::json!(["A", "B"])), vec!["A", "B"]);
        assert_eq!(
            parse(serde_json::json!([{"text": "A"}, {"text": "B", "level": "h2"}])),
            vec!["A", "B"]
        );
        assert_eq!(parse(serde_json::json!("Top Title")), vec!["Top Title"]);
        // String-serialized lists, JSON and Python-repr style.
        assert_eq!(
            parse(serde_json::json!(r#"[{"text": "A"}, {"text": "B"}]"#)),
            vec!["A", "B"]
        );
        assert_eq!(
            parse(serde_json::json!("[{'id_sp': '1', 'text': 'Top', 'level': 'title'}]")),
            vec!["Top"]
        );
        assert_eq!(parse(serde_json::json!(["A", ""])), vec!["A"]);
        assert_eq!(parse(serde_json::json!(null)), Vec::<String>::new());
        assert_eq!(parse_parent_titles(None), Vec::<String>::new());
    }

    #[test]
    fn canonical_documents_sorted_and_deduplicated() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("docs.jsonl");
        let doc = |id: &str| {
            serde_json::json!({
                "doc_id": id, "domain": "ssa", "title": id,
                "body": "text body", "spans": []
            })
        };
        write(&path, &format!("{}\n{}\n", doc("b"), doc("a")));
        let docs = load_documents(&path, InputFormat::Auto).unwrap();
        assert_eq!(docs[0].doc_id, "a");
        assert_eq!(docs[1].doc_id, "b");

        write(&path, &format!("{}\n{}\n", doc("a"), doc("a")));
        let err = load_documents(&path, InputFormat::Auto).unwrap_err();
        assert!(err.to_string().contains("duplicate doc_id"), "{err}");
    }

    #[test]
    fn upstream_dialogues_roles_and_references() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("dials.json");
        write(
            &path,
            r#"{"dial_data": {"ssa": [{
                "dial_id": "d1",
                "turns": [
                    {"turn_id": 1, "role": "user", "da": "query_condition",
                     "utterance": "hello",
                     "references": [{"id_sp": "3", "doc_id": "DocA", "label": "precondition"}]},
                    {"turn_id": 2, "role": "agent", "da": "respond_solution",
                     "utterance": "hi", "references": []}
                ]
            }]}}"#,
        );
        let dialogues = load_dialogues(&path, InputFormat::Auto).unwrap();
        assert_eq!(dialogues.len(), 1);
        let d = &dialogues[0];
        assert_eq!(d.domain, "ssa");
        assert_eq!(d.turns[0].role, Role::User);
        assert_eq!(d.turns[0].references[0].doc_id, "DocA");
        assert_eq!(d.turns[0].references[0].span_id, "3");
    }

    #[test]
    fn unknown_role_is_an_ingestion_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("dials.json");
        write(
            &path,
            r#"{"dial_data": {"ssa": [{
                "dial_id": "d1",
                "turns": [{"turn_id": 1, "role": "wizard", "utterance": "x"}]
            }]}}"#,
        );
        let err = load_dialogues(&path, InputFormat::Auto).unwrap_err();
        assert!(err.to_string().contains("unknown role"), "{err}");
    }

    #[test]
    fn canonical_dialogue_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("dials.jsonl");
        let dialogues = vec![Dialogue {
            dial_id: "d1".into(),
            domain: "va".into(),
            turns: vec![DialTurn {
                turn_id: 1,
                role: Role::User,
                da: "q".into(),
                utterance: "hello".into(),
                references: vec![],
            }],
        }];
        jsonl::write_jsonl(&path, &dialogues).unwrap();
        let back = load_dialogues(&path, InputFormat::Canonical).unwrap();
        assert_eq!(back, dialogues);
    }
}

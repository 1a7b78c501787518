//! Dialogue data model, task-instance extraction and query construction.
//!
//! Every agent turn with at least one preceding user turn becomes one
//! [`DialQuery`]: the prediction instance for both the grounding-span task
//! and the response-generation task. The query string fed to a retriever
//! combines the current user turn with the history from latest to
//! earliest, joined by a separator token, under a whole-token budget.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::num::NonZeroUsize;

use serde::{Deserialize, Serialize};

use crate::corpus::{SourceDocument, TextRange};
use crate::text;

pub const DEFAULT_QUERY_TOKEN_BUDGET: usize = 128;
pub const DEFAULT_SEPARATOR: &str = "[SEP]";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    User,
    Agent,
}

/// A pointer from a dialogue turn into the document it is grounded in.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroundingRef {
    pub doc_id: String,
    pub span_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub char_range: Option<TextRange>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DialTurn {
    pub turn_id: u32,
    pub role: Role,
    /// Dialogue act label, dataset vocabulary.
    pub da: String,
    pub utterance: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub references: Vec<GroundingRef>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dialogue {
    pub dial_id: String,
    pub domain: String,
    pub turns: Vec<DialTurn>,
}

impl Dialogue {
    pub fn validate(&self) -> Result<(), DialogueError> {
        if self.turns.is_empty() {
            return Err(DialogueError::EmptyDialogue {
                dial_id: self.dial_id.clone(),
            });
        }
        for pair in self.turns.windows(2) {
            if pair[0].turn_id >= pair[1].turn_id {
                return Err(DialogueError::UnorderedTurns {
                    dial_id: self.dial_id.clone(),
                    turn_id: pair[1].turn_id,
                });
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum DialogueError {
    #[error("dialogue `{dial_id}` has no turns")]
    EmptyDialogue { dial_id: String },
    #[error("dialogue `{dial_id}` has non-increasing turn id {turn_id}")]
    UnorderedTurns { dial_id: String, turn_id: u32 },
}

/// One agent-turn prediction instance.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DialQuery {
    /// `dial_id + ":" + turn_id` of the target agent turn.
    pub query_id: String,
    /// Latest user utterance before the target turn.
    pub current_turn: String,
    /// All utterances before the target turn except the current one,
    /// latest first.
    pub history: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub gold_grounding: Vec<GroundingRef>,
    /// Grounding-span target text, resolved against the corpus.
    #[serde(default)]
    pub gold_span_text: String,
    /// Response target: the agent turn's utterance.
    pub gold_response: String,
    pub domain: String,
}

/// Queries extracted from a dialogue set, with the ids of agent turns
/// that carried no grounding annotation.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct QueryBuild {
    pub queries: Vec<DialQuery>,
    pub missing_grounding: Vec<String>,
}

/// Extracts one query per agent turn that has at least one preceding user
/// turn. Order is stable: dialogues in input order, turns in dialogue
/// order.
pub fn build_queries(dialogues: &[Dialogue]) -> QueryBuild {
    let mut build = QueryBuild::default();
    for dialogue in dialogues {
        for (i, turn) in dialogue.turns.iter().enumerate() {
            if turn.role != Role::Agent {
                continue;
            }
            let Some(current_idx) = dialogue.turns[..i]
                .iter()
                .rposition(|t| t.role == Role::User)
            else {
                continue;
            };
            let history: Vec<String> = dialogue.turns[..i]
                .iter()
                .enumerate()
                .rev()
                .filter(|(j, _)| *j != current_idx)
                .map(|(_, t)| t.utterance.clone())
                .collect();
            let query_id = format!("{}:{}", dialogue.dial_id, turn.turn_id);
            if turn.references.is_empty() {
                build.missing_grounding.push(query_id.clone());
            }
            build.queries.push(DialQuery {
                query_id,
                current_turn: dialogue.turns[current_idx].utterance.clone(),
                history,
                gold_grounding: turn.references.clone(),
                gold_span_text: String::new(),
                gold_response: turn.utterance.clone(),
                domain: dialogue.domain.clone(),
            });
        }
    }
    build
}

/// Fills `gold_span_text` by joining the referenced span texts, in
/// reference order, with single spaces. Returns the number of references
/// that could not be resolved against the documents.
pub fn resolve_gold_spans(
    queries: &mut [DialQuery],
    docs: &BTreeMap<String, SourceDocument>,
) -> usize {
    let mut unresolved = 0usize;
    for query in queries {
        let mut parts: Vec<&str> = Vec::new();
        for gref in &query.gold_grounding {
            let span_text = docs
                .get(&gref.doc_id)
                .and_then(|doc| doc.find_span(&gref.span_id))
                .map(|span| span.text.as_str());
            match span_text {
                Some(s) => parts.push(s),
                None => unresolved += 1,
            }
        }
        query.gold_span_text = parts.join(" ");
    }
    unresolved
}

/// Renders the full dialogue query: current turn, then each history item
/// prefixed by the separator, truncated to the first `max_tokens` index
/// tokens (whole-token cut; the default separator counts as one token).
pub fn render_query(query: &DialQuery, max_tokens: NonZeroUsize, separator: &str) -> String {
    let mut full = query.current_turn.clone();
    for item in &query.history {
        full.push(' ');
        full.push_str(separator);
        full.push(' ');
        full.push_str(item);
    }
    text::truncate_to_tokens(&full, max_tokens.get()).to_string()
}

/// Renders the current turn alone under the same token budget.
pub fn render_current_turn(query: &DialQuery, max_tokens: NonZeroUsize) -> String {
    text::truncate_to_tokens(&query.current_turn, max_tokens.get()).to_string()
}

//! Rule-based composition of multi-document dialogue flows.
//!
//! The pipeline has three stages:
//!
//! 1. segment existing single-document dialogues at eligible positions
//!    (after an agent turn that answers, unless a follow-up question comes
//!    next);
//! 2. build a document transition graph from shared URL parents and
//!    hyperlinks;
//! 3. greedily recompose segments into new flows under the rules: a
//!    segment appears in at most one flow, adjacent segments are grounded
//!    in different documents, and flows stay within the configured turn
//!    bounds.
//!
//! Composition is driven by a single seeded random stream
//! ([`crate::rng::SeededRng`]); identical inputs and seeds reproduce the
//! output byte for byte. Utterance rewriting is out of scope: turns that
//! would need it are flagged and given a placeholder template instead.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::corpus::SourceDocument;
use crate::dialogue::{DialTurn, Dialogue, Role};
use crate::rng::SeededRng;

/// A maximal run of consecutive turns grounded in one document.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DialogueSegment {
    pub source_dial_id: String,
    /// Half-open turn-index range into the source dialogue's turn list.
    pub turn_start: usize,
    pub turn_end: usize,
    pub grounding_doc_id: String,
    pub domain: String,
}

impl DialogueSegment {
    pub fn len(&self) -> usize {
        self.turn_end - self.turn_start
    }

    pub fn is_empty(&self) -> bool {
        self.turn_end <= self.turn_start
    }
}

/// Kinds of document relatedness, kept per edge.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EdgeKinds {
    pub url_sibling: bool,
    pub hyperlink: bool,
}

/// Symmetric document relatedness graph.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransitionGraph {
    edges: BTreeMap<String, BTreeMap<String, EdgeKinds>>,
    /// Documents whose URL had no usable parent component.
    pub malformed_urls: usize,
}

impl TransitionGraph {
    pub fn related(&self, doc_id: &str) -> Option<&BTreeMap<String, EdgeKinds>> {
        self.edges.get(doc_id)
    }

    pub fn has_edge(&self, a: &str, b: &str) -> bool {
        self.edges.get(a).is_some_and(|m| m.contains_key(b))
    }

    pub fn edge_count(&self) -> usize {
        self.edges.values().map(BTreeMap::len).sum::<usize>() / 2
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    fn add_edge(&mut self, a: &str, b: &str, mark: impl Fn(&mut EdgeKinds)) {
        if a == b {
            return;
        }
        mark(
            self.edges
                .entry(a.to_string())
                .or_default()
                .entry(b.to_string())
                .or_default(),
        );
        mark(
            self.edges
                .entry(b.to_string())
                .or_default()
                .entry(a.to_string())
                .or_default(),
        );
    }
}

/// The URL with its final path component removed (keeping the trailing
/// slash), or `None` when no path separator exists beyond the scheme.
fn url_parent(url: &str) -> Option<&str> {
    let trimmed = url.trim_end_matches('/');
    let path_start = trimmed.find("://").map(|i| i + 3).unwrap_or(0);
    let cut = trimmed[path_start..].rfind('/')?;
    Some(&trimmed[..path_start + cut + 1])
}

/// `url_parent` applied `depth` times.
fn url_ancestor(url: &str, depth: usize) -> Option<&str> {
    let mut current = url;
    for _ in 0..depth.max(1) {
        current = url_parent(current)?;
    }
    Some(current)
}

/// Builds the relatedness graph: a `url_sibling` edge between documents
/// sharing a URL parent, a symmetrized `hyperlink` edge for each link to
/// another corpus document.
pub fn build_transition_graph(docs: &[SourceDocument]) -> TransitionGraph {
    build_transition_graph_with_depth(docs, 1)
}

/// Like [`build_transition_graph`], comparing URL ancestors `depth`
/// levels up instead of immediate parents.
pub fn build_transition_graph_with_depth(docs: &[SourceDocument], depth: usize) -> TransitionGraph {
    let mut graph = TransitionGraph::default();
    let known: BTreeSet<&str> = docs.iter().map(|d| d.doc_id.as_str()).collect();

    let mut by_parent: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    for doc in docs {
        let Some(url) = doc.url.as_deref() else {
            continue;
        };
        match url_ancestor(url, depth) {
            Some(parent) => by_parent.entry(parent).or_default().push(&doc.doc_id),
            None => graph.malformed_urls += 1,
        }
    }
    for siblings in by_parent.values() {
        for (i, a) in siblings.iter().enumerate() {
            for b in &siblings[i + 1..] {
                graph.add_edge(a, b, |e| e.url_sibling = true);
            }
        }
    }

    for doc in docs {
        for target in &doc.hyperlinks {
            if known.contains(target.as_str()) {
                graph.add_edge(&doc.doc_id, target, |e| e.hyperlink = true);
            }
        }
    }
    graph
}

/// Configuration of the composition pipeline.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlowgenConfig {
    pub seed: u64,
    pub min_turns: usize,
    pub max_turns: usize,
    pub target_segments_min: usize,
    pub target_segments_max: usize,
    /// Probability of preferring a graph-related document for the next
    /// segment when one is available.
    pub related_preference: f64,
    /// Dialogue-act label of answer turns, in the dataset's vocabulary.
    pub responding_act: String,
    /// Dialogue-act label of follow-up question turns.
    pub followup_act: String,
    /// Ancestor levels compared when deriving url_sibling edges.
    #[serde(default = "default_url_depth")]
    pub url_parent_depth: usize,
}

fn default_url_depth() -> usize {
    1
}

impl Default for FlowgenConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            min_turns: 6,
            max_turns: 20,
            target_segments_min: 2,
            target_segments_max: 4,
            related_preference: 0.5,
            responding_act: "respond_solution".to_string(),
            followup_act: "query_condition".to_string(),
            url_parent_depth: 1,
        }
    }
}

impl FlowgenConfig {
    pub fn validate(&self) -> Result<(), FlowgenError> {
        if self.min_turns > self.max_turns {
            return Err(FlowgenError::InvalidConfig(
                "min_turns exceeds max_turns".to_string(),
            ));
        }
        if !(2..=4).contains(&self.target_segments_min)
            || !(2..=4).contains(&self.target_segments_max)
            || self.target_segments_min > self.target_segments_max
        {
            return Err(FlowgenError::InvalidConfig(
                "target segment range must lie within 2..=4".to_string(),
            ));
        }
        if !(0.0..=1.0).contains(&self.related_preference) {
            return Err(FlowgenError::InvalidConfig(
                "related_preference must be a probability".to_string(),
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum FlowgenError {
    #[error("invalid flowgen config: {0}")]
    InvalidConfig(String),
    #[error("dialogue `{dial_id}` turns {start}..{end} carry no grounding references")]
    NoGrounding {
        dial_id: String,
        start: usize,
        end: usize,
    },
    #[error("dialogue `{dial_id}` turns {start}..{end} are grounded in multiple documents")]
    MixedGrounding {
        dial_id: String,
        start: usize,
        end: usize,
    },
    #[error("flow references unknown dialogue `{dial_id}`")]
    UnknownDialogue { dial_id: String },
}

/// Eligible split positions: indices `i` such that turn `i` is an agent
/// turn with the responding act and turn `i + 1` exists and is not a
/// follow-up question. A split at `i` separates `..=i` from `i + 1..`.
pub fn find_split_points(d: &Dialogue, responding_act: &str, followup_act: &str) -> Vec<usize> {
    let mut points = Vec::new();
    for i in 0..d.turns.len().saturating_sub(1) {
        let turn = &d.turns[i];
        if turn.role == Role::Agent
            && turn.da == responding_act
            && d.turns[i + 1].da != followup_act
        {
            points.push(i);
        }
    }
    points
}

/// Cuts a dialogue at a random subset of its split points: the number of
/// cuts is uniform over `{1, 2, 3}` clipped to the available points (zero
/// points give a single segment), and the cut subset is uniform.
pub fn segment_dialogue(
    d: &Dialogue,
    splits: &[usize],
    rng: &mut SeededRng,
) -> Result<Vec<DialogueSegment>, FlowgenError> {
    if d.turns.is_empty() {
        return Ok(Vec::new());
    }
    let upper = splits.len().min(3);
    let n_cuts = if upper == 0 {
        0
    } else {
        rng.range_inclusive(1, upper as u64) as usize
    };
    let chosen: Vec<usize> = rng
        .sample_sorted(splits.len(), n_cuts)
        .into_iter()
        .map(|i| splits[i])
        .collect();

    let mut segments = Vec::with_capacity(chosen.len() + 1);
    let mut start = 0usize;
    for cut in chosen
        .iter()
        .copied()
        .chain(core::iter::once(d.turns.len().saturating_sub(1)))
    {
        let end = cut + 1;
        segments.push(make_segment(d, start, end)?);
        start = end;
    }
    Ok(segments)
}

fn make_segment(d: &Dialogue, start: usize, end: usize) -> Result<DialogueSegment, FlowgenError> {
    let mut doc_ids: BTreeSet<&str> = BTreeSet::new();
    for turn in &d.turns[start..end] {
        for gref in &turn.references {
            doc_ids.insert(&gref.doc_id);
        }
    }
    let mut it = doc_ids.into_iter();
    let doc = it.next().ok_or_else(|| FlowgenError::NoGrounding {
        dial_id: d.dial_id.clone(),
        start,
        end,
    })?;
    if it.next().is_some() {
        return Err(FlowgenError::MixedGrounding {
            dial_id: d.dial_id.clone(),
            start,
            end,
        });
    }
    Ok(DialogueSegment {
        source_dial_id: d.dial_id.clone(),
        turn_start: start,
        turn_end: end,
        grounding_doc_id: doc.to_string(),
        domain: d.domain.clone(),
    })
}

/// A recomposed multi-segment dialogue.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComposedFlow {
    pub flow_id: String,
    pub domain: String,
    pub segments: Vec<DialogueSegment>,
    /// Materialized turns, renumbered 1..n, grounding references kept.
    pub turns: Vec<DialTurn>,
    /// Indices into `turns` that need their utterance re-collected.
    pub rewrite_flags: BTreeSet<usize>,
    /// Placeholder text per flagged turn.
    pub rewrite_placeholders: BTreeMap<usize, String>,
    pub seed: u64,
}

/// Composition counters, serialized into the validation report.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComposeStats {
    pub segments_total: usize,
    pub segments_used: usize,
    pub flows_emitted: usize,
    pub discarded_short: usize,
    pub discarded_oversize: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct FlowBatch {
    pub flows: Vec<ComposedFlow>,
    pub stats: ComposeStats,
}

/// Greedy seeded composition over a segment pool.
///
/// Segments are pooled per domain and shuffled; each flow starts with the
/// next unused segment and extends by sampling, with probability
/// `related_preference`, an unused segment grounded in a graph-related
/// document, otherwise any unused same-domain segment with a different
/// grounding document. Extension stops at the per-flow target segment
/// count or when every candidate would exceed `max_turns`. Flows shorter
/// than `min_turns` are discarded; a flow whose single opening segment
/// already exceeds `max_turns` is discarded rather than cut mid-segment,
/// keeping every emitted boundary a true split point. Discarded segments
/// are not returned to the pool.
pub fn compose_flows(
    segments: &[DialogueSegment],
    dialogues: &BTreeMap<String, Dialogue>,
    doc_titles: &BTreeMap<String, String>,
    graph: &TransitionGraph,
    config: &FlowgenConfig,
    rng: &mut SeededRng,
) -> Result<FlowBatch, FlowgenError> {
    config.validate()?;
    let mut batch = FlowBatch {
        stats: ComposeStats {
            segments_total: segments.len(),
            ..ComposeStats::default()
        },
        ..FlowBatch::default()
    };

    let mut by_domain: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, segment) in segments.iter().enumerate() {
        by_domain
            .entry(segment.domain.as_str())
            .or_default()
            .push(i);
    }

    let mut used = alloc::vec![false; segments.len()];
    let mut flow_counter = 0usize;

    for (domain, mut pool) in by_domain {
        rng.shuffle(&mut pool);
        for pos in 0..pool.len() {
            let start = pool[pos];
            if used[start] {
                continue;
            }
            used[start] = true;

            let target = rng.range_inclusive(
                config.target_segments_min as u64,
                config.target_segments_max as u64,
            ) as usize;
            let mut flow_segments = alloc::vec![start];
            let mut turn_count = segments[start].len();

            while flow_segments.len() < target {
                let last_doc = &segments[*flow_segments.last().unwrap()].grounding_doc_id;
                let related = graph.related(last_doc);
                let fits = |i: usize| {
                    !used[i]
                        && segments[i].grounding_doc_id != *last_doc
                        && turn_count + segments[i].len() <= config.max_turns
                };
                let related_candidates: Vec<usize> = pool
                    .iter()
                    .copied()
                    .filter(|&i| {
                        fits(i)
                            && related
                                .is_some_and(|m| m.contains_key(&segments[i].grounding_doc_id))
                    })
                    .collect();
                let any_candidates: Vec<usize> =
                    pool.iter().copied().filter(|&i| fits(i)).collect();

                let prefer_related = rng.chance(config.related_preference);
                let candidates = if prefer_related && !related_candidates.is_empty() {
                    &related_candidates
                } else {
                    &any_candidates
                };
                if candidates.is_empty() {
                    break;
                }
                let next = candidates[rng.below(candidates.len() as u64) as usize];
                used[next] = true;
                turn_count += segments[next].len();
                flow_segments.push(next);
            }

            batch.stats.segments_used += flow_segments.len();
            if turn_count > config.max_turns {
                batch.stats.discarded_oversize += 1;
                continue;
            }
            if turn_count < config.min_turns {
                batch.stats.discarded_short += 1;
                continue;
            }

            let chosen: Vec<DialogueSegment> =
                flow_segments.iter().map(|&i| segments[i].clone()).collect();
            let flow = materialize_flow(
                format!("{domain}:{seed}:{n}", seed = config.seed, n = flow_counter),
                domain,
                chosen,
                dialogues,
                doc_titles,
                config.seed,
            )?;
            flow_counter += 1;
            batch.stats.flows_emitted += 1;
            batch.flows.push(flow);
        }
    }
    Ok(batch)
}

fn materialize_flow(
    flow_id: String,
    domain: &str,
    segments: Vec<DialogueSegment>,
    dialogues: &BTreeMap<String, Dialogue>,
    doc_titles: &BTreeMap<String, String>,
    seed: u64,
) -> Result<ComposedFlow, FlowgenError> {
    let mut turns = Vec::new();
    let mut rewrite_flags = BTreeSet::new();
    let mut rewrite_placeholders = BTreeMap::new();

    for (j, segment) in segments.iter().enumerate() {
        let dialogue = dialogues.get(&segment.source_dial_id).ok_or_else(|| {
            FlowgenError::UnknownDialogue {
                dial_id: segment.source_dial_id.clone(),
            }
        })?;
        let first_index = turns.len();
        for source_turn in &dialogue.turns[segment.turn_start..segment.turn_end] {
            let mut turn = source_turn.clone();
            turn.turn_id = (turns.len() + 1) as u32;
            turns.push(turn);
        }
        // The opening turn of a repositioned segment loses its original
        // context and needs re-collection; the very first turn of the flow
        // is exempt when it already opened its source dialogue.
        if !(j == 0 && segment.turn_start == 0) {
            rewrite_flags.insert(first_index);
            let title = doc_titles
                .get(&segment.grounding_doc_id)
                .map(String::as_str)
                .unwrap_or(segment.grounding_doc_id.as_str());
            rewrite_placeholders.insert(
                first_index,
                format!("<REWRITE: add background from {title}>"),
            );
        }
    }

    Ok(ComposedFlow {
        flow_id,
        domain: domain.to_string(),
        segments,
        turns,
        rewrite_flags,
        rewrite_placeholders,
        seed,
    })
}

/// Per-dialogue segmentation outcomes for a whole corpus.
#[derive(Clone, Debug, Default)]
pub struct SegmentationRun {
    pub segments: Vec<DialogueSegment>,
    /// Dialogues skipped because no single grounding document could be
    /// assigned to one of their segments.
    pub skipped: Vec<(String, FlowgenError)>,
}

/// Runs the full pipeline over loaded data with one seeded stream:
/// segmentation draws first, composition draws after.
pub fn run_flowgen(
    dialogues: &[Dialogue],
    docs: &[SourceDocument],
    config: &FlowgenConfig,
) -> Result<(FlowBatch, SegmentationRun), FlowgenError> {
    config.validate()?;
    let mut rng = SeededRng::new(config.seed);

    let mut segmentation = SegmentationRun::default();
    for dialogue in dialogues {
        let splits = find_split_points(dialogue, &config.responding_act, &config.followup_act);
        match segment_dialogue(dialogue, &splits, &mut rng) {
            Ok(segments) => segmentation.segments.extend(segments),
            Err(err) => segmentation.skipped.push((dialogue.dial_id.clone(), err)),
        }
    }

    let graph = build_transition_graph_with_depth(docs, config.url_parent_depth);
    let dialogue_map: BTreeMap<String, Dialogue> = dialogues
        .iter()
        .map(|d| (d.dial_id.clone(), d.clone()))
        .collect();
    let doc_titles: BTreeMap<String, String> = docs
        .iter()
        .map(|d| (d.doc_id.clone(), d.title.clone()))
        .collect();

    let batch = compose_flows(
        &segmentation.segments,
        &dialogue_map,
        &doc_titles,
        &graph,
        config,
        &mut rng,
    )?;
    Ok((batch, segmentation))
}

/// One rule violation found by the validator.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlowViolation {
    pub flow_id: String,
    pub rule: String,
    pub detail: String,
}

/// Outcome of walking every composed flow against its sources.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlowValidation {
    pub flows_checked: usize,
    pub checks_passed: BTreeMap<String, usize>,
    pub violations: Vec<FlowViolation>,
}

impl FlowValidation {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }

    fn record(&mut self, rule: &str, ok: bool, flow_id: &str, detail: impl FnOnce() -> String) {
        if ok {
            *self.checks_passed.entry(rule.to_string()).or_insert(0) += 1;
        } else {
            self.violations.push(FlowViolation {
                flow_id: flow_id.to_string(),
                rule: rule.to_string(),
                detail: detail(),
            });
        }
    }
}

/// Re-checks every composition rule from the source dialogues: segment
/// uniqueness across flows, adjacent-document difference, turn bounds,
/// split-point validity, and turn fidelity to the sources.
pub fn validate_flows(
    flows: &[ComposedFlow],
    dialogues: &BTreeMap<String, Dialogue>,
    config: &FlowgenConfig,
) -> FlowValidation {
    let mut validation = FlowValidation {
        flows_checked: flows.len(),
        ..FlowValidation::default()
    };

    let mut used_ranges: BTreeMap<&str, Vec<(usize, usize, &str)>> = BTreeMap::new();
    for flow in flows {
        for segment in &flow.segments {
            used_ranges
                .entry(segment.source_dial_id.as_str())
                .or_default()
                .push((segment.turn_start, segment.turn_end, flow.flow_id.as_str()));
        }
    }
    for (dial_id, mut ranges) in used_ranges {
        ranges.sort_unstable();
        let mut clean = true;
        for pair in ranges.windows(2) {
            if pair[1].0 < pair[0].1 {
                clean = false;
                validation.violations.push(FlowViolation {
                    flow_id: pair[1].2.to_string(),
                    rule: "segment_uniqueness".to_string(),
                    detail: format!(
                        "turns {}..{} of dialogue `{dial_id}` reused (also in flow `{}`)",
                        pair[1].0, pair[1].1, pair[0].2
                    ),
                });
            }
        }
        if clean {
            *validation
                .checks_passed
                .entry("segment_uniqueness".to_string())
                .or_insert(0) += 1;
        }
    }

    for flow in flows {
        let adjacent_ok = flow
            .segments
            .windows(2)
            .all(|w| w[0].grounding_doc_id != w[1].grounding_doc_id);
        validation.record(
            "adjacent_document_differs",
            adjacent_ok,
            &flow.flow_id,
            || "two adjacent segments share a grounding document".to_string(),
        );

        let bounds_ok =
            flow.turns.len() >= config.min_turns && flow.turns.len() <= config.max_turns;
        validation.record("turn_bounds", bounds_ok, &flow.flow_id, || {
            format!("flow has {} turns", flow.turns.len())
        });

        let total_segment_turns: usize = flow.segments.iter().map(DialogueSegment::len).sum();
        let mut split_ok = true;
        let mut fidelity_ok = flow.turns.len() == total_segment_turns;
        let mut detail = String::new();
        let mut cursor = 0usize;
        for segment in &flow.segments {
            match dialogues.get(&segment.source_dial_id) {
                Some(source) if segment.turn_end <= source.turns.len() && !segment.is_empty() => {
                    let splits =
                        find_split_points(source, &config.responding_act, &config.followup_act);
                    let start_ok =
                        segment.turn_start == 0 || splits.contains(&(segment.turn_start - 1));
                    let end_ok = segment.turn_end == source.turns.len()
                        || splits.contains(&(segment.turn_end - 1));
                    if !start_ok || !end_ok {
                        split_ok = false;
                        detail = format!(
                            "segment {}..{} of `{}` is not delimited by split points",
                            segment.turn_start, segment.turn_end, segment.source_dial_id
                        );
                    }
                    if fidelity_ok {
                        let source_slice = &source.turns[segment.turn_start..segment.turn_end];
                        let flow_slice = &flow.turns[cursor..cursor + segment.len()];
                        if source_slice
                            .iter()
                            .zip(flow_slice)
                            .any(|(a, b)| a.utterance != b.utterance || a.role != b.role)
                        {
                            fidelity_ok = false;
                        }
                    }
                }
                Some(_) => {
                    split_ok = false;
                    fidelity_ok = false;
                    detail = format!(
                        "segment {}..{} lies outside dialogue `{}`",
                        segment.turn_start, segment.turn_end, segment.source_dial_id
                    );
                }
                None => {
                    split_ok = false;
                    detail = format!("unknown source dialogue `{}`", segment.source_dial_id);
                }
            }
            cursor += segment.len();
        }
        validation.record("split_validity", split_ok, &flow.flow_id, || detail.clone());
        validation.record("turn_fidelity", fidelity_ok, &flow.flow_id, || {
            "materialized turns do not match their source".to_string()
        });
    }

    validation
}

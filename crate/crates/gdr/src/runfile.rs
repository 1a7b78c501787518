//! Run files: one JSON header line describing the configuration, then one
//! text line per hit in TREC-run style with an extra source column:
//!
//! ```text
//! {"config":{...},"inputs":{...},"n_queries":...}
//! query_id passage_id rank score source
//! ```
//!
//! Ids may contain spaces (document titles leak into passage ids), so the
//! two id columns are minimally escaped: `%` as `%25`, space as `%20`,
//! tab as `%09`, newline as `%0A`. Scores are written in Rust's shortest
//! round-trip notation, so reading a run back is lossless.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use gdr_core::retrieve::{HitSource, RetrievalRun, RunConfig, ScoredHit};

use crate::{fsutil, Error, Result};

/// Header line: run configuration plus input provenance hashes.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RunHeader {
    pub config: RunConfig,
    /// input name -> SHA-256 of the file it came from.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub inputs: BTreeMap<String, String>,
    pub n_queries: usize,
}

fn escape_id(id: &str) -> String {
    let mut out = String::with_capacity(id.len());
    for c in id.chars() {
        match c {
            '%' => out.push_str("%25"),
            ' ' => out.push_str("%20"),
            '\t' => out.push_str("%09"),
            '\n' => out.push_str("%0A"),
            _ => out.push(c),
        }
    }
    out
}

fn unescape_id(id: &str) -> String {
    id.replace("%20", " ")
        .replace("%09", "\t")
        .replace("%0A", "\n")
        .replace("%25", "%")
}

pub fn to_run_bytes(run: &RetrievalRun, inputs: &BTreeMap<String, String>) -> Result<Vec<u8>> {
    let header = RunHeader {
        config: run.config.clone(),
        inputs: inputs.clone(),
        n_queries: run.results.len(),
    };
    let mut out = serde_json::to_vec(&header).map_err(|e| Error::Json {
        path: "<run header>".into(),
        source: e,
    })?;
    out.push(b'\n');
    for (query_id, hits) in &run.results {
        for hit in hits {
            out.extend_from_slice(
                format!(
                    "{} {} {} {} {}\n",
                    escape_id(query_id),
                    escape_id(&hit.passage_id),
                    hit.rank,
                    hit.score,
                    hit.source.as_str()
                )
                .as_bytes(),
            );
        }
    }
    Ok(out)
}

/// Writes the run atomically.
pub fn save_run(path: &Path, run: &RetrievalRun, inputs: &BTreeMap<String, String>) -> Result<()> {
    fsutil::write_atomic(path, &to_run_bytes(run, inputs)?)
}

/// Reads a run file back, including every query id named in the header
/// even if it produced no hits. Returns the run and its header.
pub fn load_run(path: &Path) -> Result<(RetrievalRun, RunHeader)> {
    let raw = fsutil::read_to_string(path)?;
    let mut lines = raw.lines();
    let header_line = lines.next().ok_or_else(|| Error::Format {
        path: path.to_path_buf(),
        message: "empty run file".into(),
    })?;
    let header: RunHeader = serde_json::from_str(header_line).map_err(|e| Error::Json {
        path: path.to_path_buf(),
        source: e,
    })?;

    let mut run = RetrievalRun {
        config: header.config.clone(),
        results: BTreeMap::new(),
    };
    for (i, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let mut fields = line.split(' ');
        let parse = |field: Option<&str>, what: &str| {
            field.map(str::to_string).ok_or_else(|| Error::Format {
                path: path.to_path_buf(),
                message: format!("line {}: missing {what}", i + 2),
            })
        };
        let query_id = unescape_id(&parse(fields.next(), "query id")?);
        let passage_id = unescape_id(&parse(fields.next(), "passage id")?);
        let rank: u32 = parse(fields.next(), "rank")?
            .parse()
            .map_err(|_| Error::Format {
                path: path.to_path_buf(),
                message: format!("line {}: bad rank", i + 2),
            })?;
        let score: f64 = parse(fields.next(), "score")?
            .parse()
            .map_err(|_| Error::Format {
                path: path.to_path_buf(),
                message: format!("line {}: bad score", i + 2),
            })?;
        let source = match parse(fields.next(), "source")?.as_str() {
            "full_query" => HitSource::FullQuery,
            "current_turn" => HitSource::CurrentTurn,
            other => {
                return Err(Error::Format {
                    path: path.to_path_buf(),
                    message: format!("line {}: unknown source `{other}`", i + 2),
                })
            }
        };
        run.results.entry(query_id).or_default().push(ScoredHit {
            passage_id,
            score,
            rank,
            source,
        });
    }
    for hits in run.results.values_mut() {
        hits.sort_by_key(|h| h.rank);
    }
    Ok((run, header))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_run() -> RetrievalRun {
        let mut results = BTreeMap::new();
        results.insert(
            "dial a:2".to_string(),
            vec![
                ScoredHit {
                    passage_id: "Doc Title | Site#1_0::struct::3".to_string(),
                    score: 1.25,
                    rank: 1,
                    source: HitSource::FullQuery,
                },
                ScoredHit {
                    passage_id: "Other%Doc::struct::0".to_string(),
                    score: 0.1,
                    rank: 2,
                    source: HitSource::CurrentTurn,
                },
            ],
        );
        results.insert("dial b:4".to_string(), vec![]);
        RetrievalRun {
            config: RunConfig {
                retriever: "bm25".into(),
                segmentation: "struct".into(),
                rerank: "none".into(),
                k: 10,
            },
            results,
        }
    }

    #[test]
    fn roundtrip_with_spaces_and_percents() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.txt");
        let run = sample_run();
        let mut inputs = BTreeMap::new();
        inputs.insert("queries".to_string(), "abc123".to_string());
        save_run(&path, &run, &inputs).unwrap();

        let (back, header) = load_run(&path).unwrap();
        assert_eq!(header.config, run.config);
        assert_eq!(header.inputs["queries"], "abc123");
        assert_eq!(header.n_queries, 2);
        assert_eq!(back.results["dial a:2"], run.results["dial a:2"]);
        // Queries with zero hits exist in the original map but have no
        // lines; they are simply absent after a roundtrip.
        assert!(!back.results.contains_key("dial b:4"));
    }

    #[test]
    fn score_text_roundtrips_exactly() {
        let value = 0.615866824528895f64;
        let text = format!("{value}");
        assert_eq!(text.parse::<f64>().unwrap(), value);
    }

    #[test]
    fn escape_unescape_inverse() {
        for id in [
            "plain",
            "has space",
            "tab\there",
            "per%cent",
            "a%20b",
            "%25",
        ] {
            assert_eq!(unescape_id(&escape_id(id)), id);
            assert!(!escape_id(id).contains(' '));
        }
    }
}

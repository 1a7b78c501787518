//! Evaluation report output: JSON with config echo and provenance, plus a
//! plain-text table renderer for one or more reports.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use gdr_core::metrics::{EvalReport, MetricBlock};

use crate::{fsutil, Error, Result};

/// The on-disk report document.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ReportDoc {
    /// Free-form label, defaults to the run or predictions file stem.
    pub label: String,
    /// Echo of the command configuration that produced the report.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub config: BTreeMap<String, String>,
    /// input name -> SHA-256 of the file.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub inputs: BTreeMap<String, String>,
    pub report: EvalReport,
}

pub fn save_report(path: &Path, doc: &ReportDoc) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(doc).map_err(|e| Error::Json {
        path: path.to_path_buf(),
        source: e,
    })?;
    bytes.push(b'\n');
    fsutil::write_atomic(path, &bytes)
}

pub fn load_report(path: &Path) -> Result<ReportDoc> {
    let raw = fsutil::read_to_string(path)?;
    serde_json::from_str(&raw).map_err(|e| Error::Json {
        path: path.to_path_buf(),
        source: e,
    })
}

fn fmt_fraction(value: Option<f64>) -> String {
    match value {
        Some(v) => format!("{:.1}", v * 100.0),
        None => "-".to_string(),
    }
}

fn fmt_bleu(value: Option<f64>) -> String {
    match value {
        Some(v) => format!("{v:.1}"),
        None => "-".to_string(),
    }
}

/// Renders reports as an aligned text table in the usual result layout:
/// F1 / EM / BL as percentages-style points, recall columns per k.
pub fn render_table(docs: &[ReportDoc]) -> String {
    let mut ks: Vec<usize> = docs
        .iter()
        .flat_map(|d| d.report.overall.recall_at.keys().copied())
        .collect();
    ks.sort_unstable();
    ks.dedup();

    let mut header: Vec<String> = vec![
        "run".into(),
        "n".into(),
        "F1".into(),
        "EM".into(),
        "BL".into(),
    ];
    header.extend(ks.iter().map(|k| format!("@{k}")));

    let block_row = |label: &str, block: &MetricBlock| -> Vec<String> {
        let mut row = vec![
            label.to_string(),
            block.n_queries.to_string(),
            fmt_fraction(block.f1),
            fmt_fraction(block.em),
            fmt_bleu(block.bleu),
        ];
        for k in &ks {
            row.push(match block.recall_at.get(k) {
                Some(v) => format!("{:.1}", v * 100.0),
                None => "-".to_string(),
            });
        }
        row
    };

    let mut rows: Vec<Vec<String>> = vec![header];
    for doc in docs {
        rows.push(block_row(&doc.label, &doc.report.overall));
        for (domain, block) in &doc.report.per_domain {
            rows.push(block_row(&format!("  {}/{domain}", doc.label), block));
        }
    }

    let columns = rows[0].len();
    let mut widths = vec![0usize; columns];
    for row in &rows {
        for (i, cell) in row.iter().enumerate() {
            widths[i] = widths[i].max(cell.len());
        }
    }
    let mut out = String::new();
    for row in &rows {
        let mut line = String::new();
        for (i, cell) in row.iter().enumerate() {
            if i == 0 {
                line.push_str(&format!("{:<width$}", cell, width = widths[0]));
            } else {
                line.push_str(&format!("  {:>width$}", cell, width = widths[i]));
            }
        }
        out.push_str(line.trim_end());
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeMap as Map;

    fn doc(label: &str, recall: &[(usize, f64)]) -> ReportDoc {
        let mut report = EvalReport::default();
        report.overall.n_queries = 42;
        report.overall.recall_at = recall.iter().copied().collect();
        ReportDoc {
            label: label.into(),
            config: Map::new(),
            inputs: Map::new(),
            report,
        }
    }

    #[test]
    fn table_has_columns_per_k() {
        let docs = vec![
            doc("bm25-struct", &[(1, 0.196), (5, 0.419), (10, 0.508)]),
            doc("bm25-token", &[(1, 0.195), (5, 0.427), (10, 0.514)]),
        ];
        let table = render_table(&docs);
        let lines: Vec<&str> = table.lines().collect();
        assert_eq!(lines.len(), 3);
        assert!(lines[0].contains("@1") && lines[0].contains("@5") && lines[0].contains("@10"));
        assert!(
            lines[1].contains("19.6") && lines[1].contains("41.9") && lines[1].contains("50.8")
        );
        assert!(
            lines[2].contains("19.5") && lines[2].contains("42.7") && lines[2].contains("51.4")
        );
    }

    #[test]
    fn save_load_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("report.json");
        let mut d = doc("x", &[(1, 0.5)]);
        d.report.overall.f1 = Some(0.413);
        d.report.overall.bleu = Some(21.4);
        d.inputs.insert("run".into(), "cafe".into());
        save_report(&path, &d).unwrap();
        let back = load_report(&path).unwrap();
        assert_eq!(back, d);
    }
}

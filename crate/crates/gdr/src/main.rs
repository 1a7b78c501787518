//! `gdr`: grounded-dialogue retrieval experiments from the command line.
//!
//! Subcommands cover the full pipeline: `ingest` (upstream data to
//! canonical JSONL), `segment` (passage corpora), `build-index` (BM25
//! persistence), `retrieve` (BM25 or dense, with optional current-turn
//! re-ranking), `eval-retrieval` / `eval-generation` (reports),
//! `compose-flows` (multi-document dialogue flows), `sweep` (BM25
//! parameter grid) and `report` (result tables).
//!
//! Exit codes: 0 on success, 1 on validation or ingestion errors, 2 on
//! usage errors.

use std::collections::{BTreeMap, BTreeSet};
use std::num::NonZeroUsize;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use gdr_core::corpus::{self, SegmentationMode, SourceDocument, StructureOptions};
use gdr_core::dialogue::{self, DialQuery};
use gdr_core::flowgen::{self, FlowgenConfig};
use gdr_core::lexindex::{build_bm25, Bm25Index, Bm25Params};
use gdr_core::metrics::{self, GenerationPair};
use gdr_core::retrieve::{self, HitSource, MergePolicy, RetrievalRun, RunConfig};
use gdr_core::Passage;

use gdr::adapters::{self, InputFormat};
use gdr::report::{load_report, render_table, save_report, ReportDoc};
use gdr::{embed_io, fsutil, index_io, jsonl, runfile};

#[derive(Parser)]
#[command(name = "gdr", version, about = "Grounded-dialogue retrieval toolkit")]
struct Cli {
    /// Root directory for dataset files; relative inputs that do not
    /// exist are retried under this directory. Precedence: this flag,
    /// then the config file, then $GDR_DATA_DIR.
    #[arg(long, global = true)]
    data_dir: Option<PathBuf>,

    /// Key=value config file (currently only `data_dir`).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Convert upstream dataset files into canonical JSONL (documents,
    /// dialogues and extracted queries).
    Ingest(IngestArgs),
    /// Segment a document corpus into passages.
    Segment(SegmentArgs),
    /// Build and persist a BM25 index over a passage corpus.
    BuildIndex(BuildIndexArgs),
    /// Retrieve top-k passages for every query.
    Retrieve(RetrieveArgs),
    /// Score a run file against gold groundings (recall@k).
    EvalRetrieval(EvalRetrievalArgs),
    /// Score generation predictions (token-F1, EM, BLEU).
    EvalGeneration(EvalGenerationArgs),
    /// Compose multi-document dialogue flows from single-document
    /// dialogues.
    ComposeFlows(ComposeFlowsArgs),
    /// Grid-sweep BM25 parameters and report recall per combination.
    Sweep(SweepArgs),
    /// Render one or more report JSON files as an aligned text table.
    Report(ReportArgs),
}

#[derive(Args)]
struct IngestArgs {
    /// Upstream or canonical document file.
    #[arg(long)]
    docs: Option<PathBuf>,
    /// Upstream or canonical dialogue files (repeatable).
    #[arg(long)]
    dials: Vec<PathBuf>,
    #[arg(long, default_value = "auto", value_parser = parse_format)]
    format: InputFormat,
    #[arg(long)]
    out_dir: PathBuf,
}

fn parse_format(s: &str) -> Result<InputFormat, String> {
    s.parse()
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum ModeArg {
    Token,
    Struct,
}

#[derive(Args)]
struct SegmentArgs {
    /// Canonical documents JSONL (or upstream file).
    #[arg(long)]
    docs: PathBuf,
    #[arg(long, value_enum)]
    mode: ModeArg,
    /// Window size in index tokens (token mode).
    #[arg(long, default_value_t = 100)]
    window: usize,
    /// Sub-split structure passages longer than this many body tokens.
    #[arg(long)]
    max_structure_tokens: Option<usize>,
    /// Mark-up tags that open a content passage (structure mode).
    #[arg(long, value_delimiter = ',', default_value = "p,ul,ol,li")]
    content_tags: Vec<String>,
    #[arg(long)]
    output: PathBuf,
}

#[derive(Args)]
struct BuildIndexArgs {
    /// Passage corpus JSONL.
    #[arg(long)]
    passages: PathBuf,
    #[arg(long, default_value_t = 0.9)]
    k1: f64,
    #[arg(long, default_value_t = 0.4)]
    b: f64,
    #[arg(long)]
    output: PathBuf,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum RerankArg {
    None,
    CurrentTurn,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum MergeArg {
    RoundRobin,
    ConcatDedupe,
}

#[derive(Args)]
struct RetrieveArgs {
    /// Queries JSONL (from `ingest`).
    #[arg(long)]
    queries: PathBuf,
    #[arg(long, default_value_t = 10)]
    k: usize,
    /// BM25 index file; mutually exclusive with --passage-embeddings.
    #[arg(long)]
    index: Option<PathBuf>,
    /// Passage embeddings (JSONL or EMB1) for dense retrieval.
    #[arg(long)]
    passage_embeddings: Option<PathBuf>,
    /// Query embeddings keyed by query_id (dense retrieval).
    #[arg(long)]
    query_embeddings: Option<PathBuf>,
    /// Current-turn query embeddings keyed by query_id (dense re-ranking).
    #[arg(long)]
    current_embeddings: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "none")]
    rerank: RerankArg,
    #[arg(long, value_enum, default_value = "round-robin")]
    merge: MergeArg,
    /// Token budget for rendered dialogue queries.
    #[arg(long, default_value_t = 128)]
    max_query_tokens: usize,
    #[arg(long, default_value = "[SEP]")]
    separator: String,
    #[arg(long)]
    output: PathBuf,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum LevelArg {
    Passage,
    Document,
}

#[derive(Args)]
struct EvalRetrievalArgs {
    #[arg(long)]
    run: PathBuf,
    #[arg(long)]
    queries: PathBuf,
    /// Canonical documents JSONL, for resolving grounding spans.
    #[arg(long)]
    docs: PathBuf,
    /// Passage corpus the run was retrieved from.
    #[arg(long)]
    passages: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "1,5,10")]
    ks: Vec<usize>,
    #[arg(long, value_enum, default_value = "passage")]
    level: LevelArg,
    /// Restrict evaluation to one domain.
    #[arg(long)]
    domain: Option<String>,
    #[arg(long)]
    label: Option<String>,
    #[arg(long)]
    output: PathBuf,
    /// Also print the report as a text table.
    #[arg(long)]
    table: bool,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum TaskArg {
    /// Grounding-span prediction.
    Grounding,
    /// Agent response generation.
    Response,
}

#[derive(Args)]
struct EvalGenerationArgs {
    /// Predictions JSONL: {"query_id": ..., "text": ...}.
    #[arg(long)]
    predictions: PathBuf,
    #[arg(long)]
    queries: PathBuf,
    #[arg(long, value_enum)]
    task: TaskArg,
    #[arg(long)]
    domain: Option<String>,
    #[arg(long)]
    label: Option<String>,
    #[arg(long)]
    output: PathBuf,
    #[arg(long)]
    table: bool,
}

#[derive(Args)]
struct ComposeFlowsArgs {
    #[arg(long)]
    dials: PathBuf,
    #[arg(long)]
    docs: PathBuf,
    #[arg(long)]
    seed: u64,
    #[arg(long, default_value_t = 6)]
    min_turns: usize,
    #[arg(long, default_value_t = 20)]
    max_turns: usize,
    #[arg(long, default_value_t = 2)]
    target_segments_min: usize,
    #[arg(long, default_value_t = 4)]
    target_segments_max: usize,
    #[arg(long, default_value_t = 0.5)]
    related_preference: f64,
    /// Dialogue-act label of answer turns in the dataset vocabulary.
    #[arg(long, default_value = "respond_solution")]
    responding_act: String,
    /// Dialogue-act label of follow-up question turns.
    #[arg(long, default_value = "query_condition")]
    followup_act: String,
    /// URL ancestor levels compared for document relatedness.
    #[arg(long, default_value_t = 1)]
    url_parent_depth: usize,
    #[arg(long)]
    output: PathBuf,
    /// Validation report JSON (rule pass/fail counts).
    #[arg(long)]
    report: PathBuf,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    passages: PathBuf,
    #[arg(long)]
    queries: PathBuf,
    #[arg(long)]
    docs: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "0.6,0.9,1.2")]
    k1_grid: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "0.3,0.4,0.75")]
    b_grid: Vec<f64>,
    #[arg(long, default_value_t = 10)]
    k: usize,
    #[arg(long, value_delimiter = ',', default_value = "1,5,10")]
    ks: Vec<usize>,
    #[arg(long, default_value_t = 128)]
    max_query_tokens: usize,
    #[arg(long, default_value = "[SEP]")]
    separator: String,
    /// Optional JSON output of the grid results.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct ReportArgs {
    /// Report JSON files produced by the eval commands.
    #[arg(long, required = true, num_args = 1..)]
    inputs: Vec<PathBuf>,
    #[arg(long)]
    output: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let data_dir = resolve_data_dir(&cli)?;
    let resolve = move |path: &Path| resolve_input(path, data_dir.as_deref());
    match cli.command {
        Command::Ingest(args) => cmd_ingest(args, &resolve),
        Command::Segment(args) => cmd_segment(args, &resolve),
        Command::BuildIndex(args) => cmd_build_index(args, &resolve),
        Command::Retrieve(args) => cmd_retrieve(args, &resolve),
        Command::EvalRetrieval(args) => cmd_eval_retrieval(args, &resolve),
        Command::EvalGeneration(args) => cmd_eval_generation(args, &resolve),
        Command::ComposeFlows(args) => cmd_compose_flows(args, &resolve),
        Command::Sweep(args) => cmd_sweep(args, &resolve),
        Command::Report(args) => cmd_report(args, &resolve),
    }
}

/// data_dir precedence: --data-dir flag, config file, $GDR_DATA_DIR.
fn resolve_data_dir(cli: &Cli) -> anyhow::Result<Option<PathBuf>> {
    if let Some(dir) = &cli.data_dir {
        return Ok(Some(dir.clone()));
    }
    if let Some(config) = &cli.config {
        let raw = std::fs::read_to_string(config)
            .with_context(|| format!("reading config {}", config.display()))?;
        for line in raw.lines() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some((key, value)) = line.split_once('=') {
                if key.trim() == "data_dir" {
                    return Ok(Some(PathBuf::from(value.trim())));
                }
            }
        }
    }
    Ok(std::env::var_os("GDR_DATA_DIR").map(PathBuf::from))
}

fn resolve_input(path: &Path, data_dir: Option<&Path>) -> PathBuf {
    if path.exists() || path.is_absolute() {
        return path.to_path_buf();
    }
    if let Some(root) = data_dir {
        let joined = root.join(path);
        if joined.exists() {
            return joined;
        }
    }
    path.to_path_buf()
}

type Resolver = dyn Fn(&Path) -> PathBuf;

fn nz(value: usize, what: &str) -> anyhow::Result<NonZeroUsize> {
    NonZeroUsize::new(value).ok_or_else(|| anyhow!("{what} must be at least 1"))
}

/// Sidecar metadata written next to plain-JSONL outputs.
#[derive(Serialize)]
struct OutputMeta {
    command: String,
    inputs: BTreeMap<String, String>,
    records: usize,
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    extra: BTreeMap<String, serde_json::Value>,
}

fn write_meta(output: &Path, meta: &OutputMeta) -> anyhow::Result<()> {
    let path = index_io::sidecar_path(output);
    let mut bytes = serde_json::to_vec_pretty(meta)?;
    bytes.push(b'\n');
    fsutil::write_atomic(&path, &bytes)?;
    Ok(())
}

fn input_hashes(named: &[(&str, &Path)]) -> anyhow::Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (name, path) in named {
        map.insert(name.to_string(), fsutil::sha256_file(path)?);
    }
    Ok(map)
}

fn cmd_ingest(args: IngestArgs, resolve: &Resolver) -> anyhow::Result<()> {
    if args.docs.is_none() && args.dials.is_empty() {
        bail!("nothing to ingest: pass --docs and/or --dials");
    }
    std::fs::create_dir_all(&args.out_dir)
        .with_context(|| format!("creating {}", args.out_dir.display()))?;

    let mut documents: Option<Vec<SourceDocument>> = None;
    if let Some(docs_path) = &args.docs {
        let docs_path = resolve(docs_path);
        let docs = adapters::load_documents(&docs_path, args.format)?;
        let out = args.out_dir.join("documents.jsonl");
        jsonl::write_jsonl(&out, &docs)?;
        write_meta(
            &out,
            &OutputMeta {
                command: "ingest".into(),
                inputs: input_hashes(&[("docs", &docs_path)])?,
                records: docs.len(),
                extra: BTreeMap::new(),
            },
        )?;
        println!(
            "documents: {} -> {} ({} records)",
            docs_path.display(),
            out.display(),
            docs.len()
        );
        documents = Some(docs);
    }

    let doc_map: BTreeMap<String, SourceDocument> = documents
        .as_deref()
        .unwrap_or(&[])
        .iter()
        .map(|d| (d.doc_id.clone(), d.clone()))
        .collect();

    for dials_path in &args.dials {
        let dials_path = resolve(dials_path);
        let stem = dials_path
            .file_stem()
            .and_then(|s| s.to_str())
            .unwrap_or("dialogues");
        let dialogues = adapters::load_dialogues(&dials_path, args.format)?;

        let dial_out = args.out_dir.join(format!("{stem}.dialogues.jsonl"));
        jsonl::write_jsonl(&dial_out, &dialogues)?;
        write_meta(
            &dial_out,
            &OutputMeta {
                command: "ingest".into(),
                inputs: input_hashes(&[("dials", &dials_path)])?,
                records: dialogues.len(),
                extra: BTreeMap::new(),
            },
        )?;

        let mut build = dialogue::build_queries(&dialogues);
        let unresolved = if doc_map.is_empty() {
            0
        } else {
            dialogue::resolve_gold_spans(&mut build.queries, &doc_map)
        };
        let query_out = args.out_dir.join(format!("{stem}.queries.jsonl"));
        jsonl::write_jsonl(&query_out, &build.queries)?;
        let mut extra = BTreeMap::new();
        extra.insert(
            "missing_grounding".into(),
            serde_json::json!(build.missing_grounding.len()),
        );
        extra.insert("unresolved_spans".into(), serde_json::json!(unresolved));
        write_meta(
            &query_out,
            &OutputMeta {
                command: "ingest".into(),
                inputs: input_hashes(&[("dials", &dials_path)])?,
                records: build.queries.len(),
                extra,
            },
        )?;

        println!(
            "dialogues: {} -> {} ({} dialogues, {} queries)",
            dials_path.display(),
            dial_out.display(),
            dialogues.len(),
            build.queries.len()
        );
        if !build.missing_grounding.is_empty() {
            eprintln!(
                "warning: {} agent turns without grounding annotations",
                build.missing_grounding.len()
            );
        }
        if unresolved > 0 {
            eprintln!("warning: {unresolved} grounding references did not resolve to spans");
        }
    }
    Ok(())
}

fn cmd_segment(args: SegmentArgs, resolve: &Resolver) -> anyhow::Result<()> {
    let docs_path = resolve(&args.docs);
    let docs = adapters::load_documents(&docs_path, InputFormat::Auto)?;
    let mode = match args.mode {
        ModeArg::Token => SegmentationMode::TokenWindow {
            window: nz(args.window, "--window")?,
        },
        ModeArg::Struct => SegmentationMode::Structure {
            max_structure_tokens: args
                .max_structure_tokens
                .map(|m| nz(m, "--max-structure-tokens"))
                .transpose()?,
        },
    };
    let opts = StructureOptions {
        content_tags: args.content_tags.clone(),
    };
    let build = corpus::segment_corpus(&docs, &mode, &opts);
    for warning in &build.warnings {
        eprintln!("warning: {}: {}", warning.doc_id, warning.message);
    }
    jsonl::write_jsonl(&args.output, &build.passages)?;

    let total_tokens: usize = build.passages.iter().map(|p| p.token_count).sum();
    let mean_tokens = if build.passages.is_empty() {
        0.0
    } else {
        total_tokens as f64 / build.passages.len() as f64
    };
    let mut extra = BTreeMap::new();
    extra.insert("mode".into(), serde_json::json!(mode.tag()));
    extra.insert("mean_tokens".into(), serde_json::json!(mean_tokens));
    extra.insert("warnings".into(), serde_json::json!(build.warnings.len()));
    write_meta(
        &args.output,
        &OutputMeta {
            command: "segment".into(),
            inputs: input_hashes(&[("docs", &docs_path)])?,
            records: build.passages.len(),
            extra,
        },
    )?;
    println!(
        "passages: {} ({} mode, mean {:.1} tokens) -> {}",
        build.passages.len(),
        mode.tag(),
        mean_tokens,
        args.output.display()
    );
    Ok(())
}

fn cmd_build_index(args: BuildIndexArgs, resolve: &Resolver) -> anyhow::Result<()> {
    let passages_path = resolve(&args.passages);
    let passages: Vec<Passage> = jsonl::read_jsonl(&passages_path)?;
    let params = Bm25Params {
        k1: args.k1,
        b: args.b,
    };
    let start = Instant::now();
    let index = build_bm25(&passages, params)?;
    let corpus_hash = fsutil::sha256_file(&passages_path)?;
    index_io::save_bm25(&args.output, &index, &corpus_hash)?;
    println!(
        "index: {} passages, {} terms, built in {:.2?} -> {}",
        index.n_docs(),
        index.postings.len(),
        start.elapsed(),
        args.output.display()
    );
    Ok(())
}

fn segmentation_tag(id_table: &[String]) -> String {
    id_table
        .first()
        .map(|id| {
            let mut parts = id.rsplitn(3, "::");
            let _index = parts.next();
            parts.next().unwrap_or("unknown").to_string()
        })
        .unwrap_or_else(|| "unknown".to_string())
}

fn cmd_retrieve(args: RetrieveArgs, resolve: &Resolver) -> anyhow::Result<()> {
    let queries_path = resolve(&args.queries);
    let queries: Vec<DialQuery> = jsonl::read_jsonl(&queries_path)?;
    let k = nz(args.k, "--k")?;
    let budget = nz(args.max_query_tokens, "--max-query-tokens")?;

    let mut inputs: Vec<(String, PathBuf)> = vec![("queries".into(), queries_path.clone())];

    let (retriever, results, segmentation) = match (&args.index, &args.passage_embeddings) {
        (Some(index_arg), None) => {
            let index_path = resolve(index_arg);
            inputs.push(("index".into(), index_path.clone()));
            let index: Bm25Index = index_io::load_bm25(&index_path)?;
            let full = retrieve::retrieve_all_bm25(
                &index,
                &queries,
                k,
                |q| dialogue::render_query(q, budget, &args.separator),
                HitSource::FullQuery,
            );
            let results = match args.rerank {
                RerankArg::None => full,
                RerankArg::CurrentTurn => {
                    let current = retrieve::retrieve_all_bm25(
                        &index,
                        &queries,
                        k,
                        |q| dialogue::render_current_turn(q, budget),
                        HitSource::CurrentTurn,
                    );
                    retrieve::rerank_results(&full, &current, k, merge_policy(args.merge))
                }
            };
            ("bm25", results, segmentation_tag(&index.id_table))
        }
        (None, Some(emb_arg)) => {
            let passage_emb_path = resolve(emb_arg);
            inputs.push(("passage_embeddings".into(), passage_emb_path.clone()));
            let passage_set = embed_io::load_embeddings(&passage_emb_path)?;
            let index = gdr_core::denseindex::DenseIndex::build(&passage_set)?;

            let Some(query_emb_arg) = &args.query_embeddings else {
                bail!("dense retrieval needs --query-embeddings");
            };
            let query_emb_path = resolve(query_emb_arg);
            inputs.push(("query_embeddings".into(), query_emb_path.clone()));
            let query_embeddings = embedding_map(&query_emb_path)?;

            let full = retrieve::retrieve_all_dense(
                &index,
                &queries,
                &query_embeddings,
                k,
                HitSource::FullQuery,
            )?;
            let results = match args.rerank {
                RerankArg::None => full,
                RerankArg::CurrentTurn => {
                    let Some(current_arg) = &args.current_embeddings else {
                        bail!("--rerank current-turn needs --current-embeddings");
                    };
                    let current_emb_path = resolve(current_arg);
                    inputs.push(("current_embeddings".into(), current_emb_path.clone()));
                    let current_embeddings = embedding_map(&current_emb_path)?;
                    let current = retrieve::retrieve_all_dense(
                        &index,
                        &queries,
                        &current_embeddings,
                        k,
                        HitSource::CurrentTurn,
                    )?;
                    retrieve::rerank_results(&full, &current, k, merge_policy(args.merge))
                }
            };
            ("dense", results, segmentation_tag(index.ids()))
        }
        (Some(_), Some(_)) => bail!("pass either --index or --passage-embeddings, not both"),
        (None, None) => bail!("pass --index (BM25) or --passage-embeddings (dense)"),
    };

    let run = RetrievalRun {
        config: RunConfig {
            retriever: retriever.to_string(),
            segmentation,
            rerank: match args.rerank {
                RerankArg::None => "none".into(),
                RerankArg::CurrentTurn => "current_turn".into(),
            },
            k: args.k,
        },
        results,
    };
    let named: Vec<(&str, &Path)> = inputs
        .iter()
        .map(|(n, p)| (n.as_str(), p.as_path()))
        .collect();
    runfile::save_run(&args.output, &run, &input_hashes(&named)?)?;
    let hit_count: usize = run.results.values().map(Vec::len).sum();
    println!(
        "run: {} queries, {} hits -> {}",
        run.results.len(),
        hit_count,
        args.output.display()
    );
    Ok(())
}

fn merge_policy(arg: MergeArg) -> MergePolicy {
    match arg {
        MergeArg::RoundRobin => MergePolicy::RoundRobin,
        MergeArg::ConcatDedupe => MergePolicy::ConcatDedupe,
    }
}

fn embedding_map(path: &Path) -> anyhow::Result<BTreeMap<String, Vec<f32>>> {
    let set = embed_io::load_embeddings(path)?;
    Ok(set
        .entries
        .into_iter()
        .map(|entry| (entry.id, entry.vector))
        .collect())
}

fn cmd_eval_retrieval(args: EvalRetrievalArgs, resolve: &Resolver) -> anyhow::Result<()> {
    let run_path = resolve(&args.run);
    let queries_path = resolve(&args.queries);
    let docs_path = resolve(&args.docs);
    let passages_path = resolve(&args.passages);

    let (mut run, _header) = runfile::load_run(&run_path)?;
    let mut queries: Vec<DialQuery> = jsonl::read_jsonl(&queries_path)?;
    if let Some(domain) = &args.domain {
        queries.retain(|q| &q.domain == domain);
        let keep: BTreeSet<&str> = queries.iter().map(|q| q.query_id.as_str()).collect();
        run.results
            .retain(|query_id, _| keep.contains(query_id.as_str()));
    }
    let docs: BTreeMap<String, SourceDocument> =
        adapters::load_documents(&docs_path, InputFormat::Auto)?
            .into_iter()
            .map(|d| (d.doc_id.clone(), d))
            .collect();
    let passages: Vec<Passage> = jsonl::read_jsonl(&passages_path)?;
    let catalog = metrics::PassageCatalog::new(&passages);

    let mut positives: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
    let mut domains: BTreeMap<String, String> = BTreeMap::new();
    for query in &queries {
        domains.insert(query.query_id.clone(), query.domain.clone());
        let set = match args.level {
            LevelArg::Passage => metrics::positive_passages(query, &docs, &catalog)?,
            LevelArg::Document => metrics::positive_documents(query),
        };
        positives.insert(query.query_id.clone(), set);
    }
    // Evaluation covers exactly the query set, including queries the run
    // never answered.
    for query in &queries {
        run.results.entry(query.query_id.clone()).or_default();
    }
    if matches!(args.level, LevelArg::Document) {
        for hits in run.results.values_mut() {
            for hit in hits.iter_mut() {
                hit.passage_id = corpus::passage_doc_id(&hit.passage_id).to_string();
            }
        }
    }

    let ks = args
        .ks
        .iter()
        .map(|&k| nz(k, "--ks"))
        .collect::<anyhow::Result<Vec<_>>>()?;
    let report = metrics::evaluate_retrieval(&run, &positives, &ks, &domains)?;
    if report.n_excluded > 0 {
        eprintln!(
            "warning: {} queries excluded from recall (empty gold grounding)",
            report.n_excluded
        );
    }

    let label = args
        .label
        .clone()
        .or_else(|| {
            run_path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
        })
        .unwrap_or_else(|| "run".into());
    let mut config = BTreeMap::new();
    config.insert("level".into(), format!("{:?}", args.level).to_lowercase());
    config.insert(
        "ks".into(),
        args.ks
            .iter()
            .map(usize::to_string)
            .collect::<Vec<_>>()
            .join(","),
    );
    if let Some(domain) = &args.domain {
        config.insert("domain".into(), domain.clone());
    }
    let doc = ReportDoc {
        label,
        config,
        inputs: input_hashes(&[
            ("run", &run_path),
            ("queries", &queries_path),
            ("docs", &docs_path),
            ("passages", &passages_path),
        ])?,
        report,
    };
    save_report(&args.output, &doc)?;
    println!("report -> {}", args.output.display());
    if args.table {
        print!("{}", render_table(std::slice::from_ref(&doc)));
    }
    Ok(())
}

/// Generation predictions interchange: one object per line.
#[derive(Serialize, Deserialize)]
struct Prediction {
    query_id: String,
    text: String,
}

fn cmd_eval_generation(args: EvalGenerationArgs, resolve: &Resolver) -> anyhow::Result<()> {
    let predictions_path = resolve(&args.predictions);
    let queries_path = resolve(&args.queries);
    let predictions: Vec<Prediction> = jsonl::read_jsonl(&predictions_path)?;
    let mut queries: Vec<DialQuery> = jsonl::read_jsonl(&queries_path)?;
    if let Some(domain) = &args.domain {
        queries.retain(|q| &q.domain == domain);
    }

    let by_id: BTreeMap<&str, &str> = predictions
        .iter()
        .map(|p| (p.query_id.as_str(), p.text.as_str()))
        .collect();
    let missing: Vec<&str> = queries
        .iter()
        .filter(|q| !by_id.contains_key(q.query_id.as_str()))
        .map(|q| q.query_id.as_str())
        .collect();
    if !missing.is_empty() {
        bail!(
            "{} queries have no prediction (first few: {})",
            missing.len(),
            missing
                .iter()
                .take(5)
                .cloned()
                .collect::<Vec<_>>()
                .join(", ")
        );
    }

    let pairs: Vec<GenerationPair> = queries
        .iter()
        .map(|q| GenerationPair {
            prediction: by_id[q.query_id.as_str()].to_string(),
            reference: match args.task {
                TaskArg::Grounding => q.gold_span_text.clone(),
                TaskArg::Response => q.gold_response.clone(),
            },
            domain: q.domain.clone(),
        })
        .collect();
    let report = metrics::evaluate_generation(&pairs)?;

    let label = args
        .label
        .clone()
        .or_else(|| {
            predictions_path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
        })
        .unwrap_or_else(|| "predictions".into());
    let mut config = BTreeMap::new();
    config.insert(
        "task".into(),
        match args.task {
            TaskArg::Grounding => "grounding".to_string(),
            TaskArg::Response => "response".to_string(),
        },
    );
    if let Some(domain) = &args.domain {
        config.insert("domain".into(), domain.clone());
    }
    let doc = ReportDoc {
        label,
        config,
        inputs: input_hashes(&[
            ("predictions", &predictions_path),
            ("queries", &queries_path),
        ])?,
        report,
    };
    save_report(&args.output, &doc)?;
    println!("report -> {}", args.output.display());
    if args.table {
        print!("{}", render_table(std::slice::from_ref(&doc)));
    }
    Ok(())
}

#[derive(Serialize)]
struct FlowValidationDoc {
    seed: u64,
    config: FlowgenConfig,
    inputs: BTreeMap<String, String>,
    stats: flowgen::ComposeStats,
    skipped_dialogues: Vec<String>,
    validation: flowgen::FlowValidation,
}

fn cmd_compose_flows(args: ComposeFlowsArgs, resolve: &Resolver) -> anyhow::Result<()> {
    let dials_path = resolve(&args.dials);
    let docs_path = resolve(&args.docs);
    let dialogues = adapters::load_dialogues(&dials_path, InputFormat::Auto)?;
    let docs = adapters::load_documents(&docs_path, InputFormat::Auto)?;

    let config = FlowgenConfig {
        seed: args.seed,
        min_turns: args.min_turns,
        max_turns: args.max_turns,
        target_segments_min: args.target_segments_min,
        target_segments_max: args.target_segments_max,
        related_preference: args.related_preference,
        responding_act: args.responding_act.clone(),
        followup_act: args.followup_act.clone(),
        url_parent_depth: args.url_parent_depth,
    };
    let (batch, segmentation) = flowgen::run_flowgen(&dialogues, &docs, &config)?;
    jsonl::write_jsonl(&args.output, &batch.flows)?;

    let dialogue_map: BTreeMap<String, gdr_core::Dialogue> = dialogues
        .iter()
        .map(|d| (d.dial_id.clone(), d.clone()))
        .collect();
    let validation = flowgen::validate_flows(&batch.flows, &dialogue_map, &config);

    let doc = FlowValidationDoc {
        seed: args.seed,
        config: config.clone(),
        inputs: input_hashes(&[("dials", &dials_path), ("docs", &docs_path)])?,
        stats: batch.stats.clone(),
        skipped_dialogues: segmentation
            .skipped
            .iter()
            .map(|(id, err)| format!("{id}: {err}"))
            .collect(),
        validation: validation.clone(),
    };
    let mut bytes = serde_json::to_vec_pretty(&doc)?;
    bytes.push(b'\n');
    fsutil::write_atomic(&args.report, &bytes)?;

    println!(
        "flows: {} emitted ({} of {} segments used), {} short and {} oversize discarded -> {}",
        batch.stats.flows_emitted,
        batch.stats.segments_used,
        batch.stats.segments_total,
        batch.stats.discarded_short,
        batch.stats.discarded_oversize,
        args.output.display()
    );
    if !segmentation.skipped.is_empty() {
        eprintln!(
            "warning: {} dialogues skipped during segmentation",
            segmentation.skipped.len()
        );
    }
    if !validation.is_clean() {
        bail!(
            "{} rule violations found; see {}",
            validation.violations.len(),
            args.report.display()
        );
    }
    println!(
        "validation: clean ({} flows checked)",
        validation.flows_checked
    );
    Ok(())
}

#[derive(Serialize)]
struct SweepRow {
    k1: f64,
    b: f64,
    recall_at: BTreeMap<usize, f64>,
}

fn cmd_sweep(args: SweepArgs, resolve: &Resolver) -> anyhow::Result<()> {
    let passages_path = resolve(&args.passages);
    let queries_path = resolve(&args.queries);
    let docs_path = resolve(&args.docs);
    let passages: Vec<Passage> = jsonl::read_jsonl(&passages_path)?;
    let queries: Vec<DialQuery> = jsonl::read_jsonl(&queries_path)?;
    let docs: BTreeMap<String, SourceDocument> =
        adapters::load_documents(&docs_path, InputFormat::Auto)?
            .into_iter()
            .map(|d| (d.doc_id.clone(), d))
            .collect();
    let catalog = metrics::PassageCatalog::new(&passages);

    let mut positives: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
    for query in &queries {
        positives.insert(
            query.query_id.clone(),
            metrics::positive_passages(query, &docs, &catalog)?,
        );
    }

    let k = nz(args.k, "--k")?;
    let budget = nz(args.max_query_tokens, "--max-query-tokens")?;
    let ks = args
        .ks
        .iter()
        .map(|&v| nz(v, "--ks"))
        .collect::<anyhow::Result<Vec<_>>>()?;

    let mut rows = Vec::new();
    println!(
        "{:>5} {:>5}  {}",
        "k1",
        "b",
        args.ks
            .iter()
            .map(|k| format!("{:>6}", format!("@{k}")))
            .collect::<Vec<_>>()
            .join(" ")
    );
    for &k1 in &args.k1_grid {
        for &b in &args.b_grid {
            let index = build_bm25(&passages, Bm25Params { k1, b })?;
            let results = retrieve::retrieve_all_bm25(
                &index,
                &queries,
                k,
                |q| dialogue::render_query(q, budget, &args.separator),
                HitSource::FullQuery,
            );
            let run = RetrievalRun {
                config: RunConfig {
                    retriever: "bm25".into(),
                    segmentation: "sweep".into(),
                    rerank: "none".into(),
                    k: args.k,
                },
                results,
            };
            let mut recall_at = BTreeMap::new();
            for &kk in &ks {
                recall_at.insert(kk.get(), metrics::recall_at_k(&run, &positives, kk)?);
            }
            let cells: Vec<String> = ks
                .iter()
                .map(|kk| format!("{:>6.1}", recall_at[&kk.get()] * 100.0))
                .collect();
            println!("{k1:>5.2} {b:>5.2}  {}", cells.join(" "));
            rows.push(SweepRow { k1, b, recall_at });
        }
    }

    if let Some(output) = &args.output {
        let doc = serde_json::json!({
            "inputs": input_hashes(&[
                ("passages", &passages_path),
                ("queries", &queries_path),
                ("docs", &docs_path),
            ])?,
            "k": args.k,
            "rows": rows,
        });
        let mut bytes = serde_json::to_vec_pretty(&doc)?;
        bytes.push(b'\n');
        fsutil::write_atomic(output, &bytes)?;
        println!("sweep -> {}", output.display());
    }
    Ok(())
}

fn cmd_report(args: ReportArgs, resolve: &Resolver) -> anyhow::Result<()> {
    let mut docs = Vec::new();
    for input in &args.inputs {
        docs.push(load_report(&resolve(input))?);
    }
    let table = render_table(&docs);
    match &args.output {
        Some(path) => {
            fsutil::write_atomic(path, table.as_bytes())?;
            println!("table -> {}", path.display());
        }
        None => print!("{table}"),
    }
    Ok(())
}

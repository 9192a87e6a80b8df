use std::collections::{BTreeSet, HashMap};
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;

use super::config::ConfigFile;
use super::{CliError, Command, CorpusArgs, SampleN, SearchMode};
use crate::corpus::{self, Corpus, DocumentKind, LinearizedRecord, QueryRecord};
use crate::dataset::{self, NegativeMiner, DEFAULT_MAX_CANDIDATES};
use crate::dense::{self, EmbeddingMatrix, SimilarityMetric};
use crate::error::Error;
use crate::eval::{self, EvalReport, MetricSource, RunRecord, DEFAULT_KS, DEFAULT_SAMPLE_N};
use crate::io::{write_atomic, write_jsonl};
use crate::retrieval::RetrievalHit;
use crate::sparse::{Bm25Index, Bm25Params};
use crate::text;

const DEFAULT_DIM: usize = 256;
const DEFAULT_K: usize = 100;
const DEFAULT_SAMPLE_SIZE: usize = 500_000;

type CmdResult = Result<(), CliError>;

pub(super) fn dispatch(command: Command, cfg: &ConfigFile) -> CmdResult {
    match command {
        Command::Ingest {
            passages,
            tables,
            queries,
            out,
        } => ingest(passages, tables, queries, &out),
        Command::Linearize { corpus, out } => linearize(&corpus, &out),
        Command::IndexSparse { corpus, k1, b, out } => {
            let defaults = Bm25Params::default();
            let params = Bm25Params {
                k1: cfg.resolve(k1, "k1", defaults.k1)?,
                b: cfg.resolve(b, "b", defaults.b)?,
            };
            params
                .validate()
                .map_err(|e| CliError::Usage(e.to_string()))?;
            index_sparse(&corpus, params, &out)
        }
        Command::EmbedHash {
            corpus,
            queries,
            dim,
            seed,
            out,
        } => {
            let dim = cfg.resolve(dim, "dim", DEFAULT_DIM)?;
            let seed = cfg.resolve(seed, "seed", 0)?;
            if dim < dense::MIN_HASH_DIM {
                return Err(CliError::Usage(format!(
                    "--dim must be at least {}",
                    dense::MIN_HASH_DIM
                )));
            }
            embed_hash(&corpus, queries.as_deref(), dim, seed, &out)
        }
        Command::IndexDense {
            embeddings,
            corpus,
            metric,
            out,
        } => {
            let metric = cfg.resolve(metric, "metric", SimilarityMetric::Dot)?;
            index_dense(&embeddings, &corpus, metric, &out)
        }
        Command::Search {
            mode,
            index,
            k,
            metric,
            query,
            queries,
            query_embeddings,
            seed,
            out,
        } => {
            let mode = match mode {
                Some(m) => m,
                None => match cfg.resolve_opt::<String>(None, "mode")?.as_deref() {
                    None | Some("sparse") => SearchMode::Sparse,
                    Some("dense") => SearchMode::Dense,
                    Some(other) => return Err(CliError::Usage(format!("unknown mode `{other}`"))),
                },
            };
            let k = cfg.resolve(k, "k", DEFAULT_K)?;
            if k == 0 {
                return Err(CliError::Usage("--k must be at least 1".into()));
            }
            let search = SearchSpec {
                mode,
                k,
                metric: cfg.resolve(metric, "metric", SimilarityMetric::Dot)?,
                seed: cfg.resolve(seed, "seed", 0)?,
            };
            if mode == SearchMode::Sparse && query_embeddings.is_some() {
                return Err(CliError::Usage(
                    "--query-embeddings only applies to --mode dense".into(),
                ));
            }
            search_cmd(
                &search,
                &index,
                query,
                queries.as_deref(),
                query_embeddings.as_deref(),
                &out,
            )
        }
        Command::MineNegatives {
            index,
            corpus,
            queries,
            max_candidates,
            out,
        } => {
            let max = cfg.resolve(max_candidates, "max-candidates", DEFAULT_MAX_CANDIDATES)?;
            if max == 0 {
                return Err(CliError::Usage(
                    "--max-candidates must be at least 1".into(),
                ));
            }
            mine_negatives(&index, &corpus, &queries, max, &out)
        }
        Command::BuildMixed {
            corpus,
            queries,
            sample_size,
            seed,
            out_passages,
            out_tables,
        } => {
            let sample_size = cfg.resolve(sample_size, "sample-size", DEFAULT_SAMPLE_SIZE)?;
            let seed = cfg.resolve(seed, "seed", 0)?;
            build_mixed(
                &corpus,
                &queries,
                sample_size,
                seed,
                &out_passages,
                &out_tables,
            )
        }
        Command::FilterContext {
            queries,
            labels,
            out,
        } => {
            let qs = corpus::ingest_queries(&queries)?;
            let kept = dataset::apply_context_filter(&qs, &labels)?;
            write_atomic(&out, |w| write_jsonl(w, &kept))?;
            println!(
                "kept {} of {} queries -> {}",
                kept.len(),
                qs.len(),
                out.display()
            );
            Ok(())
        }
        Command::Eval {
            run,
            queries,
            corpus,
            ks,
            sample_n,
            seed,
            source,
            stratify_k,
            edges,
            out,
            plot_data,
        } => {
            let ks = cfg.resolve_list(ks, "ks", DEFAULT_KS.to_vec())?;
            let sample_n = cfg
                .resolve(sample_n, "sample-n", SampleN(Some(DEFAULT_SAMPLE_N)))?
                .0;
            let config = eval::EvalConfig {
                ks,
                sample_n,
                seed: cfg.resolve(seed, "seed", 0)?,
                metric_source: cfg.resolve(source, "source", MetricSource::Sparse)?,
            };
            config
                .validate()
                .map_err(|e| CliError::Usage(format!("--ks: {e}")))?;
            let stratify_k = cfg.resolve_opt(stratify_k, "stratify-k")?;
            let edges = cfg.resolve_list(edges, "edges", text::DEFAULT_EDGES.to_vec())?;
            text::validate_edges(&edges).map_err(|e| CliError::Usage(e.to_string()))?;
            if plot_data.is_some() && stratify_k.is_none() {
                return Err(CliError::Usage("--plot-data needs --stratify-k".into()));
            }
            if stratify_k == Some(0) {
                return Err(CliError::Usage("--stratify-k must be at least 1".into()));
            }
            eval_cmd(
                &run,
                &queries,
                &corpus,
                &config,
                stratify_k,
                &edges,
                &out,
                plot_data.as_deref(),
            )
        }
        Command::OverlapReport {
            queries,
            corpus,
            edges,
            out,
        } => {
            let edges = cfg.resolve_list(edges, "edges", text::DEFAULT_EDGES.to_vec())?;
            text::validate_edges(&edges).map_err(|e| CliError::Usage(e.to_string()))?;
            let qs = corpus::ingest_queries(&queries)?;
            let corpus = load_corpus(&corpus)?;
            let scores = eval::overlap_scores(&qs, &corpus)?;
            let report = text::bucketize(&scores, &edges)?;
            write_json(&out, &report)?;
            let full = scores.iter().filter(|(_, s)| *s == 100.0).count();
            println!(
                "{} queries scored, {} with complete overlap -> {}",
                scores.len(),
                full,
                out.display()
            );
            Ok(())
        }
    }
}

fn load_corpus(args: &CorpusArgs) -> Result<Corpus, Error> {
    let mut passages = Vec::new();
    for p in &args.passages {
        passages.extend(corpus::ingest_passages(p)?);
    }
    let mut tables = Vec::new();
    for t in &args.tables {
        tables.extend(corpus::ingest_tables(t)?.tables);
    }
    Corpus::from_parts(passages, tables)
}

fn require_corpus(args: &CorpusArgs) -> Result<Corpus, CliError> {
    if args.passages.is_empty() && args.tables.is_empty() {
        return Err(CliError::Usage(
            "at least one of --passages / --tables is required".into(),
        ));
    }
    Ok(load_corpus(args)?)
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<(), Error> {
    write_atomic(path, |w| {
        serde_json::to_writer_pretty(&mut *w, value)?;
        w.write_all(b"\n")
    })
}

fn ingest(
    passages: Option<std::path::PathBuf>,
    tables: Option<std::path::PathBuf>,
    queries: Option<std::path::PathBuf>,
    out: &Path,
) -> CmdResult {
    if let Some(p) = passages {
        let ps = corpus::ingest_passages(&p)?;
        write_atomic(out, |w| write_jsonl(w, &ps))?;
        println!("{} passages -> {}", ps.len(), out.display());
    } else if let Some(t) = tables {
        let load = corpus::ingest_tables(&t)?;
        write_atomic(out, |w| write_jsonl(w, &load.tables))?;
        println!(
            "{} tables ({} rows truncated) -> {}",
            load.tables.len(),
            load.truncated_rows,
            out.display()
        );
    } else if let Some(q) = queries {
        let qs = corpus::ingest_queries(&q)?;
        write_atomic(out, |w| write_jsonl(w, &qs))?;
        println!("{} queries -> {}", qs.len(), out.display());
    }
    Ok(())
}

fn linearize(args: &CorpusArgs, out: &Path) -> CmdResult {
    let corpus = require_corpus(args)?;
    let records: Vec<LinearizedRecord> = corpus.docs().iter().map(LinearizedRecord::from).collect();
    write_atomic(out, |w| write_jsonl(w, &records))?;
    println!(
        "{} documents linearized -> {}",
        records.len(),
        out.display()
    );
    Ok(())
}

fn index_sparse(args: &CorpusArgs, params: Bm25Params, out: &Path) -> CmdResult {
    let corpus = require_corpus(args)?;
    let index = Bm25Index::build(corpus.docs(), params)?;
    index.save(out)?;
    println!(
        "indexed {} documents, {} terms, avgdl {:.2} -> {}",
        index.doc_count(),
        index.vocabulary_size(),
        index.avgdl(),
        out.display()
    );
    Ok(())
}

fn embed_hash(
    args: &CorpusArgs,
    queries: Option<&Path>,
    dim: usize,
    seed: u64,
    out: &Path,
) -> CmdResult {
    let matrix = match queries {
        Some(path) => {
            let qs = corpus::ingest_queries(path)?;
            dense::hash_embed_all(
                qs.iter().map(|q| (q.id.as_str(), q.question.as_str())),
                dim,
                seed,
            )?
        }
        None => {
            let corpus = require_corpus(args)?;
            dense::hash_embed_all(corpus.docs().iter().map(|d| (d.id(), d.text())), dim, seed)?
        }
    };
    dense::write_embeddings(&matrix, out)?;
    println!("{} vectors of dim {dim} -> {}", matrix.len(), out.display());
    Ok(())
}

fn index_dense(
    embeddings: &Path,
    args: &CorpusArgs,
    metric: SimilarityMetric,
    out: &Path,
) -> CmdResult {
    let matrix = dense::read_embeddings(embeddings)?;
    if !args.passages.is_empty() || !args.tables.is_empty() {
        let corpus = load_corpus(args)?;
        let have: BTreeSet<&str> = matrix.ids().iter().map(String::as_str).collect();
        if let Some(missing) = corpus.docs().iter().find(|d| !have.contains(d.id())) {
            return Err(Error::CorpusMismatch(format!(
                "document `{}` has no vector",
                missing.id()
            ))
            .into());
        }
    }
    if metric == SimilarityMetric::Cosine {
        if let Some((row, (id, _))) = matrix
            .rows()
            .enumerate()
            .find(|(_, (_, v))| dense::l2_norm(v) == 0.0)
        {
            return Err(Error::ZeroVector(format!(
                "row {row} (`{id}`) cannot be used with cosine"
            ))
            .into());
        }
    }
    dense::write_embeddings(&matrix, out)?;
    println!(
        "dense index: {} vectors of dim {} -> {}",
        matrix.len(),
        matrix.dim(),
        out.display()
    );
    Ok(())
}

struct SearchSpec {
    mode: SearchMode,
    k: usize,
    metric: SimilarityMetric,
    seed: u64,
}

enum LoadedIndex {
    Sparse(Bm25Index),
    Dense(EmbeddingMatrix),
}

impl LoadedIndex {
    fn search_text(&self, spec: &SearchSpec, text: &str) -> Result<Vec<RetrievalHit>, Error> {
        match self {
            LoadedIndex::Sparse(idx) => idx.search(text, spec.k),
            LoadedIndex::Dense(m) => match dense::hash_embed(text, m.dim(), spec.seed) {
                Ok(v) => dense::dense_search(m, &v, spec.k, spec.metric),
                // text without tokens retrieves nothing
                Err(Error::ZeroVector(_)) => Ok(Vec::new()),
                Err(e) => Err(e),
            },
        }
    }
}

fn search_cmd(
    spec: &SearchSpec,
    index_path: &Path,
    query: Option<String>,
    queries: Option<&Path>,
    query_embeddings: Option<&Path>,
    out: &Path,
) -> CmdResult {
    let index = match spec.mode {
        SearchMode::Sparse => LoadedIndex::Sparse(Bm25Index::load(index_path)?),
        SearchMode::Dense => LoadedIndex::Dense(dense::read_embeddings(index_path)?),
    };
    if let Some(text) = query {
        if query_embeddings.is_some() {
            return Err(CliError::Usage("--query-embeddings needs --queries".into()));
        }
        let hits = index.search_text(spec, &text)?;
        write_atomic(out, |w| write_jsonl(w, &hits))?;
        println!("{} hits -> {}", hits.len(), out.display());
        return Ok(());
    }

    let qs = corpus::ingest_queries(queries.expect("clap enforces one query input"))?;
    let vectors = query_embeddings.map(dense::read_embeddings).transpose()?;
    let positions: HashMap<&str, usize> = vectors
        .as_ref()
        .map(|m| {
            m.ids()
                .iter()
                .enumerate()
                .map(|(i, id)| (id.as_str(), i))
                .collect()
        })
        .unwrap_or_default();

    let runs: Vec<RunRecord> = qs
        .par_iter()
        .map(|q| {
            let hits = match (&index, &vectors) {
                (LoadedIndex::Dense(m), Some(qv)) => {
                    let row = positions.get(q.id.as_str()).ok_or_else(|| {
                        Error::UnknownDocument(format!("query vector `{}`", q.id))
                    })?;
                    dense::dense_search(m, qv.row(*row), spec.k, spec.metric)?
                }
                _ => index.search_text(spec, &q.question)?,
            };
            Ok(RunRecord::new(q.id.clone(), &hits))
        })
        .collect::<Result<_, Error>>()?;
    write_atomic(out, |w| write_jsonl(w, &runs))?;
    println!("{} queries searched -> {}", runs.len(), out.display());
    Ok(())
}

fn mine_negatives(
    index: &Path,
    args: &CorpusArgs,
    queries: &Path,
    max: usize,
    out: &Path,
) -> CmdResult {
    let index = Bm25Index::load(index)?;
    let corpus = require_corpus(args)?;
    let qs = corpus::ingest_queries(queries)?;
    let miner = NegativeMiner::new(&index, &corpus, max)?;
    let outcome = miner.mine_all(&qs)?;
    write_atomic(out, |w| write_jsonl(w, &outcome.samples))?;
    println!(
        "{} samples, {} without negative, {} without gold document -> {}",
        outcome.samples.len(),
        outcome.no_negative,
        outcome.no_positive,
        out.display()
    );
    Ok(())
}

fn build_mixed(
    args: &CorpusArgs,
    queries: &[std::path::PathBuf],
    sample_size: usize,
    seed: u64,
    out_passages: &Path,
    out_tables: &Path,
) -> CmdResult {
    let mut passages = Vec::new();
    for p in &args.passages {
        passages.extend(corpus::ingest_passages(p)?);
    }
    let mut tables = Vec::new();
    for t in &args.tables {
        tables.extend(corpus::ingest_tables(t)?.tables);
    }
    let mut required = BTreeSet::new();
    for q in queries {
        for rec in corpus::ingest_queries(q)? {
            required.extend(rec.gold_ids);
        }
    }
    let docs = dataset::build_mixed_corpus(&passages, &tables, sample_size, &required, seed)?;
    let mut out_p = Vec::new();
    let mut out_t = Vec::new();
    for d in &docs {
        match d.kind() {
            DocumentKind::Passage(p) => out_p.push(p),
            DocumentKind::Table(t) => out_t.push(t),
        }
    }
    write_atomic(out_passages, |w| write_jsonl(w, &out_p))?;
    write_atomic(out_tables, |w| write_jsonl(w, &out_t))?;
    println!(
        "mixed corpus: {} passages, {} tables ({} required ids)",
        out_p.len(),
        out_t.len(),
        required.len()
    );
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn eval_cmd(
    run: &Path,
    queries: &Path,
    args: &CorpusArgs,
    config: &eval::EvalConfig,
    stratify_k: Option<usize>,
    edges: &[f64],
    out: &Path,
    plot_data: Option<&Path>,
) -> CmdResult {
    let runs = eval::read_run_file(run)?;
    let all: Vec<QueryRecord> = corpus::ingest_queries(queries)?;
    let sampled = eval::sample_per_dataset(&all, config.sample_n, config.seed);
    let corpus = load_corpus(args)?;
    let recall = eval::recall_at_k(&runs, &sampled, &corpus, &config.ks)?;
    let stratified = stratify_k
        .map(|k| eval::stratified_recall(&runs, &sampled, &corpus, k, edges))
        .transpose()?;
    let report = EvalReport {
        source: config.metric_source,
        seed: config.seed,
        sample_n: config.sample_n,
        recall,
        stratified,
    };
    write_json(out, &report)?;
    if let (Some(path), Some(s)) = (plot_data, &report.stratified) {
        let data = s.plot_data();
        write_atomic(path, |w| w.write_all(data.as_bytes()))?;
    }
    print!("{report}");
    println!("report -> {}", out.display());
    Ok(())
}

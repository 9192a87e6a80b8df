//! Recall@k evaluation under the two correctness protocols, query sampling,
//! and overlap-stratified recall.
//!
//! A retrieved document is correct for an `answer_string` query when its
//! linearized text contains one of the answers (lowercased, whitespace runs
//! collapsed on both sides). For a `gold_id` query only the annotated gold
//! documents count, even if another document happens to contain the answer.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::io::BufRead;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, Dataset, Document, Protocol, QueryRecord};
use crate::error::{Error, Result};
use crate::retrieval::RetrievalHit;
use crate::text::{self, OverlapReport};

pub const DEFAULT_KS: [usize; 3] = [10, 20, 100];
pub const DEFAULT_SAMPLE_N: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MetricSource {
    #[default]
    Sparse,
    Dense,
}

impl std::str::FromStr for MetricSource {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "sparse" => Ok(MetricSource::Sparse),
            "dense" => Ok(MetricSource::Dense),
            _ => Err(format!("unknown source `{s}` (expected sparse or dense)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    pub ks: Vec<usize>,
    /// Questions sampled per dataset; `None` evaluates everything.
    pub sample_n: Option<usize>,
    pub seed: u64,
    pub metric_source: MetricSource,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            ks: DEFAULT_KS.to_vec(),
            sample_n: Some(DEFAULT_SAMPLE_N),
            seed: 0,
            metric_source: MetricSource::Sparse,
        }
    }
}

impl EvalConfig {
    pub fn validate(&self) -> Result<()> {
        validate_ks(&self.ks)
    }
}

fn validate_ks(ks: &[usize]) -> Result<()> {
    if ks.is_empty() || ks[0] == 0 {
        return Err(Error::InvalidK);
    }
    if ks.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidParams("ks must be strictly ascending".into()));
    }
    Ok(())
}

/// Uniform sample of `n` queries without replacement, returned in their
/// original order. `None` keeps every query.
pub fn sample_queries(
    queries: &[QueryRecord],
    n: Option<usize>,
    seed: u64,
) -> Result<Vec<QueryRecord>> {
    let Some(n) = n else {
        return Ok(queries.to_vec());
    };
    if n > queries.len() {
        return Err(Error::SampleTooLarge {
            requested: n,
            available: queries.len(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked = rand::seq::index::sample(&mut rng, queries.len(), n).into_vec();
    picked.sort_unstable();
    Ok(picked.into_iter().map(|i| queries[i].clone()).collect())
}

/// Samples up to `n` queries from each dataset separately. Datasets with fewer
/// than `n` queries are kept whole. Output keeps the original order.
pub fn sample_per_dataset(
    queries: &[QueryRecord],
    n: Option<usize>,
    seed: u64,
) -> Vec<QueryRecord> {
    let Some(n) = n else {
        return queries.to_vec();
    };
    let mut keep = vec![false; queries.len()];
    for (d, ds) in Dataset::ALL.iter().enumerate() {
        let members: Vec<usize> = (0..queries.len())
            .filter(|&i| queries[i].dataset == *ds)
            .collect();
        if members.len() <= n {
            members.iter().for_each(|&i| keep[i] = true);
            continue;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(d as u64));
        for j in rand::seq::index::sample(&mut rng, members.len(), n) {
            keep[members[j]] = true;
        }
    }
    queries
        .iter()
        .zip(keep)
        .filter(|(_, k)| *k)
        .map(|(q, _)| q.clone())
        .collect()
}

/// Lowercases and collapses every whitespace run to one space.
pub fn normalize_answer(s: &str) -> String {
    s.split_whitespace()
        .map(str::to_lowercase)
        .collect::<Vec<_>>()
        .join(" ")
}

/// Whether `text` contains any non-empty answer under answer normalization.
pub fn contains_answer(text: &str, answers: &[String]) -> bool {
    let haystack = normalize_answer(text);
    answers
        .iter()
        .map(|a| normalize_answer(a))
        .any(|a| !a.is_empty() && haystack.contains(&a))
}

pub fn answer_match(doc: &Document, query: &QueryRecord) -> Result<bool> {
    expect_protocol(query, Protocol::AnswerString)?;
    Ok(contains_answer(doc.text(), &query.answers))
}

pub fn gold_match(doc_id: &str, query: &QueryRecord) -> Result<bool> {
    expect_protocol(query, Protocol::GoldId)?;
    Ok(query.gold_ids.contains(doc_id))
}

fn expect_protocol(query: &QueryRecord, expected: Protocol) -> Result<()> {
    if query.protocol != expected {
        return Err(Error::WrongProtocol {
            query: query.id.clone(),
            expected: expected.as_str(),
            actual: query.protocol.as_str(),
        });
    }
    Ok(())
}

/// Correctness of one retrieved document under the query's own protocol.
pub fn is_correct(doc_id: &str, query: &QueryRecord, corpus: &Corpus) -> Result<bool> {
    match query.protocol {
        Protocol::GoldId => gold_match(doc_id, query),
        Protocol::AnswerString => {
            let doc = corpus
                .get(doc_id)
                .ok_or_else(|| Error::UnknownDocument(doc_id.to_owned()))?;
            answer_match(doc, query)
        }
    }
}

/// Rank of the first correct hit, if any.
pub fn first_correct_rank(
    hits: &[RetrievalHit],
    query: &QueryRecord,
    corpus: &Corpus,
) -> Result<Option<usize>> {
    for h in hits {
        if is_correct(&h.doc_id, query, corpus)? {
            return Ok(Some(h.rank));
        }
    }
    Ok(None)
}

/// Retrieval output keyed by query id.
pub type Runs = HashMap<String, Vec<RetrievalHit>>;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunHit {
    pub doc_id: String,
    pub score: f64,
}

/// One line of a run file; hits are in rank order.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunRecord {
    pub query_id: String,
    pub hits: Vec<RunHit>,
}

impl RunRecord {
    pub fn new(query_id: impl Into<String>, hits: &[RetrievalHit]) -> Self {
        RunRecord {
            query_id: query_id.into(),
            hits: hits
                .iter()
                .map(|h| RunHit {
                    doc_id: h.doc_id.clone(),
                    score: h.score,
                })
                .collect(),
        }
    }

    pub fn into_hits(self) -> Vec<RetrievalHit> {
        self.hits
            .into_iter()
            .enumerate()
            .map(|(i, h)| RetrievalHit {
                doc_id: h.doc_id,
                score: h.score,
                rank: i + 1,
            })
            .collect()
    }
}

pub fn read_runs<R: BufRead>(reader: R) -> Result<Runs> {
    let mut runs = Runs::new();
    for (_, rec) in crate::io::read_jsonl::<RunRecord, _>(reader)? {
        let id = rec.query_id.clone();
        if runs.insert(id.clone(), rec.into_hits()).is_some() {
            return Err(Error::DuplicateId(id));
        }
    }
    Ok(runs)
}

pub fn read_run_file(path: &Path) -> Result<Runs> {
    read_runs(crate::io::open(path)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecallRow {
    /// Dataset name, or `"all"` for the union.
    pub dataset: String,
    pub queries: usize,
    /// Queries with a correct hit within the top k, keyed by k.
    pub correct: BTreeMap<usize, usize>,
    pub recall: BTreeMap<usize, f64>,
}

impl RecallRow {
    fn from_ranks(dataset: String, ks: &[usize], ranks: &[Option<usize>]) -> Self {
        let mut correct = BTreeMap::new();
        let mut recall = BTreeMap::new();
        for &k in ks {
            let c = ranks.iter().filter(|r| r.is_some_and(|r| r <= k)).count();
            correct.insert(k, c);
            recall.insert(
                k,
                if ranks.is_empty() {
                    0.0
                } else {
                    c as f64 / ranks.len() as f64
                },
            );
        }
        RecallRow {
            dataset,
            queries: ranks.len(),
            correct,
            recall,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecallTable {
    pub ks: Vec<usize>,
    pub rows: Vec<RecallRow>,
    pub overall: RecallRow,
}

impl RecallTable {
    pub fn row(&self, dataset: Dataset) -> Option<&RecallRow> {
        self.rows.iter().find(|r| r.dataset == dataset.as_str())
    }
}

impl fmt::Display for RecallTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:<12} {:>8}", "dataset", "queries")?;
        for k in &self.ks {
            write!(f, " {:>10}", format!("recall@{k}"))?;
        }
        writeln!(f)?;
        for row in self.rows.iter().chain(std::iter::once(&self.overall)) {
            write!(f, "{:<12} {:>8}", row.dataset, row.queries)?;
            for k in &self.ks {
                write!(f, " {:>10.4}", row.recall[k])?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

fn ranks_for(runs: &Runs, queries: &[QueryRecord], corpus: &Corpus) -> Result<Vec<Option<usize>>> {
    queries
        .par_iter()
        .map(|q| match runs.get(&q.id) {
            Some(hits) => first_correct_rank(hits, q, corpus),
            None => Ok(None),
        })
        .collect()
}

/// Recall@k per dataset and overall. A query without a run entry counts as
/// an empty hit list.
pub fn recall_at_k(
    runs: &Runs,
    queries: &[QueryRecord],
    corpus: &Corpus,
    ks: &[usize],
) -> Result<RecallTable> {
    validate_ks(ks)?;
    let ranks = ranks_for(runs, queries, corpus)?;
    let mut by_dataset: BTreeMap<Dataset, Vec<Option<usize>>> = BTreeMap::new();
    for (q, r) in queries.iter().zip(&ranks) {
        by_dataset.entry(q.dataset).or_default().push(*r);
    }
    let rows = by_dataset
        .into_iter()
        .map(|(ds, r)| RecallRow::from_ranks(ds.to_string(), ks, &r))
        .collect();
    Ok(RecallTable {
        ks: ks.to_vec(),
        rows,
        overall: RecallRow::from_ranks("all".into(), ks, &ranks),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StratumRecall {
    pub lo: f64,
    pub hi: f64,
    pub queries: usize,
    pub correct: usize,
    /// `None` when the stratum holds no queries.
    pub recall: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StratifiedRecall {
    pub k: usize,
    pub bins: Vec<StratumRecall>,
    pub overlap: OverlapReport,
    /// Queries left out because they have no gold document.
    pub skipped: usize,
}

impl StratifiedRecall {
    /// Tab-separated `lo hi queries recall` lines for external plotting.
    pub fn plot_data(&self) -> String {
        let mut out = String::from("lo\thi\tqueries\trecall\n");
        for b in &self.bins {
            let recall = b
                .recall
                .map_or_else(|| "null".to_owned(), |r| format!("{r:.6}"));
            out.push_str(&format!("{}\t{}\t{}\t{recall}\n", b.lo, b.hi, b.queries));
        }
        out
    }
}

/// Token-set overlap of a question with its gold documents (max over golds).
/// `None` when the query has no gold documents.
pub fn gold_overlap(query: &QueryRecord, corpus: &Corpus) -> Result<Option<f64>> {
    let mut best: Option<f64> = None;
    for id in &query.gold_ids {
        let doc = corpus
            .get(id)
            .ok_or_else(|| Error::UnknownDocument(id.clone()))?;
        let o = text::token_set_overlap(&query.question, doc.text());
        best = Some(best.map_or(o, |b: f64| b.max(o)));
    }
    Ok(best)
}

/// Overlap of every query that has gold documents, in query order.
pub fn overlap_scores(queries: &[QueryRecord], corpus: &Corpus) -> Result<Vec<(String, f64)>> {
    let scored: Vec<Option<(String, f64)>> = queries
        .par_iter()
        .map(|q| Ok(gold_overlap(q, corpus)?.map(|o| (q.id.clone(), o))))
        .collect::<Result<_>>()?;
    Ok(scored.into_iter().flatten().collect())
}

/// Recall@k within overlap strata.
pub fn stratified_recall(
    runs: &Runs,
    queries: &[QueryRecord],
    corpus: &Corpus,
    k: usize,
    edges: &[f64],
) -> Result<StratifiedRecall> {
    if k == 0 {
        return Err(Error::InvalidK);
    }
    let scores = overlap_scores(queries, corpus)?;
    let overlap = text::bucketize(&scores, edges)?;
    let by_id: HashMap<&str, &QueryRecord> = queries.iter().map(|q| (q.id.as_str(), q)).collect();

    let mut bins: Vec<StratumRecall> = overlap
        .bins
        .iter()
        .map(|b| StratumRecall {
            lo: b.lo,
            hi: b.hi,
            queries: 0,
            correct: 0,
            recall: None,
        })
        .collect();
    let ranks: Vec<Option<usize>> = scores
        .par_iter()
        .map(|(id, _)| {
            let q = by_id[id.as_str()];
            match runs.get(id) {
                Some(hits) => first_correct_rank(hits, q, corpus),
                None => Ok(None),
            }
        })
        .collect::<Result<_>>()?;
    for ((_, score), rank) in scores.iter().zip(ranks) {
        let bin = &mut bins[text::bin_index(edges, *score)];
        bin.queries += 1;
        if rank.is_some_and(|r| r <= k) {
            bin.correct += 1;
        }
    }
    for b in &mut bins {
        b.recall = (b.queries > 0).then(|| b.correct as f64 / b.queries as f64);
    }
    Ok(StratifiedRecall {
        k,
        bins,
        skipped: queries.len() - scores.len(),
        overlap,
    })
}

/// Full evaluation report as written by `ttr eval`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub source: MetricSource,
    pub seed: u64,
    pub sample_n: Option<usize>,
    pub recall: RecallTable,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stratified: Option<StratifiedRecall>,
}

impl fmt::Display for EvalReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.recall)?;
        if let Some(s) = &self.stratified {
            writeln!(f, "\nrecall@{} by lexical overlap:", s.k)?;
            for b in &s.bins {
                let r = b
                    .recall
                    .map_or_else(|| "-".to_owned(), |r| format!("{r:.4}"));
                writeln!(
                    f,
                    "  [{:>5.1}, {:>5.1}{} {:>6} queries  {r}",
                    b.lo,
                    b.hi,
                    if b.hi == 100.0 { "]" } else { ")" },
                    b.queries
                )?;
            }
        }
        Ok(())
    }
}

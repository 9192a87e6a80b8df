//! Building the mixed text/table retrieval dataset: corpus sampling,
//! context-independence filtering, and BM25 hard-negative mining.

use std::collections::{BTreeSet, HashMap};
use std::io::BufRead;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, Document, Modality, Passage, QueryRecord, Table};
use crate::error::{Error, Result};
use crate::eval::contains_answer;
use crate::sparse::Bm25Index;

pub const DEFAULT_MAX_CANDIDATES: usize = 100;

/// Every required passage, a seeded uniform sample of the other passages up
/// to `sample_size` passages in total, and all tables.
///
/// Passages keep their input order, followed by the tables in input order.
/// A `sample_size` above the passage count takes every passage.
pub fn build_mixed_corpus(
    passages: &[Passage],
    tables: &[Table],
    sample_size: usize,
    required_ids: &BTreeSet<String>,
    seed: u64,
) -> Result<Vec<Document>> {
    let passage_pos: HashMap<&str, usize> = passages
        .iter()
        .enumerate()
        .map(|(i, p)| (p.id.as_str(), i))
        .collect();
    let table_ids: BTreeSet<&str> = tables.iter().map(|t| t.id.as_str()).collect();

    let mut keep = vec![false; passages.len()];
    let mut required_passages = 0;
    for id in required_ids {
        match passage_pos.get(id.as_str()) {
            Some(&i) => {
                keep[i] = true;
                required_passages += 1;
            }
            None if table_ids.contains(id.as_str()) => {}
            None => return Err(Error::MissingRequiredId(id.clone())),
        }
    }

    let target = sample_size.min(passages.len());
    if required_passages > target {
        return Err(Error::RequiredExceedsSample {
            required: required_passages,
            sample_size,
        });
    }
    let rest: Vec<usize> = (0..passages.len()).filter(|&i| !keep[i]).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for j in rand::seq::index::sample(&mut rng, rest.len(), target - required_passages) {
        keep[rest[j]] = true;
    }

    let mut docs: Vec<Document> = passages
        .iter()
        .zip(&keep)
        .filter(|(_, k)| **k)
        .map(|(p, _)| p.clone().into())
        .collect();
    docs.extend(tables.iter().cloned().map(Document::from));
    Ok(docs)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContextLabel {
    ContextIndependent,
    UnderSpecified,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LabelRecord {
    pub id: String,
    pub label: ContextLabel,
}

pub fn read_labels<R: BufRead>(reader: R) -> Result<HashMap<String, ContextLabel>> {
    let mut out = HashMap::new();
    for (_, rec) in crate::io::read_jsonl::<LabelRecord, _>(reader)? {
        if let Some(prev) = out.insert(rec.id.clone(), rec.label) {
            if prev != rec.label {
                return Err(Error::DuplicateId(rec.id));
            }
        }
    }
    Ok(out)
}

/// Keeps the context-independent queries, in their original order.
pub fn filter_by_labels(
    queries: &[QueryRecord],
    labels: &HashMap<String, ContextLabel>,
) -> Result<Vec<QueryRecord>> {
    let mut out = Vec::new();
    for q in queries {
        match labels.get(&q.id) {
            Some(ContextLabel::ContextIndependent) => out.push(q.clone()),
            Some(ContextLabel::UnderSpecified) => {}
            None => return Err(Error::MissingLabel(q.id.clone())),
        }
    }
    Ok(out)
}

pub fn apply_context_filter(queries: &[QueryRecord], labels: &Path) -> Result<Vec<QueryRecord>> {
    let labels = read_labels(crate::io::open(labels)?)?;
    filter_by_labels(queries, &labels)
}

/// One line of the training-sample export.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainingSample {
    pub question: String,
    pub positive_id: String,
    pub hard_negative_id: String,
    pub positive_modality: Modality,
    pub negative_modality: Modality,
}

/// Mines hard negatives from a BM25 index built over `corpus`, in the same
/// document order.
pub struct NegativeMiner<'a> {
    index: &'a Bm25Index,
    corpus: &'a Corpus,
    max_candidates: usize,
}

impl<'a> NegativeMiner<'a> {
    pub fn new(index: &'a Bm25Index, corpus: &'a Corpus, max_candidates: usize) -> Result<Self> {
        if max_candidates == 0 {
            return Err(Error::InvalidK);
        }
        if index.doc_count() != corpus.len() {
            return Err(Error::CorpusMismatch(format!(
                "index has {} documents, corpus has {}",
                index.doc_count(),
                corpus.len()
            )));
        }
        if let Some((i, d)) = corpus
            .docs()
            .iter()
            .enumerate()
            .find(|(i, d)| index.doc_id(*i) != d.id())
        {
            return Err(Error::CorpusMismatch(format!(
                "ordinal {i}: index has `{}`, corpus has `{}`",
                index.doc_id(i),
                d.id()
            )));
        }
        Ok(NegativeMiner {
            index,
            corpus,
            max_candidates,
        })
    }

    /// Highest-ranked document that is not gold and contains no answer.
    pub fn mine(&self, query: &QueryRecord) -> Result<&'a Document> {
        let hits = self.index.search(&query.question, self.max_candidates)?;
        for hit in &hits {
            if query.gold_ids.contains(&hit.doc_id) {
                continue;
            }
            let ordinal = self
                .index
                .ordinal(&hit.doc_id)
                .expect("hit ids come from the index");
            let doc = &self.corpus.docs()[ordinal];
            if !contains_answer(doc.text(), &query.answers) {
                return Ok(doc);
            }
        }
        Err(Error::NoNegativeFound {
            query: query.id.clone(),
            searched: hits.len(),
        })
    }

    /// Training samples for every query that has a positive in the corpus and
    /// a minable negative; output follows query order.
    pub fn mine_all(&self, queries: &[QueryRecord]) -> Result<MiningOutcome> {
        let results: Vec<Result<Option<TrainingSample>>> = queries
            .par_iter()
            .map(|q| {
                let Some(positive) = q.gold_ids.iter().find_map(|id| self.corpus.get(id)) else {
                    return Ok(None);
                };
                match self.mine(q) {
                    Ok(neg) => Ok(Some(TrainingSample {
                        question: q.question.clone(),
                        positive_id: positive.id().to_owned(),
                        hard_negative_id: neg.id().to_owned(),
                        positive_modality: positive.modality(),
                        negative_modality: neg.modality(),
                    })),
                    Err(Error::NoNegativeFound { .. }) => Ok(None),
                    Err(e) => Err(e),
                }
            })
            .collect();

        let mut outcome = MiningOutcome::default();
        for (q, r) in queries.iter().zip(results) {
            match r? {
                Some(s) => outcome.samples.push(s),
                None if q.gold_ids.iter().any(|id| self.corpus.get(id).is_some()) => {
                    outcome.no_negative += 1
                }
                None => outcome.no_positive += 1,
            }
        }
        if outcome.no_negative > 0 {
            log::info!(
                "{} queries dropped: no hard negative found",
                outcome.no_negative
            );
        }
        if outcome.no_positive > 0 {
            log::info!(
                "{} queries dropped: no gold document in corpus",
                outcome.no_positive
            );
        }
        Ok(outcome)
    }
}

#[derive(Debug, Clone, Default)]
pub struct MiningOutcome {
    pub samples: Vec<TrainingSample>,
    pub no_negative: usize,
    pub no_positive: usize,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Dataset, Protocol};
    use crate::sparse::Bm25Params;

    fn passages(n: usize) -> Vec<Passage> {
        (0..n)
            .map(|i| Passage {
                id: format!("text:p{i}"),
                title: String::new(),
                body: format!("passage number {i}"),
            })
            .collect()
    }

    fn tables(n: usize) -> Vec<Table> {
        (0..n)
            .map(|i| Table {
                id: format!("table:t{i}"),
                page_title: format!("page {i}"),
                section_title: String::new(),
                caption: String::new(),
                header: vec!["h".into()],
                rows: vec![],
            })
            .collect()
    }

    #[test]
    fn mixed_corpus_contract() {
        let ps = passages(10);
        let ts = tables(5);
        let req: BTreeSet<String> = ["text:p1".to_owned()].into();
        let docs = build_mixed_corpus(&ps, &ts, 4, &req, 3).unwrap();
        let n_text = docs
            .iter()
            .filter(|d| d.modality() == Modality::Text)
            .count();
        assert_eq!(n_text, 4);
        assert_eq!(docs.len(), 9);
        assert!(docs.iter().any(|d| d.id() == "text:p1"));
        assert_eq!(docs, build_mixed_corpus(&ps, &ts, 4, &req, 3).unwrap());
    }

    #[test]
    fn full_sample_takes_everything() {
        let ps = passages(6);
        let docs = build_mixed_corpus(&ps, &tables(1), 6, &BTreeSet::new(), 0).unwrap();
        assert_eq!(docs.len(), 7);
        let docs = build_mixed_corpus(&ps, &[], 60, &BTreeSet::new(), 0).unwrap();
        assert_eq!(docs.len(), 6);
    }

    #[test]
    fn missing_required_id_named() {
        let req: BTreeSet<String> = ["text:nope".to_owned()].into();
        let err = build_mixed_corpus(&passages(3), &[], 2, &req, 0).unwrap_err();
        assert!(matches!(err, Error::MissingRequiredId(ref id) if id == "text:nope"));
        // tables are always included, so a required table id is fine
        let req: BTreeSet<String> = ["table:t0".to_owned()].into();
        assert!(build_mixed_corpus(&passages(3), &tables(1), 2, &req, 0).is_ok());
    }

    fn q(id: &str) -> QueryRecord {
        QueryRecord {
            id: id.into(),
            question: "?".into(),
            dataset: Dataset::WikiSQL,
            gold_ids: ["table:t".to_owned()].into(),
            answers: vec![],
            protocol: Protocol::GoldId,
            hard_negative_ids: None,
        }
    }

    #[test]
    fn context_filter() {
        let qs = vec![q("a"), q("b"), q("c")];
        let labels = "{\"id\":\"a\",\"label\":\"context_independent\"}\n\
                      {\"id\":\"b\",\"label\":\"under_specified\"}\n\
                      {\"id\":\"c\",\"label\":\"context_independent\"}\n";
        let labels = read_labels(labels.as_bytes()).unwrap();
        let kept = filter_by_labels(&qs, &labels).unwrap();
        assert_eq!(
            kept.iter().map(|q| q.id.as_str()).collect::<Vec<_>>(),
            ["a", "c"]
        );

        let all_under: HashMap<String, ContextLabel> = qs
            .iter()
            .map(|q| (q.id.clone(), ContextLabel::UnderSpecified))
            .collect();
        assert!(filter_by_labels(&qs, &all_under).unwrap().is_empty());

        let partial: HashMap<String, ContextLabel> =
            [("a".to_owned(), ContextLabel::ContextIndependent)].into();
        assert!(matches!(
            filter_by_labels(&qs, &partial),
            Err(Error::MissingLabel(ref id)) if id == "b"
        ));
    }

    #[test]
    fn miner_rejects_misaligned_corpus() {
        let a: Vec<Document> = passages(3).into_iter().map(Document::from).collect();
        let idx = Bm25Index::build(&a, Bm25Params::default()).unwrap();
        let mut b = a.clone();
        b.swap(0, 1);
        let corpus = Corpus::new(b).unwrap();
        assert!(matches!(
            NegativeMiner::new(&idx, &corpus, 10),
            Err(Error::CorpusMismatch(_))
        ));
        let corpus = Corpus::new(a).unwrap();
        assert!(NegativeMiner::new(&idx, &corpus, 0).is_err());
    }
}

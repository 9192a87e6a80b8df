//! BM25 inverted index over linearized documents.
//!
//! Scoring uses the Lucene idf, `ln(1 + (N - df + 0.5) / (df + 0.5))`, which
//! is positive for every term, so a document matching any query term always
//! outranks one matching none. Stopwords stay in the index; idf takes care of
//! them.
//!
//! # On-disk layout (`BMI1`)
//!
//! All integers and floats are little-endian, no padding:
//!
//! ```text
//! "BMI1"            4 bytes magic
//! version           u32 (= 1)
//! k1, b             f64, f64
//! doc_count         u64
//!   id_len, id      u32, UTF-8 bytes          (doc_count times, ordinal order)
//! doc_lengths       u32 x doc_count
//! term_count        u64
//!   term_len, term  u32, UTF-8 bytes          (term_count times, ascending)
//!   posting_count   u32
//!   (doc, tf)       u32, u32 x posting_count  (ascending doc ordinal)
//! ```

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use rayon::prelude::*;

use crate::binio::ByteReader;
use crate::corpus::Document;
use crate::error::{Error, Result};
use crate::retrieval::{RetrievalHit, TopK};
use crate::text::{token_stream, tokenize, TokenSet};

pub const MAGIC: &[u8; 4] = b"BMI1";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bm25Params {
    pub k1: f64,
    pub b: f64,
}

impl Default for Bm25Params {
    fn default() -> Self {
        Bm25Params { k1: 1.2, b: 0.75 }
    }
}

impl Bm25Params {
    pub fn new(k1: f64, b: f64) -> Result<Self> {
        let p = Bm25Params { k1, b };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.k1.is_finite() && self.k1 > 0.0) {
            return Err(Error::InvalidParams(format!(
                "k1 must be > 0, got {}",
                self.k1
            )));
        }
        if !(0.0..=1.0).contains(&self.b) {
            return Err(Error::InvalidParams(format!(
                "b must be in [0, 1], got {}",
                self.b
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Posting {
    pub doc: u32,
    pub tf: u32,
}

#[derive(Debug, Clone)]
pub struct Bm25Index {
    params: Bm25Params,
    doc_ids: Vec<String>,
    doc_lengths: Vec<u32>,
    avgdl: f64,
    terms: Vec<String>,
    postings: Vec<Vec<Posting>>,
    term_lookup: HashMap<String, u32>,
    doc_lookup: HashMap<String, u32>,
}

/// Lucene-variant inverse document frequency.
pub fn idf(doc_count: usize, df: usize) -> f64 {
    let n = doc_count as f64;
    let df = df as f64;
    (1.0 + (n - df + 0.5) / (df + 0.5)).ln()
}

impl Bm25Index {
    /// Indexes `docs` in order; ordinal `i` is `docs[i]`.
    pub fn build(docs: &[Document], params: Bm25Params) -> Result<Self> {
        params.validate()?;
        if docs.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        if docs.len() > u32::MAX as usize {
            return Err(Error::InvalidParams("corpus exceeds u32 ordinals".into()));
        }

        // Per-document term counts in parallel; merged below in ordinal order.
        let per_doc: Vec<(u32, BTreeMap<String, u32>)> = docs
            .par_iter()
            .map(|d| {
                let mut counts = BTreeMap::new();
                let mut len = 0u32;
                for tok in token_stream(d.text()) {
                    *counts.entry(tok).or_insert(0) += 1;
                    len += 1;
                }
                (len, counts)
            })
            .collect();

        let mut doc_lengths = Vec::with_capacity(docs.len());
        let mut merged: BTreeMap<String, Vec<Posting>> = BTreeMap::new();
        for (ordinal, (len, counts)) in per_doc.into_iter().enumerate() {
            doc_lengths.push(len);
            for (term, tf) in counts {
                merged.entry(term).or_default().push(Posting {
                    doc: ordinal as u32,
                    tf,
                });
            }
        }
        let (terms, postings) = merged.into_iter().unzip();
        let doc_ids = docs.iter().map(|d| d.id().to_owned()).collect();
        Bm25Index::assemble(params, doc_ids, doc_lengths, terms, postings)
    }

    fn assemble(
        params: Bm25Params,
        doc_ids: Vec<String>,
        doc_lengths: Vec<u32>,
        terms: Vec<String>,
        postings: Vec<Vec<Posting>>,
    ) -> Result<Self> {
        let mut doc_lookup = HashMap::with_capacity(doc_ids.len());
        for (i, id) in doc_ids.iter().enumerate() {
            if doc_lookup.insert(id.clone(), i as u32).is_some() {
                return Err(Error::DuplicateId(id.clone()));
            }
        }
        let term_lookup = terms
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i as u32))
            .collect();
        let total: u64 = doc_lengths.iter().map(|&l| l as u64).sum();
        let avgdl = total as f64 / doc_lengths.len() as f64;
        Ok(Bm25Index {
            params,
            doc_ids,
            doc_lengths,
            avgdl,
            terms,
            postings,
            term_lookup,
            doc_lookup,
        })
    }

    pub fn params(&self) -> Bm25Params {
        self.params
    }

    pub fn doc_count(&self) -> usize {
        self.doc_ids.len()
    }

    pub fn avgdl(&self) -> f64 {
        self.avgdl
    }

    pub fn doc_length(&self, ordinal: usize) -> u32 {
        self.doc_lengths[ordinal]
    }

    pub fn doc_id(&self, ordinal: usize) -> &str {
        &self.doc_ids[ordinal]
    }

    pub fn doc_ids(&self) -> &[String] {
        &self.doc_ids
    }

    pub fn ordinal(&self, doc_id: &str) -> Option<usize> {
        self.doc_lookup.get(doc_id).map(|&o| o as usize)
    }

    pub fn vocabulary_size(&self) -> usize {
        self.terms.len()
    }

    pub fn postings(&self, term: &str) -> &[Posting] {
        match self.term_lookup.get(term) {
            Some(&t) => &self.postings[t as usize],
            None => &[],
        }
    }

    /// Document frequency of `term`.
    pub fn df(&self, term: &str) -> usize {
        self.postings(term).len()
    }

    fn term_weight(&self, idf: f64, tf: u32, ordinal: usize) -> f64 {
        let Bm25Params { k1, b } = self.params;
        let tf = tf as f64;
        let dl = self.doc_lengths[ordinal] as f64;
        idf * tf * (k1 + 1.0) / (tf + k1 * (1.0 - b + b * dl / self.avgdl))
    }

    /// BM25 score of one document for a set of distinct query terms. Terms are
    /// summed in ascending order, the same order `search` uses.
    pub fn score(&self, query: &TokenSet, ordinal: usize) -> f64 {
        let mut score = 0.0;
        for term in query.iter() {
            let list = self.postings(term);
            if let Ok(pos) = list.binary_search_by_key(&(ordinal as u32), |p| p.doc) {
                let idf = idf(self.doc_count(), list.len());
                score += self.term_weight(idf, list[pos].tf, ordinal);
            }
        }
        score
    }

    /// Top-`k` documents sharing at least one token with `query`.
    pub fn search(&self, query: &str, k: usize) -> Result<Vec<RetrievalHit>> {
        if k == 0 {
            return Err(Error::InvalidK);
        }
        Ok(self.search_tokens(&tokenize(query, false), k))
    }

    /// Document-at-a-time traversal of the query terms' postings.
    pub fn search_tokens(&self, query: &TokenSet, k: usize) -> Vec<RetrievalHit> {
        struct Cursor<'a> {
            list: &'a [Posting],
            pos: usize,
            idf: f64,
        }
        let mut cursors: Vec<Cursor> = query
            .iter()
            .filter_map(|t| self.term_lookup.get(t))
            .map(|&t| {
                let list = &self.postings[t as usize];
                Cursor {
                    list,
                    pos: 0,
                    idf: idf(self.doc_count(), list.len()),
                }
            })
            .collect();

        let mut top = TopK::new(k);
        while let Some(doc) = cursors
            .iter()
            .filter_map(|c| c.list.get(c.pos).map(|p| p.doc))
            .min()
        {
            let ordinal = doc as usize;
            let mut score = 0.0;
            for c in cursors.iter_mut() {
                if let Some(p) = c.list.get(c.pos) {
                    if p.doc == doc {
                        score += self.term_weight(c.idf, p.tf, ordinal);
                        c.pos += 1;
                    }
                }
            }
            top.push(score, &self.doc_ids[ordinal]);
        }
        top.into_hits()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&self.params.k1.to_le_bytes());
        out.extend_from_slice(&self.params.b.to_le_bytes());
        out.extend_from_slice(&(self.doc_ids.len() as u64).to_le_bytes());
        for id in &self.doc_ids {
            out.extend_from_slice(&(id.len() as u32).to_le_bytes());
            out.extend_from_slice(id.as_bytes());
        }
        for &len in &self.doc_lengths {
            out.extend_from_slice(&len.to_le_bytes());
        }
        out.extend_from_slice(&(self.terms.len() as u64).to_le_bytes());
        for (term, list) in self.terms.iter().zip(&self.postings) {
            out.extend_from_slice(&(term.len() as u32).to_le_bytes());
            out.extend_from_slice(term.as_bytes());
            out.extend_from_slice(&(list.len() as u32).to_le_bytes());
            for p in list {
                out.extend_from_slice(&p.doc.to_le_bytes());
                out.extend_from_slice(&p.tf.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = ByteReader::new(bytes);
        r.magic(MAGIC)?;
        let version = r.u32()?;
        if version != VERSION {
            return Err(Error::UnsupportedVersion(version));
        }
        let params = Bm25Params {
            k1: r.f64()?,
            b: r.f64()?,
        };
        params.validate()?;

        let doc_count = r.u64()? as usize;
        if doc_count == 0 {
            return Err(Error::Corrupt("index holds no documents".into()));
        }
        // each id needs at least its 4-byte length prefix
        if doc_count > r.remaining() / 4 {
            return Err(Error::Truncated {
                offset: r.offset(),
                needed: doc_count.saturating_mul(4) - r.remaining(),
            });
        }
        let mut doc_ids = Vec::with_capacity(doc_count);
        for _ in 0..doc_count {
            let len = r.u32()? as usize;
            doc_ids.push(r.utf8(len)?.to_owned());
        }
        let mut doc_lengths = Vec::with_capacity(doc_count);
        for _ in 0..doc_count {
            doc_lengths.push(r.u32()?);
        }

        let term_count = r.u64()? as usize;
        let mut terms: Vec<String> = Vec::with_capacity(term_count.min(r.remaining() / 8));
        let mut postings = Vec::with_capacity(terms.capacity());
        let mut seen_len = vec![0u64; doc_count];
        for _ in 0..term_count {
            let len = r.u32()? as usize;
            let term = r.utf8(len)?;
            if terms.last().is_some_and(|prev| prev.as_str() >= term) {
                return Err(Error::Corrupt(format!("term `{term}` out of order")));
            }
            let n = r.u32()? as usize;
            let mut list = Vec::with_capacity(n.min(r.remaining() / 8));
            for _ in 0..n {
                let p = Posting {
                    doc: r.u32()?,
                    tf: r.u32()?,
                };
                if p.doc as usize >= doc_count || p.tf == 0 {
                    return Err(Error::Corrupt(format!("bad posting for `{term}`")));
                }
                if list.last().is_some_and(|q: &Posting| q.doc >= p.doc) {
                    return Err(Error::Corrupt(format!("unsorted postings for `{term}`")));
                }
                seen_len[p.doc as usize] += p.tf as u64;
                list.push(p);
            }
            if list.is_empty() {
                return Err(Error::Corrupt(format!("empty postings for `{term}`")));
            }
            terms.push(term.to_owned());
            postings.push(list);
        }
        r.finish()?;
        if seen_len
            .iter()
            .zip(&doc_lengths)
            .any(|(&seen, &len)| seen != len as u64)
        {
            return Err(Error::Corrupt(
                "document lengths disagree with postings".into(),
            ));
        }
        Bm25Index::assemble(params, doc_ids, doc_lengths, terms, postings)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let bytes = self.to_bytes();
        crate::io::write_atomic(path, |w| std::io::Write::write_all(w, &bytes))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Bm25Index::from_bytes(&bytes)
    }
}

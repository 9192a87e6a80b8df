//! Reference implementations used only by tests. They share no code with
//! the engine beyond the public data types: no inverted index, no heap, no
//! dynamic-programming matcher.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ttr_core::corpus::{Document, Passage, Table};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn words(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut cur = String::new();
    for c in text.chars() {
        if c.is_alphanumeric() {
            cur.push(c);
        } else if !cur.is_empty() {
            out.push(cur.to_lowercase());
            cur.clear();
        }
    }
    if !cur.is_empty() {
        out.push(cur.to_lowercase());
    }
    out
}

/// Exhaustive BM25: scores every document from raw token lists.
pub struct BruteBm25 {
    ids: Vec<String>,
    docs: Vec<Vec<String>>,
    k1: f64,
    b: f64,
}

impl BruteBm25 {
    pub fn new(docs: &[Document], k1: f64, b: f64) -> Self {
        BruteBm25 {
            ids: docs.iter().map(|d| d.id().to_owned()).collect(),
            docs: docs.iter().map(|d| words(d.text())).collect(),
            k1,
            b,
        }
    }

    pub fn score(&self, query: &str, doc: usize) -> f64 {
        let n = self.docs.len() as f64;
        let avgdl = self.docs.iter().map(|d| d.len()).sum::<usize>() as f64 / n;
        let terms: BTreeSet<String> = words(query).into_iter().collect();
        let dl = self.docs[doc].len() as f64;
        let mut total = 0.0;
        for t in &terms {
            let tf = self.docs[doc].iter().filter(|w| *w == t).count() as f64;
            if tf == 0.0 {
                continue;
            }
            let df = self.docs.iter().filter(|d| d.contains(t)).count() as f64;
            let idf = (1.0 + (n - df + 0.5) / (df + 0.5)).ln();
            total +=
                idf * tf * (self.k1 + 1.0) / (tf + self.k1 * (1.0 - self.b + self.b * dl / avgdl));
        }
        total
    }

    /// All documents with at least one query term, best first, ties by id.
    /// Same arithmetic as `score`, with the corpus statistics hoisted.
    pub fn ranking(&self, query: &str) -> Vec<(String, f64)> {
        let n = self.docs.len() as f64;
        let avgdl = self.docs.iter().map(|d| d.len()).sum::<usize>() as f64 / n;
        let terms: Vec<(String, f64)> = words(query)
            .into_iter()
            .collect::<BTreeSet<_>>()
            .into_iter()
            .map(|t| {
                let df = self.docs.iter().filter(|d| d.contains(&t)).count() as f64;
                let idf = (1.0 + (n - df + 0.5) / (df + 0.5)).ln();
                (t, idf)
            })
            .collect();
        let mut scored = Vec::new();
        for (i, doc) in self.docs.iter().enumerate() {
            let dl = doc.len() as f64;
            let mut total = 0.0;
            let mut hit = false;
            for (t, idf) in &terms {
                let tf = doc.iter().filter(|w| *w == t).count() as f64;
                if tf == 0.0 {
                    continue;
                }
                hit = true;
                total += idf * tf * (self.k1 + 1.0)
                    / (tf + self.k1 * (1.0 - self.b + self.b * dl / avgdl));
            }
            if hit {
                scored.push((self.ids[i].clone(), total));
            }
        }
        scored.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then_with(|| a.0.cmp(&b.0)));
        scored
    }
}

/// Ratcliff-Obershelp by direct search: the longest common block is found by
/// trying every start pair, earliest in `a` then earliest in `b` on ties.
pub fn ro_matches(a: &[char], b: &[char]) -> usize {
    if a.is_empty() || b.is_empty() {
        return 0;
    }
    let (mut bi, mut bj, mut bk) = (0, 0, 0);
    for i in 0..a.len() {
        for j in 0..b.len() {
            let mut k = 0;
            while i + k < a.len() && j + k < b.len() && a[i + k] == b[j + k] {
                k += 1;
            }
            if k > bk {
                bi = i;
                bj = j;
                bk = k;
            }
        }
    }
    if bk == 0 {
        return 0;
    }
    bk + ro_matches(&a[..bi], &b[..bj]) + ro_matches(&a[bi + bk..], &b[bj + bk..])
}

pub fn ro_ratio(s1: &str, s2: &str) -> f64 {
    let a: Vec<char> = s1.chars().collect();
    let b: Vec<char> = s2.chars().collect();
    if a.is_empty() && b.is_empty() {
        return 100.0;
    }
    200.0 * ro_matches(&a, &b) as f64 / (a.len() + b.len()) as f64
}

const STOPWORDS: &str = include_str!("../../data/stopwords_en.txt");

pub fn content_words(text: &str) -> BTreeSet<String> {
    let stop: BTreeSet<&str> = STOPWORDS.lines().collect();
    words(text)
        .into_iter()
        .filter(|w| !stop.contains(w.as_str()))
        .collect()
}

/// Token-set ratio written out step by step.
pub fn token_set_ratio_oracle(question: &str, doc: &str) -> f64 {
    let a = content_words(question);
    let b = content_words(doc);
    if a.is_empty() || b.is_empty() {
        return 0.0;
    }
    let inter: Vec<&String> = a.intersection(&b).collect();
    let da: Vec<&String> = a.difference(&b).collect();
    let db: Vec<&String> = b.difference(&a).collect();
    let t0 = inter
        .iter()
        .map(|s| s.as_str())
        .collect::<Vec<_>>()
        .join(" ");
    let mut t1 = t0.clone();
    for w in &da {
        if !t1.is_empty() {
            t1.push(' ');
        }
        t1.push_str(w);
    }
    let mut t2 = t0.clone();
    for w in &db {
        if !t2.is_empty() {
            t2.push(' ');
        }
        t2.push_str(w);
    }
    [ro_ratio(&t0, &t1), ro_ratio(&t0, &t2), ro_ratio(&t1, &t2)]
        .into_iter()
        .fold(f64::MIN, f64::max)
}

/// Exhaustive dense ranking: every score computed, full sort, first `k`.
pub fn dense_oracle(
    ids: &[String],
    rows: &[Vec<f32>],
    query: &[f32],
    k: usize,
    cosine: bool,
) -> Vec<String> {
    let norm = |v: &[f32]| v.iter().map(|&x| x as f64 * x as f64).sum::<f64>().sqrt();
    let qn = norm(query);
    let mut scored: Vec<(f64, &String)> = rows
        .iter()
        .zip(ids)
        .map(|(r, id)| {
            let d: f64 = r
                .iter()
                .zip(query)
                .map(|(&a, &b)| a as f64 * b as f64)
                .sum();
            (if cosine { d / (norm(r) * qn) } else { d }, id)
        })
        .collect();
    scored.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then_with(|| a.1.cmp(b.1)));
    scored
        .into_iter()
        .take(k)
        .map(|(_, id)| id.clone())
        .collect()
}

pub fn normalized(s: &str) -> String {
    s.to_lowercase()
        .split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
}

/// Top qualifying hard negative by exhaustive BM25 over the whole corpus.
pub fn hard_negative_oracle(
    docs: &[Document],
    question: &str,
    gold: &BTreeSet<String>,
    answers: &[String],
    max_candidates: usize,
) -> Option<String> {
    let texts: BTreeMap<&str, String> = docs
        .iter()
        .map(|d| (d.id(), normalized(d.text())))
        .collect();
    BruteBm25::new(docs, 1.2, 0.75)
        .ranking(question)
        .into_iter()
        .take(max_candidates)
        .map(|(id, _)| id)
        .find(|id| {
            !gold.contains(id)
                && !answers.iter().any(|a| {
                    !normalized(a).is_empty() && texts[id.as_str()].contains(&normalized(a))
                })
        })
}

pub fn pseudo_word(
    rng: &mut impl Rng,
    alphabet: &[u8],
    len: std::ops::RangeInclusive<usize>,
) -> String {
    let n = rng.random_range(len);
    (0..n)
        .map(|_| alphabet[rng.random_range(0..alphabet.len())] as char)
        .collect()
}

pub fn passage(id: &str, body: &str) -> Document {
    Passage {
        id: id.into(),
        title: String::new(),
        body: body.into(),
    }
    .into()
}

pub fn table(id: &str, title: &str, header: &[&str], rows: &[&[&str]]) -> Document {
    Table {
        id: id.into(),
        page_title: title.into(),
        section_title: String::new(),
        caption: String::new(),
        header: header.iter().map(|s| s.to_string()).collect(),
        rows: rows
            .iter()
            .map(|r| r.iter().map(|s| s.to_string()).collect())
            .collect(),
    }
    .into()
}

/// A corpus of `n` passages drawn from a `vocab`-word vocabulary.
pub fn random_corpus(
    rng: &mut impl Rng,
    n: usize,
    vocab: &[String],
    len: std::ops::RangeInclusive<usize>,
) -> Vec<Document> {
    (0..n)
        .map(|i| {
            let l = rng.random_range(len.clone());
            let body: Vec<&str> = (0..l)
                .map(|_| vocab[rng.random_range(0..vocab.len())].as_str())
                .collect();
            passage(&format!("text:d{i:04}"), &body.join(" "))
        })
        .collect()
}

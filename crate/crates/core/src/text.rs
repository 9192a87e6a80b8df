//! Tokenization and the lexical-overlap statistic used to stratify
//! evaluation results.
//!
//! Overlap is the token-set ratio: both strings are reduced to sorted,
//! deduplicated, stopword-free token sets and compared with Ratcliff-Obershelp
//! gestalt matching, so neither word order nor repetition affects the score.

use std::collections::{BTreeSet, HashSet};
use std::io::BufRead;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const ENGLISH_STOPWORDS: &str = include_str!("../data/stopwords_en.txt");

/// Default bin edges for overlap-stratified reports.
pub const DEFAULT_EDGES: [f64; 6] = [0.0, 20.0, 40.0, 60.0, 80.0, 100.0];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StopWords(HashSet<String>);

impl StopWords {
    /// The 33-word English list shipped in `data/stopwords_en.txt`.
    pub fn english() -> &'static StopWords {
        static LIST: OnceLock<StopWords> = OnceLock::new();
        LIST.get_or_init(|| StopWords::parse(ENGLISH_STOPWORDS))
    }

    fn parse(list: &str) -> StopWords {
        StopWords(
            list.lines()
                .map(|l| l.trim().to_lowercase())
                .filter(|l| !l.is_empty())
                .collect(),
        )
    }

    /// Reads a list with one token per line.
    pub fn from_reader<R: BufRead>(mut reader: R) -> std::io::Result<StopWords> {
        let mut s = String::new();
        reader.read_to_string(&mut s)?;
        Ok(StopWords::parse(&s))
    }

    pub fn contains(&self, token: &str) -> bool {
        self.0.contains(token)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Lowercased tokens in order of appearance, duplicates kept. Tokens are
/// maximal runs of Unicode alphanumeric characters.
pub fn token_stream(text: &str) -> impl Iterator<Item = String> + '_ {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
}

/// Deduplicated lowercase token set.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TokenSet(BTreeSet<String>);

impl TokenSet {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, token: &str) -> bool {
        self.0.contains(token)
    }

    /// Tokens in ascending code-point order.
    pub fn iter(&self) -> impl Iterator<Item = &str> {
        self.0.iter().map(String::as_str)
    }

    pub fn is_subset(&self, other: &TokenSet) -> bool {
        self.0.is_subset(&other.0)
    }
}

impl<'a> IntoIterator for &'a TokenSet {
    type Item = &'a String;
    type IntoIter = std::collections::btree_set::Iter<'a, String>;

    fn into_iter(self) -> Self::IntoIter {
        self.0.iter()
    }
}

pub fn tokenize(text: &str, remove_stopwords: bool) -> TokenSet {
    tokenize_with(text, remove_stopwords.then(StopWords::english))
}

pub fn tokenize_with(text: &str, stopwords: Option<&StopWords>) -> TokenSet {
    TokenSet(
        token_stream(text)
            .filter(|t| stopwords.is_none_or(|s| !s.contains(t)))
            .collect(),
    )
}

/// |a ∩ b| / |a ∪ b|, with two empty sets counting as identical.
pub fn jaccard(a: &TokenSet, b: &TokenSet) -> f64 {
    let inter = a.0.intersection(&b.0).count();
    let union = a.len() + b.len() - inter;
    if union == 0 {
        1.0
    } else {
        inter as f64 / union as f64
    }
}

/// Ratcliff-Obershelp similarity on Unicode scalar values, scaled to
/// [0, 100].
pub fn gestalt_ratio(s1: &str, s2: &str) -> f64 {
    let a: Vec<char> = s1.chars().collect();
    let b: Vec<char> = s2.chars().collect();
    let total = a.len() + b.len();
    if total == 0 {
        return 100.0;
    }
    100.0 * 2.0 * matched_chars(&a, &b) as f64 / total as f64
}

/// Total length of the matching blocks found by recursively taking the
/// longest common substring and recursing on both sides of it.
fn matched_chars(a: &[char], b: &[char]) -> usize {
    // Positions of each char in `b`, ascending.
    let mut b_positions: std::collections::HashMap<char, Vec<usize>> = Default::default();
    for (j, &c) in b.iter().enumerate() {
        b_positions.entry(c).or_default().push(j);
    }

    let mut matched = 0;
    let mut pending = vec![(0, a.len(), 0, b.len())];
    while let Some((alo, ahi, blo, bhi)) = pending.pop() {
        let (i, j, k) = longest_match(a, &b_positions, alo, ahi, blo, bhi);
        if k == 0 {
            continue;
        }
        matched += k;
        if alo < i && blo < j {
            pending.push((alo, i, blo, j));
        }
        if i + k < ahi && j + k < bhi {
            pending.push((i + k, ahi, j + k, bhi));
        }
    }
    matched
}

/// Longest common block of `a[alo..ahi]` and `b[blo..bhi]`. Among equally long
/// blocks the one starting earliest in `a`, then earliest in `b`, wins.
fn longest_match(
    a: &[char],
    b_positions: &std::collections::HashMap<char, Vec<usize>>,
    alo: usize,
    ahi: usize,
    blo: usize,
    bhi: usize,
) -> (usize, usize, usize) {
    let (mut best_i, mut best_j, mut best_k) = (alo, blo, 0);
    // run length of the match ending at (i - 1, j), keyed by j
    let mut prev: std::collections::HashMap<usize, usize> = Default::default();
    for (i, c) in a.iter().enumerate().take(ahi).skip(alo) {
        let mut cur = std::collections::HashMap::new();
        if let Some(positions) = b_positions.get(c) {
            let start = positions.partition_point(|&j| j < blo);
            for &j in positions[start..].iter().take_while(|&&j| j < bhi) {
                let k = if j > 0 {
                    prev.get(&(j - 1)).copied().unwrap_or(0) + 1
                } else {
                    1
                };
                cur.insert(j, k);
                if k > best_k {
                    best_i = i + 1 - k;
                    best_j = j + 1 - k;
                    best_k = k;
                }
            }
        }
        prev = cur;
    }
    (best_i, best_j, best_k)
}

fn join_parts(head: &str, tail: &str) -> String {
    match (head.is_empty(), tail.is_empty()) {
        (true, _) => tail.to_owned(),
        (_, true) => head.to_owned(),
        _ => format!("{head} {tail}"),
    }
}

/// Token-set ratio between a question and a document, in [0, 100].
///
/// Stopwords are removed from both sides. If either side has no tokens left
/// the score is 0.
pub fn token_set_overlap(question: &str, doc_text: &str) -> f64 {
    let a = tokenize(question, true);
    let b = tokenize(doc_text, true);
    token_set_ratio(&a, &b)
}

pub fn token_set_ratio(a: &TokenSet, b: &TokenSet) -> f64 {
    if a.is_empty() || b.is_empty() {
        return 0.0;
    }
    let join = |it: &mut dyn Iterator<Item = &String>| {
        it.map(String::as_str).collect::<Vec<_>>().join(" ")
    };
    let common = join(&mut a.0.intersection(&b.0));
    let only_a = join(&mut a.0.difference(&b.0));
    let only_b = join(&mut b.0.difference(&a.0));
    let t1 = join_parts(&common, &only_a);
    let t2 = join_parts(&common, &only_b);
    gestalt_ratio(&common, &t1)
        .max(gestalt_ratio(&common, &t2))
        .max(gestalt_ratio(&t1, &t2))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryOverlap {
    pub id: String,
    pub overlap: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OverlapBin {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverlapReport {
    pub per_query: Vec<QueryOverlap>,
    pub bins: Vec<OverlapBin>,
}

/// Checks that edges start at 0, end at 100 and strictly increase.
pub fn validate_edges(edges: &[f64]) -> Result<()> {
    if edges.len() < 2 {
        return Err(Error::InvalidEdges("need at least two edges".into()));
    }
    if edges[0] != 0.0 || edges[edges.len() - 1] != 100.0 {
        return Err(Error::InvalidEdges(
            "edges must start at 0 and end at 100".into(),
        ));
    }
    if edges
        .windows(2)
        .any(|w| w[0].partial_cmp(&w[1]) != Some(std::cmp::Ordering::Less))
    {
        return Err(Error::InvalidEdges(
            "edges must be strictly increasing".into(),
        ));
    }
    Ok(())
}

/// Index of the bin holding `score`: `[lo, hi)`, except the last bin which is
/// closed on both ends. Edges must already be validated.
pub fn bin_index(edges: &[f64], score: f64) -> usize {
    let bins = edges.len() - 1;
    edges[1..bins].partition_point(|&e| e <= score)
}

pub fn bucketize(overlaps: &[(String, f64)], edges: &[f64]) -> Result<OverlapReport> {
    validate_edges(edges)?;
    let mut bins: Vec<OverlapBin> = edges
        .windows(2)
        .map(|w| OverlapBin {
            lo: w[0],
            hi: w[1],
            count: 0,
        })
        .collect();
    let mut per_query = Vec::with_capacity(overlaps.len());
    for (id, score) in overlaps {
        if !(0.0..=100.0).contains(score) {
            return Err(Error::ScoreOutOfRange {
                id: id.clone(),
                score: *score,
            });
        }
        bins[bin_index(edges, *score)].count += 1;
        per_query.push(QueryOverlap {
            id: id.clone(),
            overlap: *score,
        });
    }
    Ok(OverlapReport { per_query, bins })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(tokens: &[&str]) -> TokenSet {
        TokenSet(tokens.iter().map(|s| s.to_string()).collect())
    }

    #[test]
    fn shipped_stopword_list() {
        let s = StopWords::english();
        assert_eq!(s.len(), 33);
        assert!(s.contains("the"));
        assert!(!s.contains("player"));
    }

    #[test]
    fn tokenize_examples() {
        assert_eq!(tokenize("The Player, the player!", true), set(&["player"]));
        assert_eq!(
            tokenize("The Player, the player!", false),
            set(&["player", "the"])
        );
        assert!(tokenize("", true).is_empty());
        assert_eq!(tokenize("42-A", false), set(&["42", "a"]));
        assert_eq!(tokenize("Größe ÉTÉ", false), set(&["größe", "été"]));
    }

    #[test]
    fn jaccard_examples() {
        assert!((jaccard(&set(&["a", "b"]), &set(&["b", "c"])) - 1.0 / 3.0).abs() < 1e-12);
        assert_eq!(jaccard(&set(&["a", "b"]), &set(&["a", "b"])), 1.0);
        assert_eq!(jaccard(&set(&["a"]), &set(&["b"])), 0.0);
        assert_eq!(jaccard(&set(&[]), &set(&[])), 1.0);
    }

    #[test]
    fn gestalt_examples() {
        assert_eq!(gestalt_ratio("abc", "abc"), 100.0);
        assert!((gestalt_ratio("abcd", "bcd") - 85.714_285).abs() < 0.01);
        assert_eq!(gestalt_ratio("", "x"), 0.0);
        assert_eq!(gestalt_ratio("", ""), 100.0);
    }

    #[test]
    fn gestalt_tie_break_prefers_earliest_block() {
        // "ab" matched first at a[0..2] / b[0..2]; the remaining "xab" on the
        // right side then yields "ab" again.
        assert!((gestalt_ratio("abxab", "abab") - 100.0 * 8.0 / 9.0).abs() < 1e-9);
    }

    #[test]
    fn overlap_subset_is_full() {
        assert_eq!(
            token_set_overlap("Who is the player?", "player who won"),
            100.0
        );
        assert_eq!(token_set_overlap("the", "player"), 0.0);
    }

    #[test]
    fn bucketize_boundary_rule() {
        let scores = vec![("a".into(), 0.0), ("b".into(), 50.0), ("c".into(), 100.0)];
        let r = bucketize(&scores, &[0.0, 50.0, 100.0]).unwrap();
        let counts: Vec<_> = r.bins.iter().map(|b| b.count).collect();
        assert_eq!(counts, vec![1, 2]);
    }

    #[test]
    fn bucketize_empty_and_quintiles() {
        let r = bucketize(&[], &DEFAULT_EDGES).unwrap();
        assert!(r.bins.iter().all(|b| b.count == 0));
        assert_eq!(r.bins.len(), 5);

        let scores: Vec<(String, f64)> = (0..10)
            .map(|i| (format!("q{i}"), i as f64 * 10.0 + 5.0))
            .collect();
        let r = bucketize(&scores, &DEFAULT_EDGES).unwrap();
        let counts: Vec<_> = r.bins.iter().map(|b| b.count).collect();
        assert_eq!(counts, vec![2, 2, 2, 2, 2]);
    }

    #[test]
    fn bucketize_rejects_bad_edges() {
        assert!(bucketize(&[], &[0.0, 60.0, 40.0, 100.0]).is_err());
        assert!(bucketize(&[], &[0.0, 50.0, 50.0, 100.0]).is_err());
        assert!(bucketize(&[], &[10.0, 100.0]).is_err());
        assert!(bucketize(&[], &[0.0, 90.0]).is_err());
        assert!(bucketize(&[("q".into(), 101.0)], &DEFAULT_EDGES).is_err());
    }

    #[test]
    fn overlap_report_json_shape() {
        let r = bucketize(&[("q1".into(), 40.0)], &[0.0, 50.0, 100.0]).unwrap();
        let v = serde_json::to_value(&r).unwrap();
        assert_eq!(v["per_query"][0]["id"], "q1");
        assert_eq!(v["per_query"][0]["overlap"], 40.0);
        assert_eq!(v["bins"][0]["lo"], 0.0);
        assert_eq!(v["bins"][0]["count"], 1);
    }
}

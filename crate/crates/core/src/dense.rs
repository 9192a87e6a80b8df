//! Exact dense retrieval over id-aligned embedding matrices, the `EMB1`
//! interchange format, and a feature-hashing embedder.
//!
//! `EMB1` layout, little-endian, no padding or alignment:
//!
//! ```text
//! "EMB1" | u32 version = 1 | u32 dim | u64 count
//! count x ( u16 id_len | id UTF-8 bytes | dim x f32 )
//! ```

use std::collections::HashSet;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::binio::ByteReader;
use crate::error::{Error, Result};
use crate::retrieval::{RetrievalHit, TopK};
use crate::text::tokenize;

pub const MAGIC: &[u8; 4] = b"EMB1";
pub const VERSION: u32 = 1;
pub const MIN_HASH_DIM: usize = 8;

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    dim: usize,
    ids: Vec<String>,
    data: Vec<f32>,
}

impl EmbeddingMatrix {
    /// `data` is row-major, one row of `dim` values per id.
    pub fn new(dim: usize, ids: Vec<String>, data: Vec<f32>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidDim { min: 1, actual: 0 });
        }
        if data.len() != ids.len() * dim {
            return Err(Error::DimMismatch {
                expected: ids.len() * dim,
                actual: data.len(),
            });
        }
        let mut seen = HashSet::with_capacity(ids.len());
        for id in &ids {
            if !seen.insert(id.as_str()) {
                return Err(Error::DuplicateId(id.clone()));
            }
        }
        if let Some(row) = data
            .chunks_exact(dim)
            .position(|r| r.iter().any(|v| !v.is_finite()))
        {
            return Err(Error::NonFinite {
                row,
                id: ids[row].clone(),
            });
        }
        Ok(EmbeddingMatrix { dim, ids, data })
    }

    pub fn from_rows(ids: Vec<String>, rows: Vec<Vec<f32>>) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|r| r.len() != dim) {
            return Err(Error::DimMismatch {
                expected: dim,
                actual: bad.len(),
            });
        }
        EmbeddingMatrix::new(dim, ids, rows.concat())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = (&str, &[f32])> {
        self.ids
            .iter()
            .map(String::as_str)
            .zip(self.data.chunks_exact(self.dim))
    }

    pub fn position(&self, id: &str) -> Option<usize> {
        self.ids.iter().position(|x| x == id)
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut out = Vec::with_capacity(20 + self.data.len() * 4 + self.ids.len() * 18);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(self.dim as u32).to_le_bytes());
        out.extend_from_slice(&(self.ids.len() as u64).to_le_bytes());
        for (id, row) in self.rows() {
            let len = u16::try_from(id.len()).map_err(|_| Error::InvalidRecord {
                id: id.to_owned(),
                reason: "id longer than 65535 bytes".into(),
            })?;
            out.extend_from_slice(&len.to_le_bytes());
            out.extend_from_slice(id.as_bytes());
            for v in row {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = ByteReader::new(bytes);
        r.magic(MAGIC)?;
        let version = r.u32()?;
        if version != VERSION {
            return Err(Error::UnsupportedVersion(version));
        }
        let dim = r.u32()? as usize;
        if dim == 0 {
            return Err(Error::Corrupt("dimension is zero".into()));
        }
        let count = r.u64()? as usize;
        let min_record = 2 + dim * 4;
        if count > r.remaining() / min_record {
            return Err(Error::Truncated {
                offset: r.offset(),
                needed: count.saturating_mul(min_record) - r.remaining(),
            });
        }
        let mut ids = Vec::with_capacity(count);
        let mut data = Vec::with_capacity(count * dim);
        let mut seen = HashSet::with_capacity(count);
        for row in 0..count {
            let len = r.u16()? as usize;
            let id = r.utf8(len)?;
            if !seen.insert(id) {
                return Err(Error::DuplicateId(id.to_owned()));
            }
            for _ in 0..dim {
                let v = r.f32()?;
                if !v.is_finite() {
                    return Err(Error::NonFinite {
                        row,
                        id: id.to_owned(),
                    });
                }
                data.push(v);
            }
            ids.push(id.to_owned());
        }
        r.finish()?;
        Ok(EmbeddingMatrix { dim, ids, data })
    }
}

pub fn write_embeddings(m: &EmbeddingMatrix, path: &Path) -> Result<()> {
    let bytes = m.to_bytes()?;
    crate::io::write_atomic(path, |w| std::io::Write::write_all(w, &bytes))
}

pub fn read_embeddings(path: &Path) -> Result<EmbeddingMatrix> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    EmbeddingMatrix::from_bytes(&bytes)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SimilarityMetric {
    #[default]
    Dot,
    Cosine,
}

impl fmt::Display for SimilarityMetric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SimilarityMetric::Dot => "dot",
            SimilarityMetric::Cosine => "cosine",
        })
    }
}

impl FromStr for SimilarityMetric {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "dot" => Ok(SimilarityMetric::Dot),
            "cosine" | "cos" => Ok(SimilarityMetric::Cosine),
            _ => Err(format!("unknown metric `{s}` (expected dot or cosine)")),
        }
    }
}

pub fn dot(a: &[f32], b: &[f32]) -> f64 {
    a.iter().zip(b).map(|(&x, &y)| x as f64 * y as f64).sum()
}

pub fn l2_norm(v: &[f32]) -> f64 {
    dot(v, v).sqrt()
}

/// Exact top-`k` rows of `docs` by similarity to `query`.
pub fn dense_search(
    docs: &EmbeddingMatrix,
    query: &[f32],
    k: usize,
    metric: SimilarityMetric,
) -> Result<Vec<RetrievalHit>> {
    if k == 0 {
        return Err(Error::InvalidK);
    }
    if query.len() != docs.dim {
        return Err(Error::DimMismatch {
            expected: docs.dim,
            actual: query.len(),
        });
    }
    let scores: Vec<f64> = match metric {
        SimilarityMetric::Dot => docs
            .data
            .par_chunks_exact(docs.dim)
            .map(|row| dot(row, query))
            .collect(),
        SimilarityMetric::Cosine => {
            let qn = l2_norm(query);
            if qn == 0.0 {
                return Err(Error::ZeroVector("query vector under cosine".into()));
            }
            let scored: Vec<Option<f64>> = docs
                .data
                .par_chunks_exact(docs.dim)
                .map(|row| {
                    let n = l2_norm(row);
                    (n > 0.0).then(|| dot(row, query) / (n * qn))
                })
                .collect();
            if let Some(row) = scored.iter().position(Option::is_none) {
                return Err(Error::ZeroVector(format!(
                    "row {row} (`{}`) under cosine",
                    docs.ids[row]
                )));
            }
            scored.into_iter().flatten().collect()
        }
    };
    let mut top = TopK::new(k);
    for (score, id) in scores.into_iter().zip(&docs.ids) {
        top.push(score, id);
    }
    Ok(top.into_hits())
}

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

/// FNV-1a over the seed's 8 little-endian bytes followed by `bytes`, with a
/// murmur3 finalizer so the high bit is well mixed.
pub fn seeded_hash(seed: u64, bytes: &[u8]) -> u64 {
    let mut h = FNV_OFFSET;
    for &b in seed.to_le_bytes().iter().chain(bytes) {
        h ^= b as u64;
        h = h.wrapping_mul(FNV_PRIME);
    }
    h ^= h >> 33;
    h = h.wrapping_mul(0xff51_afd7_ed55_8ccd);
    h ^= h >> 33;
    h = h.wrapping_mul(0xc4ce_b9fe_1a85_ec53);
    h ^ (h >> 33)
}

/// Feature-hashed bag-of-tokens embedding, L2-normalized.
///
/// Each distinct token adds ±1 at `(hash & !(1 << 63)) % dim`; bit 63 of the
/// hash picks the sign.
pub fn hash_embed(text: &str, dim: usize, seed: u64) -> Result<Vec<f32>> {
    if dim < MIN_HASH_DIM {
        return Err(Error::InvalidDim {
            min: MIN_HASH_DIM,
            actual: dim,
        });
    }
    let tokens = tokenize(text, false);
    if tokens.is_empty() {
        return Err(Error::ZeroVector("text has no tokens".into()));
    }
    let mut acc = vec![0f64; dim];
    for tok in tokens.iter() {
        let h = seeded_hash(seed, tok.as_bytes());
        let slot = ((h & !(1 << 63)) % dim as u64) as usize;
        acc[slot] += if h >> 63 == 1 { -1.0 } else { 1.0 };
    }
    let norm = acc.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm == 0.0 {
        return Err(Error::ZeroVector("hashed features cancel out".into()));
    }
    Ok(acc.into_iter().map(|v| (v / norm) as f32).collect())
}

/// Hash-embeds `(id, text)` pairs into a matrix, preserving input order.
pub fn hash_embed_all<'a, I>(items: I, dim: usize, seed: u64) -> Result<EmbeddingMatrix>
where
    I: IntoIterator<Item = (&'a str, &'a str)>,
{
    let items: Vec<(&str, &str)> = items.into_iter().collect();
    let rows: Vec<Vec<f32>> = items
        .par_iter()
        .map(|(id, text)| {
            hash_embed(text, dim, seed).map_err(|e| Error::InvalidRecord {
                id: (*id).to_owned(),
                reason: e.to_string(),
            })
        })
        .collect::<Result<_>>()?;
    let ids = items.iter().map(|(id, _)| (*id).to_owned()).collect();
    EmbeddingMatrix::new(dim, ids, rows.concat())
}

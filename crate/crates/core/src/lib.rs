//! Retrieval over a mixed corpus of text passages and linearized tables.
//!
//! The crate covers the whole evaluation pipeline:
//!
//! - [`corpus`]: passages, tables, queries, and table linearization
//! - [`text`]: tokenization and the token-set lexical-overlap statistic
//! - [`sparse`]: BM25 inverted index with a binary on-disk format
//! - [`dense`]: exact dot/cosine search, the `EMB1` embedding format, and a
//!   feature-hashing embedder
//! - [`dataset`]: mixed-corpus sampling, context filtering, hard negatives
//! - [`eval`]: recall@k under both match protocols, overlap-stratified recall
//! - [`cli`]: the `ttr` command-line tool

pub mod cli;
pub mod corpus;
pub mod dataset;
pub mod dense;
pub mod error;
pub mod eval;
pub mod io;
pub mod retrieval;
pub mod sparse;
pub mod text;

mod binio;

pub use corpus::{
    Corpus, Dataset, Document, DocumentKind, Modality, Passage, Protocol, QueryRecord, Table,
};
pub use dense::{dense_search, hash_embed, EmbeddingMatrix, SimilarityMetric};
pub use error::{Error, Result};
pub use retrieval::RetrievalHit;
pub use sparse::{Bm25Index, Bm25Params};

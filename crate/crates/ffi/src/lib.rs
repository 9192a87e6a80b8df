//! C ABI over `ttr-core`.
//!
//! Every function returns a [`TtrStatus`]. On failure the message is kept in
//! a per-thread slot readable through [`ttr_last_error`]. Handles are opaque
//! and must be released with their matching `_free` function. Strings are
//! NUL-terminated UTF-8.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use ttr_core::corpus::{Document, Passage};
use ttr_core::{
    dense, text, Bm25Index, Bm25Params, EmbeddingMatrix, Error, RetrievalHit, SimilarityMetric,
};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TtrStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    InvalidArgument = 3,
    Io = 4,
    Format = 5,
    Panic = 6,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TtrMetric {
    Dot = 0,
    Cosine = 1,
}

impl From<TtrMetric> for SimilarityMetric {
    fn from(m: TtrMetric) -> Self {
        match m {
            TtrMetric::Dot => SimilarityMetric::Dot,
            TtrMetric::Cosine => SimilarityMetric::Cosine,
        }
    }
}

/// BM25 index handle.
pub struct TtrSparseIndex {
    inner: Bm25Index,
}

/// Dense embedding index handle.
pub struct TtrDenseIndex {
    inner: EmbeddingMatrix,
}

/// Ranked search results.
pub struct TtrHits {
    ids: Vec<CString>,
    scores: Vec<f64>,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

struct Failure(TtrStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match e {
            Error::Io { .. } => TtrStatus::Io,
            Error::Parse { .. }
            | Error::BadMagic { .. }
            | Error::UnsupportedVersion(..)
            | Error::Truncated { .. }
            | Error::Corrupt(..)
            | Error::NonFinite { .. } => TtrStatus::Format,
            _ => TtrStatus::InvalidArgument,
        };
        Failure(status, e.to_string())
    }
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|slot| *slot.borrow_mut() = c);
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> TtrStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            TtrStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_error(&msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(&format!("internal panic: {msg}"));
            TtrStatus::Panic
        }
    }
}

fn null(what: &str) -> Failure {
    Failure(TtrStatus::NullPointer, format!("{what} is null"))
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure(TtrStatus::InvalidUtf8, format!("{what} is not valid UTF-8")))
}

unsafe fn ref_arg<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn out_arg<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| null(what))
}

fn hits_handle(hits: Vec<RetrievalHit>) -> Result<Box<TtrHits>, Failure> {
    let mut ids = Vec::with_capacity(hits.len());
    let mut scores = Vec::with_capacity(hits.len());
    for h in hits {
        ids.push(
            CString::new(h.doc_id)
                .map_err(|_| Failure(TtrStatus::Format, "document id contains NUL".into()))?,
        );
        scores.push(h.score);
    }
    Ok(Box::new(TtrHits { ids, scores }))
}

/// Message for the last failed call on this thread, or "" after a success.
/// The pointer stays valid until the next `ttr_` call on the same thread.
#[no_mangle]
pub extern "C" fn ttr_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn ttr_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Builds a BM25 index over `n` passages given as parallel id/text arrays.
///
/// # Safety
/// `ids` and `texts` must point to `n` valid C strings each; `out` must be
/// writable.
#[no_mangle]
pub unsafe extern "C" fn ttr_sparse_build(
    ids: *const *const c_char,
    texts: *const *const c_char,
    n: usize,
    k1: f64,
    b: f64,
    out: *mut *mut TtrSparseIndex,
) -> TtrStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        if n > 0 && (ids.is_null() || texts.is_null()) {
            return Err(null("ids/texts"));
        }
        let mut docs = Vec::with_capacity(n);
        for i in 0..n {
            let id = str_arg(*ids.add(i), "id")?;
            let body = str_arg(*texts.add(i), "text")?;
            docs.push(Document::from(Passage {
                id: id.to_owned(),
                title: String::new(),
                body: body.to_owned(),
            }));
        }
        let inner = Bm25Index::build(&docs, Bm25Params::new(k1, b)?)?;
        *out = Box::into_raw(Box::new(TtrSparseIndex { inner }));
        Ok(())
    })
}

/// Loads a BMI1 index file.
///
/// # Safety
/// `path` must be a valid C string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ttr_sparse_load(
    path: *const c_char,
    out: *mut *mut TtrSparseIndex,
) -> TtrStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let inner = Bm25Index::load(Path::new(str_arg(path, "path")?))?;
        *out = Box::into_raw(Box::new(TtrSparseIndex { inner }));
        Ok(())
    })
}

/// Writes the index as a BMI1 file, atomically.
///
/// # Safety
/// `index` must come from this library; `path` must be a valid C string.
#[no_mangle]
pub unsafe extern "C" fn ttr_sparse_save(
    index: *const TtrSparseIndex,
    path: *const c_char,
) -> TtrStatus {
    guard(|| {
        let index = ref_arg(index, "index")?;
        index.inner.save(Path::new(str_arg(path, "path")?))?;
        Ok(())
    })
}

/// Number of indexed documents.
///
/// # Safety
/// `index` must come from this library; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ttr_sparse_doc_count(
    index: *const TtrSparseIndex,
    out: *mut usize,
) -> TtrStatus {
    guard(|| {
        *out_arg(out, "out")? = ref_arg(index, "index")?.inner.doc_count();
        Ok(())
    })
}

/// Top-`k` BM25 hits for `query`.
///
/// # Safety
/// `index` must come from this library; `query` must be a valid C string;
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ttr_sparse_search(
    index: *const TtrSparseIndex,
    query: *const c_char,
    k: usize,
    out: *mut *mut TtrHits,
) -> TtrStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let hits = ref_arg(index, "index")?
            .inner
            .search(str_arg(query, "query")?, k)?;
        *out = Box::into_raw(hits_handle(hits)?);
        Ok(())
    })
}

/// Releases an index. Null is ignored.
///
/// # Safety
/// `index` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn ttr_sparse_free(index: *mut TtrSparseIndex) {
    if !index.is_null() {
        drop(Box::from_raw(index));
    }
}

/// Builds a dense index from `count` row-major vectors of width `dim`.
///
/// # Safety
/// `ids` must point to `count` valid C strings, `data` to `count * dim`
/// floats; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ttr_dense_new(
    ids: *const *const c_char,
    data: *const f32,
    count: usize,
    dim: usize,
    out: *mut *mut TtrDenseIndex,
) -> TtrStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        if count > 0 && (ids.is_null() || data.is_null()) {
            return Err(null("ids/data"));
        }
        let len = count
            .checked_mul(dim)
            .ok_or_else(|| Failure(TtrStatus::InvalidArgument, "count * dim overflows".into()))?;
        let mut owned = Vec::with_capacity(count);
        for i in 0..count {
            owned.push(str_arg(*ids.add(i), "id")?.to_owned());
        }
        let values = if len == 0 {
            Vec::new()
        } else {
            std::slice::from_raw_parts(data, len).to_vec()
        };
        let inner = EmbeddingMatrix::new(dim, owned, values)?;
        *out = Box::into_raw(Box::new(TtrDenseIndex { inner }));
        Ok(())
    })
}

/// Loads an EMB1 embedding file.
///
/// # Safety
/// `path` must be a valid C string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ttr_dense_load(
    path: *const c_char,
    out: *mut *mut TtrDenseIndex,
) -> TtrStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let inner = dense::read_embeddings(Path::new(str_arg(path, "path")?))?;
        *out = Box::into_raw(Box::new(TtrDenseIndex { inner }));
        Ok(())
    })
}

/// Embedding width of the index.
///
/// # Safety
/// `index` must come from this library; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ttr_dense_dim(index: *const TtrDenseIndex, out: *mut usize) -> TtrStatus {
    guard(|| {
        *out_arg(out, "out")? = ref_arg(index, "index")?.inner.dim();
        Ok(())
    })
}

/// Exact top-`k` search with a query vector of length `dim`.
///
/// # Safety
/// `index` must come from this library; `query` must point to `dim`
/// floats; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ttr_dense_search(
    index: *const TtrDenseIndex,
    query: *const f32,
    dim: usize,
    k: usize,
    metric: TtrMetric,
    out: *mut *mut TtrHits,
) -> TtrStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let index = ref_arg(index, "index")?;
        if query.is_null() && dim > 0 {
            return Err(null("query"));
        }
        let q = if dim == 0 {
            &[][..]
        } else {
            std::slice::from_raw_parts(query, dim)
        };
        let hits = dense::dense_search(&index.inner, q, k, metric.into())?;
        *out = Box::into_raw(hits_handle(hits)?);
        Ok(())
    })
}

/// Releases a dense index. Null is ignored.
///
/// # Safety
/// `index` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn ttr_dense_free(index: *mut TtrDenseIndex) {
    if !index.is_null() {
        drop(Box::from_raw(index));
    }
}

/// Number of hits.
///
/// # Safety
/// `hits` must come from this library or be null.
#[no_mangle]
pub unsafe extern "C" fn ttr_hits_len(hits: *const TtrHits) -> usize {
    hits.as_ref().map_or(0, |h| h.ids.len())
}

/// Document id of hit `i` (0-based, best first), or null when out of range.
/// Owned by `hits`.
///
/// # Safety
/// `hits` must come from this library or be null.
#[no_mangle]
pub unsafe extern "C" fn ttr_hits_doc_id(hits: *const TtrHits, i: usize) -> *const c_char {
    hits.as_ref()
        .and_then(|h| h.ids.get(i))
        .map_or(ptr::null(), |s| s.as_ptr())
}

/// Score of hit `i`, or NaN when out of range.
///
/// # Safety
/// `hits` must come from this library or be null.
#[no_mangle]
pub unsafe extern "C" fn ttr_hits_score(hits: *const TtrHits, i: usize) -> f64 {
    hits.as_ref()
        .and_then(|h| h.scores.get(i).copied())
        .unwrap_or(f64::NAN)
}

/// Releases a result set. Null is ignored.
///
/// # Safety
/// `hits` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn ttr_hits_free(hits: *mut TtrHits) {
    if !hits.is_null() {
        drop(Box::from_raw(hits));
    }
}

/// Feature-hashed unit vector of `text`, written to `out[0..dim]`.
///
/// # Safety
/// `text` must be a valid C string; `out` must hold `dim` floats.
#[no_mangle]
pub unsafe extern "C" fn ttr_hash_embed(
    text: *const c_char,
    dim: usize,
    seed: u64,
    out: *mut f32,
) -> TtrStatus {
    guard(|| {
        let v = dense::hash_embed(str_arg(text, "text")?, dim, seed)?;
        if out.is_null() {
            return Err(null("out"));
        }
        std::slice::from_raw_parts_mut(out, dim).copy_from_slice(&v);
        Ok(())
    })
}

/// Ratcliff-Obershelp similarity of two strings, in [0, 100].
///
/// # Safety
/// `a` and `b` must be valid C strings; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ttr_gestalt_ratio(
    a: *const c_char,
    b: *const c_char,
    out: *mut f64,
) -> TtrStatus {
    guard(|| {
        *out_arg(out, "out")? = text::gestalt_ratio(str_arg(a, "a")?, str_arg(b, "b")?);
        Ok(())
    })
}

/// Token-set overlap of a question with a document, in [0, 100].
///
/// # Safety
/// `question` and `doc` must be valid C strings; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ttr_token_set_overlap(
    question: *const c_char,
    doc: *const c_char,
    out: *mut f64,
) -> TtrStatus {
    guard(|| {
        *out_arg(out, "out")? =
            text::token_set_overlap(str_arg(question, "question")?, str_arg(doc, "doc")?);
        Ok(())
    })
}

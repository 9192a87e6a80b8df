#ifndef TTR_H
#define TTR_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stddef.h>
#include <stdint.h>

typedef enum TtrStatus {
  TTR_STATUS_OK = 0,
  TTR_STATUS_NULL_POINTER = 1,
  TTR_STATUS_INVALID_UTF8 = 2,
  TTR_STATUS_INVALID_ARGUMENT = 3,
  TTR_STATUS_IO = 4,
  TTR_STATUS_FORMAT = 5,
  TTR_STATUS_PANIC = 6,
} TtrStatus;

typedef enum TtrMetric {
  TTR_METRIC_DOT = 0,
  TTR_METRIC_COSINE = 1,
} TtrMetric;

// Dense embedding index handle.
typedef struct TtrDenseIndex TtrDenseIndex;

// Ranked search results.
typedef struct TtrHits TtrHits;

// BM25 index handle.
typedef struct TtrSparseIndex TtrSparseIndex;

// Message for the last failed call on this thread, or "" after a success.
// The pointer stays valid until the next `ttr_` call on the same thread.
const char *ttr_last_error(void);

// Library version as a static string.
const char *ttr_version(void);

// Builds a BM25 index over `n` passages given as parallel id/text arrays.
//
// # Safety
// `ids` and `texts` must point to `n` valid C strings each; `out` must be
// writable.
enum TtrStatus ttr_sparse_build(const char *const *ids,
                                const char *const *texts,
                                size_t n,
                                double k1,
                                double b,
                                struct TtrSparseIndex **out);

// Loads a BMI1 index file.
//
// # Safety
// `path` must be a valid C string; `out` must be writable.
enum TtrStatus ttr_sparse_load(const char *path, struct TtrSparseIndex **out);

// Writes the index as a BMI1 file, atomically.
//
// # Safety
// `index` must come from this library; `path` must be a valid C string.
enum TtrStatus ttr_sparse_save(const struct TtrSparseIndex *index, const char *path);

// Number of indexed documents.
//
// # Safety
// `index` must come from this library; `out` must be writable.
enum TtrStatus ttr_sparse_doc_count(const struct TtrSparseIndex *index, size_t *out);

// Top-`k` BM25 hits for `query`.
//
// # Safety
// `index` must come from this library; `query` must be a valid C string;
// `out` must be writable.
enum TtrStatus ttr_sparse_search(const struct TtrSparseIndex *index,
                                 const char *query,
                                 size_t k,
                                 struct TtrHits **out);

// Releases an index. Null is ignored.
//
// # Safety
// `index` must come from this library and not be used afterwards.
void ttr_sparse_free(struct TtrSparseIndex *index);

// Builds a dense index from `count` row-major vectors of width `dim`.
//
// # Safety
// `ids` must point to `count` valid C strings, `data` to `count * dim`
// floats; `out` must be writable.
enum TtrStatus ttr_dense_new(const char *const *ids,
                             const float *data,
                             size_t count,
                             size_t dim,
                             struct TtrDenseIndex **out);

// Loads an EMB1 embedding file.
//
// # Safety
// `path` must be a valid C string; `out` must be writable.
enum TtrStatus ttr_dense_load(const char *path, struct TtrDenseIndex **out);

// Embedding width of the index.
//
// # Safety
// `index` must come from this library; `out` must be writable.
enum TtrStatus ttr_dense_dim(const struct TtrDenseIndex *index, size_t *out);

// Exact top-`k` search with a query vector of length `dim`.
//
// # Safety
// `index` must come from this library; `query` must point to `dim`
// floats; `out` must be writable.
enum TtrStatus ttr_dense_search(const struct TtrDenseIndex *index,
                                const float *query,
                                size_t dim,
                                size_t k,
                                enum TtrMetric metric,
                                struct TtrHits **out);

// Releases a dense index. Null is ignored.
//
// # Safety
// `index` must come from this library and not be used afterwards.
void ttr_dense_free(struct TtrDenseIndex *index);

// Number of hits.
//
// # Safety
// `hits` must come from this library or be null.
size_t ttr_hits_len(const struct TtrHits *hits);

// Document id of hit `i` (0-based, best first), or null when out of range.
// Owned by `hits`.
//
// # Safety
// `hits` must come from this library or be null.
const char *ttr_hits_doc_id(const struct TtrHits *hits, size_t i);

// Score of hit `i`, or NaN when out of range.
//
// # Safety
// `hits` must come from this library or be null.
double ttr_hits_score(const struct TtrHits *hits, size_t i);

// Releases a result set. Null is ignored.
//
// # Safety
// `hits` must come from this library and not be used afterwards.
void ttr_hits_free(struct TtrHits *hits);

// Feature-hashed unit vector of `text`, written to `out[0..dim]`.
//
// # Safety
// `text` must be a valid C string; `out` must hold `dim` floats.
enum TtrStatus ttr_hash_embed(const char *text, size_t dim, uint64_t seed, float *out);

// Ratcliff-Obershelp similarity of two strings, in [0, 100].
//
// # Safety
// `a` and `b` must be valid C strings; `out` must be writable.
enum TtrStatus ttr_gestalt_ratio(const char *a, const char *b, double *out);

// Token-set overlap of a question with a document, in [0, 100].
//
// # Safety
// `question` and `doc` must be valid C strings; `out` must be writable.
enum TtrStatus ttr_token_set_overlap(const char *question, const char *doc, double *out);

#endif  /* TTR_H */

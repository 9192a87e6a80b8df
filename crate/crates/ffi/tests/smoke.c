#include <math.h>
#include <stdio.h>
#include <string.h>

#include "ttr.h"

#define CHECK(cond)                                                   \
  do {                                                                \
    if (!(cond)) {                                                    \
      fprintf(stderr, "%s:%d: %s (%s)\n", __FILE__, __LINE__, #cond, \
              ttr_last_error());                                      \
      return 1;                                                       \
    }                                                                 \
  } while (0)

int main(void) {
  const char *ids[] = {"text:a", "text:b", "table:c"};
  const char *texts[] = {"eiffel tower paris", "tower of london",
                         "Year , Winner | 2008 , Phelps"};
  TtrSparseIndex *index = NULL;
  CHECK(ttr_sparse_build(ids, texts, 3, 1.2, 0.75, &index) == TTR_STATUS_OK);

  TtrHits *hits = NULL;
  CHECK(ttr_sparse_search(index, "phelps tower", 2, &hits) == TTR_STATUS_OK);
  CHECK(ttr_hits_len(hits) == 2);
  CHECK(strcmp(ttr_hits_doc_id(hits, 0), "table:c") == 0);
  ttr_hits_free(hits);

  CHECK(ttr_sparse_search(index, "tower", 0, &hits) ==
        TTR_STATUS_INVALID_ARGUMENT);
  CHECK(hits == NULL);
  CHECK(strlen(ttr_last_error()) > 0);
  ttr_sparse_free(index);

  float v[32];
  CHECK(ttr_hash_embed("eiffel tower", 32, 1, v) == TTR_STATUS_OK);
  double norm = 0;
  for (int i = 0; i < 32; i++) norm += v[i] * v[i];
  CHECK(fabs(norm - 1.0) < 1e-5);

  TtrDenseIndex *dense = NULL;
  const char *one[] = {"text:a"};
  CHECK(ttr_dense_new(one, v, 1, 32, &dense) == TTR_STATUS_OK);
  CHECK(ttr_dense_search(dense, v, 32, 5, TTR_METRIC_COSINE, &hits) ==
        TTR_STATUS_OK);
  CHECK(ttr_hits_len(hits) == 1);
  ttr_hits_free(hits);
  ttr_dense_free(dense);

  double r = 0;
  CHECK(ttr_gestalt_ratio("abcd", "bcd", &r) == TTR_STATUS_OK);
  CHECK(fabs(r - 85.714285) < 1e-4);

  CHECK(ttr_sparse_load("/nonexistent.bmi", &index) == TTR_STATUS_IO);
  printf("ok %s\n", ttr_version());
  return 0;
}

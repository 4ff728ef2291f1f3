#ifndef CATRANK_H
#define CATRANK_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stddef.h>
#include <stdint.h>

/**
 * Result of every call.
 */
typedef enum CatrankStatus {
  CATRANK_STATUS_OK = 0,
  CATRANK_STATUS_NULL_POINTER = 1,
  CATRANK_STATUS_INVALID_UTF8 = 2,
  CATRANK_STATUS_IO = 3,
  CATRANK_STATUS_CONFIG = 4,
  CATRANK_STATUS_PARSE = 5,
  CATRANK_STATUS_DATA = 6,
  CATRANK_STATUS_SHAPE = 7,
  CATRANK_STATUS_NUMERICAL = 8,
  CATRANK_STATUS_VERSION = 9,
  CATRANK_STATUS_BUFFER_TOO_SMALL = 10,
  CATRANK_STATUS_PANIC = 11,
} CatrankStatus;

typedef enum CatrankMode {
  CATRANK_MODE_TEXT_ONLY = 0,
  CATRANK_MODE_META_ONLY = 1,
  CATRANK_MODE_JOINT = 2,
} CatrankMode;

typedef enum CatrankGain {
  /**
   * `2^r - 1`
   */
  CATRANK_GAIN_EXPONENTIAL = 0,
  /**
   * `r`
   */
  CATRANK_GAIN_LINEAR = 1,
} CatrankGain;

/**
 * Opaque model handle.
 */
typedef struct CatrankModel CatrankModel;

/**
 * A document as seen by the scorer: raw text, tokenized on the Rust side,
 * plus its meta labels. `labels` may be null when `label_count` is 0.
 */
typedef struct CatrankDocument {
  const char *text;
  const char *const *labels;
  size_t label_count;
} CatrankDocument;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Size in bytes, including the NUL, of the last error message on this
 * thread; 1 when the last call succeeded.
 */
size_t catrank_last_error_length(void);

/**
 * Copies the last error message on this thread into `buf`. Does not reset
 * the stored message.
 *
 * # Safety
 * `buf` must be valid for `len` bytes.
 */
enum CatrankStatus catrank_last_error_message(char *buf, size_t len);

/**
 * Loads a model file written by `catrank train`.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a valid pointer.
 */
enum CatrankStatus catrank_model_load(const char *path, struct CatrankModel **out);

/**
 * Releases a model. Null is ignored.
 *
 * # Safety
 * `model` must come from [`catrank_model_load`] and not be used afterwards.
 */
void catrank_model_free(struct CatrankModel *model);

/**
 * # Safety
 * `model` and `out` must be valid pointers.
 */
enum CatrankStatus catrank_model_mode(const struct CatrankModel *model, enum CatrankMode *out);

/**
 * Relevance score of `doc` for `query`, in (-1, 1).
 *
 * # Safety
 * All pointers must be valid; strings inside the documents NUL-terminated.
 */
enum CatrankStatus catrank_model_score(const struct CatrankModel *model,
                                       const struct CatrankDocument *query,
                                       const struct CatrankDocument *doc,
                                       double *out);

/**
 * Ranks `docs` for `query`. `order` receives indices into `docs` by
 * descending score, ties by ascending index; `scores` (optional) receives
 * the matching scores. Both must hold `count` elements.
 *
 * # Safety
 * `docs` must point to `count` documents, `order` to `count` writable
 * elements, and `scores` to `count` elements or be null.
 */
enum CatrankStatus catrank_model_rank(const struct CatrankModel *model,
                                      const struct CatrankDocument *query,
                                      const struct CatrankDocument *docs,
                                      size_t count,
                                      size_t *order,
                                      double *scores);

/**
 * Tokenizes `text` as the ranker does and writes the tokens joined by
 * single spaces. `needed` (optional) receives the buffer size required.
 *
 * # Safety
 * `text` must be NUL-terminated; `buf` valid for `len` bytes.
 */
enum CatrankStatus catrank_tokenize(const char *text, char *buf, size_t len, size_t *needed);

/**
 * NDCG without cutoff. `ranked` holds the grades of a ranking in rank
 * order; `judged` holds the grades of every judged document of the query,
 * which determine the ideal ordering. Fails with `Data` when no judged
 * grade is positive.
 *
 * # Safety
 * `ranked` and `judged` must point to `ranked_len` and `judged_len` bytes.
 */
enum CatrankStatus catrank_ndcg(const uint8_t *ranked,
                                size_t ranked_len,
                                const uint8_t *judged,
                                size_t judged_len,
                                enum CatrankGain gain,
                                double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CATRANK_H */

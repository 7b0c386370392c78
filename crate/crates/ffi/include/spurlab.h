#ifndef SPURLAB_H
#define SPURLAB_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes. `Ok` is zero.
 */
typedef enum SpurlabStatus {
  SPURLAB_STATUS_OK = 0,
  SPURLAB_STATUS_NULL_POINTER = 1,
  SPURLAB_STATUS_INVALID_UTF8 = 2,
  SPURLAB_STATUS_CONFIG = 3,
  SPURLAB_STATUS_PARSE = 4,
  SPURLAB_STATUS_ARGUMENT = 5,
  SPURLAB_STATUS_DATASET = 6,
  SPURLAB_STATUS_NUMERIC = 7,
  SPURLAB_STATUS_MODEL_FILE = 8,
  SPURLAB_STATUS_PLANTING = 9,
  SPURLAB_STATUS_IO = 10,
  SPURLAB_STATUS_BUFFER_TOO_SMALL = 11,
  SPURLAB_STATUS_PANIC = 12,
} SpurlabStatus;

/**
 * A loaded model (language model, head and optional prompts).
 */
typedef struct SpurlabModel SpurlabModel;

/**
 * A vocabulary, plus the bias spec when one was found next to it.
 */
typedef struct SpurlabVocab SpurlabVocab;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the calling thread's last error message into `buf` (NUL-terminated,
 * truncated to `len`). Returns the full message length excluding the NUL.
 *
 * # Safety
 * `buf` must be null or valid for `len` bytes.
 */
size_t spurlab_last_error_message(char *buf, size_t len);

/**
 * Loads a model file. On success `*out` owns a new handle.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
enum SpurlabStatus spurlab_model_load(const char *path, struct SpurlabModel **out);

/**
 * Releases a model handle. Null is ignored.
 *
 * # Safety
 * `model` must come from [`spurlab_model_load`] and not be used afterwards.
 */
void spurlab_model_free(struct SpurlabModel *model);

/**
 * Representation width d, or 0 for a null handle.
 *
 * # Safety
 * `model` must be null or a live handle.
 */
size_t spurlab_model_dim(const struct SpurlabModel *model);

/**
 * Vocabulary size |V|, or 0 for a null handle.
 *
 * # Safety
 * `model` must be null or a live handle.
 */
size_t spurlab_model_vocab_size(const struct SpurlabModel *model);

/**
 * Loads `vocab.tsv`, and `bias.txt` if present, from a directory.
 *
 * # Safety
 * `dir` must be a NUL-terminated string; `out` must be writable.
 */
enum SpurlabStatus spurlab_vocab_load(const char *dir, struct SpurlabVocab **out);

/**
 * Releases a vocabulary handle. Null is ignored.
 *
 * # Safety
 * `vocab` must come from [`spurlab_vocab_load`] and not be used afterwards.
 */
void spurlab_vocab_free(struct SpurlabVocab *vocab);

/**
 * Number of tokens, or 0 for a null handle.
 *
 * # Safety
 * `vocab` must be null or a live handle.
 */
size_t spurlab_vocab_len(const struct SpurlabVocab *vocab);

/**
 * Token id of a surface form. `s_pos` and `s_neg` name the spurious tokens
 * when a bias spec was loaded.
 *
 * # Safety
 * `vocab` must be a live handle, `surface` NUL-terminated, `out_id` writable.
 */
enum SpurlabStatus spurlab_vocab_lookup(const struct SpurlabVocab *vocab,
                                        const char *surface,
                                        size_t *out_id);

/**
 * Writes the d-dimensional representation of `token` (from `BOS token EOS`)
 * into `out`, which must hold at least d values.
 *
 * # Safety
 * `model` must be a live handle; `out` valid for `len` doubles.
 */
enum SpurlabStatus spurlab_token_representation(const struct SpurlabModel *model,
                                                size_t token,
                                                double *out,
                                                size_t len);

/**
 * Class probabilities for a sentence of token ids (BOS/EOS added
 * internally). `out` must hold at least C values.
 *
 * # Safety
 * `model` must be a live handle; `tokens` valid for `n` ids; `out` valid for
 * `len` doubles.
 */
enum SpurlabStatus spurlab_predict(const struct SpurlabModel *model,
                                   const size_t *tokens,
                                   size_t n,
                                   double *out,
                                   size_t len);

/**
 * Top-`k` cosine neighbors of `target`, specials and the target excluded.
 * Writes `k` ids and similarities.
 *
 * # Safety
 * Handles must be live; `out_ids` and `out_cosines` valid for `k` values.
 */
enum SpurlabStatus spurlab_nearest_neighbors(const struct SpurlabModel *model,
                                             const struct SpurlabVocab *vocab,
                                             size_t target,
                                             size_t k,
                                             size_t *out_ids,
                                             double *out_cosines);

/**
 * Spurious score of `target`: rank-paired polarity change, under
 * `reference`, between the top-`k` neighbors of the initial and fine-tuned
 * models.
 *
 * # Safety
 * Handles must be live; `out_sum` and `out_mean` writable.
 */
enum SpurlabStatus spurlab_spurious_score(const struct SpurlabModel *reference,
                                          const struct SpurlabModel *initial,
                                          const struct SpurlabModel *finetuned,
                                          const struct SpurlabVocab *vocab,
                                          size_t target,
                                          size_t k,
                                          double *out_sum,
                                          double *out_mean);

/**
 * Library version as a static NUL-terminated string.
 */
const char *spurlab_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SPURLAB_H */

#ifndef RAGPLAN_H
#define RAGPLAN_H

/* Generated by cbindgen. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum RagplanStatus {
  RAGPLAN_STATUS_OK = 0,
  RAGPLAN_STATUS_NULL_POINTER = 1,
  RAGPLAN_STATUS_INVALID_UTF8 = 2,
  RAGPLAN_STATUS_INVALID_ARGUMENT = 3,
  RAGPLAN_STATUS_PARSE = 4,
  RAGPLAN_STATUS_VALIDATION = 5,
  RAGPLAN_STATUS_SIZE_GUARD = 6,
  RAGPLAN_STATUS_ORACLE = 7,
  RAGPLAN_STATUS_IO = 8,
  RAGPLAN_STATUS_INTERNAL = 9,
} RagplanStatus;

typedef enum RagplanSolver {
  RAGPLAN_SOLVER_PARETO_DP = 0,
  RAGPLAN_SOLVER_EXACT = 1,
} RagplanSolver;

/**
 * A loaded corpus with its sparse index.
 */
typedef struct RagplanCorpus RagplanCorpus;

/**
 * A validated MMKP instance.
 */
typedef struct RagplanInstance RagplanInstance;

/**
 * Weights applied to (entail, neutral, contradict) probabilities.
 */
typedef struct RagplanRewardWeights {
  double w_ent;
  double w_neu;
  double w_con;
} RagplanRewardWeights;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string. Do not free.
 */
const char *ragplan_version(void);

/**
 * Message for the last failed call on this thread, or NULL.
 *
 * The pointer stays valid until the next call into this library on the
 * same thread. Do not free it.
 */
const char *ragplan_last_error(void);

/**
 * Releases a string returned by this library. NULL is ignored.
 *
 * # Safety
 * `s` must come from this library and must not be freed twice.
 */
void ragplan_string_free(char *s);

/**
 * Default reward weights (1, -0.2, -2).
 */
struct RagplanRewardWeights ragplan_reward_weights_default(void);

/**
 * Loads a JSONL corpus file. Chunks without an embedding get a hashed one
 * of dimension `dim`. `max_features` of 0 selects the default vocabulary cap.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a valid pointer.
 */
enum RagplanStatus ragplan_corpus_load(const char *path,
                                       size_t dim,
                                       size_t max_features,
                                       struct RagplanCorpus **out);

/**
 * Same as [`ragplan_corpus_load`] but reads JSONL from memory.
 *
 * # Safety
 * `jsonl` must be a NUL-terminated string and `out` a valid pointer.
 */
enum RagplanStatus ragplan_corpus_parse(const char *jsonl,
                                        size_t dim,
                                        size_t max_features,
                                        struct RagplanCorpus **out);

/**
 * Number of chunks, or 0 for NULL.
 *
 * # Safety
 * `corpus` must be NULL or a live handle.
 */
size_t ragplan_corpus_len(const struct RagplanCorpus *corpus);

/**
 * # Safety
 * `corpus` must be NULL or a handle not yet freed.
 */
void ragplan_corpus_free(struct RagplanCorpus *corpus);

/**
 * Hybrid retrieval of the top `n` chunks for `query`, written as a JSON
 * array of `{chunk_id, dense_rank, sparse_rank, fusion_score, dense_sim}`.
 *
 * # Safety
 * `corpus` must be a live handle, `query` a NUL-terminated string and
 * `out_json` a valid pointer. Free the result with [`ragplan_string_free`].
 */
enum RagplanStatus ragplan_retrieve(const struct RagplanCorpus *corpus,
                                    const char *query,
                                    size_t n,
                                    char **out_json);

/**
 * Retrieves `n` candidates and picks a budgeted, non-redundant context.
 *
 * `params_json` may be NULL for defaults, or a JSON object with any of
 * `c_token`, `c_red`, `alpha`, `beta`, `tau`, `lambda_red`. The result is
 * `{"context": [...], "total_value": v, "total_cost": {...}}`.
 *
 * # Safety
 * Pointers as in [`ragplan_retrieve`]; `params_json` may be NULL.
 */
enum RagplanStatus ragplan_select_context(const struct RagplanCorpus *corpus,
                                          const char *query,
                                          size_t n,
                                          const char *params_json,
                                          char **out_json);

/**
 * Parses and validates an MMKP instance from JSON.
 *
 * # Safety
 * `json` must be a NUL-terminated string and `out` a valid pointer.
 */
enum RagplanStatus ragplan_instance_parse(const char *json, struct RagplanInstance **out);

/**
 * # Safety
 * `instance` must be NULL or a handle not yet freed.
 */
void ragplan_instance_free(struct RagplanInstance *instance);

/**
 * Solves an instance and writes the solution as JSON with `selected`,
 * `total_value`, `total_cost` and `picks`.
 *
 * # Safety
 * `instance` must be a live handle and `out_json` a valid pointer.
 */
enum RagplanStatus ragplan_solve(const struct RagplanInstance *instance,
                                 enum RagplanSolver solver,
                                 char **out_json);

/**
 * Approximate 0/1 knapsack with value at least `(1 - eps)` of optimal.
 *
 * Selected indices are written ascending into `out_selected`, which must
 * hold `n` entries; their count goes to `out_count` and the total value to
 * `out_value`.
 *
 * # Safety
 * `values` and `weights` must point to `n` readable doubles, `out_selected`
 * to `n` writable entries, and the scalar outputs must be valid.
 */
enum RagplanStatus ragplan_fptas(const double *values,
                                 const double *weights,
                                 size_t n,
                                 double capacity,
                                 double eps,
                                 size_t *out_selected,
                                 size_t *out_count,
                                 double *out_value);

/**
 * Writes the unit-norm hashed bag-of-words embedding of `text` into
 * `out`, which must hold `dim` doubles.
 *
 * # Safety
 * `text` must be a NUL-terminated string and `out` must point to `dim`
 * writable doubles.
 */
enum RagplanStatus ragplan_hash_embed(const char *text, size_t dim, double *out);

/**
 * Faithfulness reward of `answer` against `n_evidence` evidence strings,
 * judged by the built-in lexical verifier. `weights` may be NULL for the
 * defaults.
 *
 * # Safety
 * `answer` must be a NUL-terminated string, `evidence` must point to
 * `n_evidence` NUL-terminated strings, `weights` must be NULL or valid and
 * `out_reward` must be valid.
 */
enum RagplanStatus ragplan_reward(const char *answer,
                                  const char *const *evidence,
                                  size_t n_evidence,
                                  const struct RagplanRewardWeights *weights,
                                  double *out_reward);

/**
 * Runs the full evaluation with mock oracles or the remote endpoints named
 * in the config, and writes the JSONL report.
 *
 * `config_toml` may be NULL for the default configuration.
 *
 * # Safety
 * String arguments must be NUL-terminated (`config_toml` may be NULL) and
 * `out_jsonl` must be valid.
 */
enum RagplanStatus ragplan_eval(const char *config_toml,
                                const char *corpus_path,
                                const char *queries_path,
                                char **out_jsonl);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* RAGPLAN_H */

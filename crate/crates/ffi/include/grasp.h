#ifndef GRASP_H
#define GRASP_H

#include <stddef.h>
#include <stdint.h>

typedef enum GraspStatus {
  GRASP_STATUS_OK = 0,
  GRASP_STATUS_NULL_POINTER = 1,
  GRASP_STATUS_INVALID_ARGUMENT = 2,
  GRASP_STATUS_IO = 3,
  GRASP_STATUS_CONFIG = 4,
  GRASP_STATUS_STAGE = 5,
  GRASP_STATUS_CLIENT = 6,
  GRASP_STATUS_CALLBACK = 7,
  GRASP_STATUS_PANIC = 8,
} GraspStatus;

// A clustered example pool.
typedef struct GraspPool GraspPool;

// A finished GA run.
typedef struct GraspRun GraspRun;

typedef struct GraspGene {
  size_t cluster;
  size_t example;
} GraspGene;

typedef struct GraspGaConfig {
  size_t mu;
  size_t lambda;
  size_t max_generations;
  double p_cx;
  double p_mut;
  size_t tournament_size;
  double p_min;
  double p_max;
  size_t warmup;
  size_t patience;
  double min_relative_improvement;
  uint64_t seed;
  size_t shots;
  // Upper bound on concurrent fitness calls.
  size_t eval_workers;
} GraspGaConfig;

// Scores a genome. Writes the fitness to `out_fitness` and returns 0, or
// returns non-zero to abort the run. May be called from several threads at
// once unless `eval_workers` is 1.
typedef int (*GraspFitnessCallback)(void *user_data,
                                    const struct GraspGene *genes,
                                    size_t n_genes,
                                    double *out_fitness);

typedef struct GraspGenerationRecord {
  size_t generation;
  double mean_fitness;
  double best_fitness;
  double diversity;
  double p_inter;
  size_t evaluations;
} GraspGenerationRecord;

typedef struct GraspMetrics {
  double micro_precision;
  double micro_recall;
  double micro_f1;
  double macro_f1;
} GraspMetrics;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the last failed call on this thread; empty after a success.
// The pointer stays valid until the next call on this thread.
const char *grasp_last_error(void);

// Library version as a static string.
const char *grasp_version(void);

// Releases a string returned by this library. Null is ignored.
//
// # Safety
// `s` must come from this library and not have been freed already.
void grasp_string_free(char *s);

// Inter-cluster mutation probability for diversity `d`.
double grasp_inter_probability(double d, double p_min, double p_max);

// Clusters `n` row-major points of width `dim`. Writes one label per point
// into `out_labels` (-1 for noise) and the cluster count into
// `out_n_clusters`.
//
// # Safety
// `points` must hold `n * dim` values and `out_labels` room for `n`.
enum GraspStatus grasp_cluster(const double *points,
                               size_t n,
                               size_t dim,
                               size_t min_cluster_size,
                               size_t min_samples,
                               double cluster_selection_epsilon,
                               int64_t *out_labels,
                               size_t *out_n_clusters);

// Builds a pool of placeholder examples (ids `x0`, `x1`, ...) with the given
// cluster labels. Labels need not be dense.
//
// # Safety
// `labels` must hold `n` values; `out` must be writable.
enum GraspStatus grasp_pool_from_labels(const size_t *labels, size_t n, struct GraspPool **out);

// Loads examples (JSON lines) and a cluster assignment table (`id<TAB>cluster`,
// -1 for noise). Noise examples are dropped.
//
// # Safety
// Paths must be NUL-terminated; `out` must be writable.
enum GraspStatus grasp_pool_load(const char *examples_path,
                                 const char *assignment_path,
                                 struct GraspPool **out);

// Draws a pool of `k` examples round-robin over the clusters of `pool`.
//
// # Safety
// `pool` must be a live pool handle; `out` must be writable.
enum GraspStatus grasp_pool_round_robin(const struct GraspPool *pool,
                                        size_t k,
                                        struct GraspPool **out);

// Number of examples; 0 for null.
//
// # Safety
// `pool` must be null or a live pool handle.
size_t grasp_pool_len(const struct GraspPool *pool);

// Number of clusters; 0 for null.
//
// # Safety
// `pool` must be null or a live pool handle.
size_t grasp_pool_n_clusters(const struct GraspPool *pool);

// Size of cluster `c`; 0 for null or out of range.
//
// # Safety
// `pool` must be null or a live pool handle.
size_t grasp_pool_cluster_size(const struct GraspPool *pool, size_t c);

// Identifier of the example a gene points at, or null when out of range.
// The caller frees the string.
//
// # Safety
// `pool` must be null or a live pool handle.
char *grasp_pool_example_id(const struct GraspPool *pool, struct GraspGene gene);

// # Safety
// `pool` must be null or a handle not yet freed.
void grasp_pool_free(struct GraspPool *pool);

// The library defaults.
struct GraspGaConfig grasp_ga_config_default(void);

// Runs the GA with the offline surrogate fitness seeded by `surrogate_seed`.
//
// # Safety
// `pool` and `config` must be valid; `out` must be writable.
enum GraspStatus grasp_evolve_surrogate(const struct GraspPool *pool,
                                        const struct GraspGaConfig *config,
                                        uint64_t surrogate_seed,
                                        struct GraspRun **out);

// Runs the GA with a caller-supplied fitness function.
//
// # Safety
// `pool` and `config` must be valid, `out` writable, and `callback` safe to
// call with `user_data` for the whole run.
enum GraspStatus grasp_evolve(const struct GraspPool *pool,
                              const struct GraspGaConfig *config,
                              GraspFitnessCallback callback,
                              void *user_data,
                              struct GraspRun **out);

// Best fitness found; NaN for null.
//
// # Safety
// `run` must be null or a live run handle.
double grasp_run_best_fitness(const struct GraspRun *run);

// Number of trace records (generation 0 included); 0 for null.
//
// # Safety
// `run` must be null or a live run handle.
size_t grasp_run_generations(const struct GraspRun *run);

// Copies trace record `i` into `out`.
//
// # Safety
// `run` must be a live run handle and `out` writable.
enum GraspStatus grasp_run_record(const struct GraspRun *run,
                                  size_t i,
                                  struct GraspGenerationRecord *out);

// Copies up to `capacity` genes of the best genome into `out` and writes
// the genome length to `out_len`. Pass `capacity` 0 to query the length.
//
// # Safety
// `run` must be a live run handle, `out` must hold `capacity` genes and
// `out_len` must be writable.
enum GraspStatus grasp_run_best_genes(const struct GraspRun *run,
                                      struct GraspGene *out,
                                      size_t capacity,
                                      size_t *out_len);

// The trace as tab-separated text with a header row. The caller frees the
// string; null for a null run.
//
// # Safety
// `run` must be null or a live run handle.
char *grasp_run_trace_tsv(const struct GraspRun *run);

// # Safety
// `run` must be null or a handle not yet freed.
void grasp_run_free(struct GraspRun *run);

// Scores predictions (`{"id", "entities"}` lines) against gold examples.
// Gold examples without a prediction count as empty predictions; predictions
// for unknown ids are an error.
//
// # Safety
// Paths must be NUL-terminated; `out` must be writable.
enum GraspStatus grasp_score_jsonl(const char *gold_path,
                                   const char *predictions_path,
                                   struct GraspMetrics *out);

// Runs every stage of the pipeline described by a TOML config, resuming
// completed stages. `output_dir` overrides the configured one when non-null.
//
// # Safety
// `config_path` must be NUL-terminated; `output_dir` null or NUL-terminated.
enum GraspStatus grasp_run_pipeline(const char *config_path, const char *output_dir);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* GRASP_H */

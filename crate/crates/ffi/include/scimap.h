#ifndef SCIMAP_H
#define SCIMAP_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum ScimapStatus {
  SCIMAP_STATUS_OK = 0,
  SCIMAP_STATUS_NULL_POINTER = 1,
  SCIMAP_STATUS_INVALID_ARGUMENT = 2,
  /**
   * The computation rejected its input (empty graph, mismatched partitions, ...).
   */
  SCIMAP_STATUS_FAILED = 3,
  SCIMAP_STATUS_PANIC = 4,
} ScimapStatus;

/**
 * Weighted undirected paper graph.
 */
typedef struct ScimapGraph ScimapGraph;

/**
 * Paper → cluster assignment with labels 1..k.
 */
typedef struct ScimapPartition ScimapPartition;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message from the most recent call on this thread; empty after a success.
 * The pointer stays valid until the next call into this library on the thread.
 */
const char *scimap_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *scimap_version(void);

/**
 * Build a graph over `nodes` from `n_edges` triples `(us[i], vs[i], weights[i])`.
 * `mode` is 0 for bibliographic coupling, 1 for direct citation.
 *
 * # Safety
 * Array arguments must point to at least as many readable elements as their
 * counts say, and `out` must be writable.
 */
enum ScimapStatus scimap_graph_new(uint32_t mode,
                                   const uint64_t *nodes,
                                   size_t n_nodes,
                                   const uint64_t *us,
                                   const uint64_t *vs,
                                   const double *weights,
                                   size_t n_edges,
                                   struct ScimapGraph **out);

/**
 * # Safety
 * `graph` must come from [`scimap_graph_new`] and not be used afterwards.
 */
void scimap_graph_free(struct ScimapGraph *graph);

/**
 * # Safety
 * `graph` must be a live handle or null.
 */
size_t scimap_graph_node_count(const struct ScimapGraph *graph);

/**
 * # Safety
 * `graph` must be a live handle or null.
 */
size_t scimap_graph_edge_count(const struct ScimapGraph *graph);

/**
 * Partition from `(ids[i], labels[i])` pairs. Labels may be any integers;
 * they are renumbered 1..k by decreasing cluster size.
 *
 * # Safety
 * `ids` and `labels` must hold `n` readable elements; `out` must be writable.
 */
enum ScimapStatus scimap_partition_new(const uint64_t *ids,
                                       const uint32_t *labels,
                                       size_t n,
                                       struct ScimapPartition **out);

/**
 * # Safety
 * `partition` must come from this library and not be used afterwards.
 */
void scimap_partition_free(struct ScimapPartition *partition);

/**
 * Number of clusters, 0 for a null handle.
 *
 * # Safety
 * `partition` must be a live handle or null.
 */
size_t scimap_partition_k(const struct ScimapPartition *partition);

/**
 * Number of assigned nodes, 0 for a null handle.
 *
 * # Safety
 * `partition` must be a live handle or null.
 */
size_t scimap_partition_len(const struct ScimapPartition *partition);

/**
 * Copy the assignment, ordered by id, into `ids` and `labels` (capacity `cap`).
 *
 * # Safety
 * `ids` and `labels` must be writable for `cap` elements.
 */
enum ScimapStatus scimap_partition_assignment(const struct ScimapPartition *partition,
                                              uint64_t *ids,
                                              uint32_t *labels,
                                              size_t cap);

/**
 * Louvain communities at `resolution`, reproducible for a fixed `seed`.
 *
 * # Safety
 * `graph` must be live and `out` writable.
 */
enum ScimapStatus scimap_louvain(const struct ScimapGraph *graph,
                                 double resolution,
                                 uint64_t seed,
                                 struct ScimapPartition **out);

/**
 * Search the resolution for `target_k` clusters. `resolution` and `exact`
 * may be null.
 *
 * # Safety
 * `graph` must be live; non-null output pointers must be writable.
 */
enum ScimapStatus scimap_tune_resolution(const struct ScimapGraph *graph,
                                         size_t target_k,
                                         uint64_t seed,
                                         struct ScimapPartition **out,
                                         double *resolution,
                                         bool *exact);

/**
 * Modularity of `partition` on `graph` at `resolution` (1.0 for the standard score).
 *
 * # Safety
 * Handles must be live and `out` writable.
 */
enum ScimapStatus scimap_modularity(const struct ScimapGraph *graph,
                                    const struct ScimapPartition *partition,
                                    double resolution,
                                    double *out);

/**
 * Adjusted Rand index of two partitions of the same ids.
 *
 * # Safety
 * Handles must be live and `out` writable.
 */
enum ScimapStatus scimap_ari(const struct ScimapPartition *a,
                             const struct ScimapPartition *b,
                             double *out);

/**
 * Maximum-sum one-to-one matching on a row-major `k × k` score matrix.
 * `cols[r]` receives the column matched to row `r`; `total` may be null.
 *
 * # Safety
 * `matrix` must hold `k*k` readable values and `cols` `k` writable slots.
 */
enum ScimapStatus scimap_optimal_alignment(const double *matrix,
                                           size_t k,
                                           size_t *cols,
                                           double *total);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SCIMAP_H */

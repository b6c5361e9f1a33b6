#ifndef SOMRL_H
#define SOMRL_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every fallible call.
 */
typedef enum SomrlStatus {
  SOMRL_STATUS_OK = 0,
  SOMRL_STATUS_NULL_POINTER = 1,
  SOMRL_STATUS_INVALID_ARGUMENT = 2,
  SOMRL_STATUS_ZERO_NORM = 3,
  SOMRL_STATUS_IO = 4,
  SOMRL_STATUS_FORMAT = 5,
  SOMRL_STATUS_PANIC = 6,
} SomrlStatus;

typedef enum SomrlRateSchedule {
  SOMRL_RATE_SCHEDULE_RUN_EXPONENT = 0,
  SOMRL_RATE_SCHEDULE_FINAL_FRACTION = 1,
  SOMRL_RATE_SCHEDULE_FRACTION_OF_RUN = 2,
  SOMRL_RATE_SCHEDULE_ITERATIONS = 3,
} SomrlRateSchedule;

typedef enum SomrlGrowthWindow {
  SOMRL_GROWTH_WINDOW_ITERATION = 0,
  SOMRL_GROWTH_WINDOW_EPOCH = 1,
  SOMRL_GROWTH_WINDOW_SINCE_GROWTH = 2,
} SomrlGrowthWindow;

typedef enum SomrlInputOrder {
  SOMRL_INPUT_ORDER_RANDOM = 0,
  SOMRL_INPUT_ORDER_SHUFFLED = 1,
} SomrlInputOrder;

typedef enum SomrlKernel {
  SOMRL_KERNEL_GAUSSIAN = 0,
  SOMRL_KERNEL_UNSQUARED = 1,
} SomrlKernel;

/**
 * A knowledge-base map together with the random stream used to train it.
 */
typedef struct SomrlMap SomrlMap;

/**
 * Training parameters; fill with `somrl_gsom_config_default` and adjust.
 */
typedef struct SomrlGsomConfig {
  size_t initial_rows;
  size_t initial_cols;
  double sigma0;
  double tau1;
  double kappa0;
  double tau2;
  enum SomrlRateSchedule rate_schedule;
  double growth_threshold;
  enum SomrlGrowthWindow growth_window;
  enum SomrlInputOrder input_order;
  size_t iterations;
  enum SomrlKernel kernel;
} SomrlGsomConfig;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or NULL if none failed.
 * The string stays valid until the next failing call on the same thread.
 */
const char *somrl_last_error(void);

/**
 * Writes the default training parameters to `out`.
 *
 * # Safety
 * `out` must be NULL or point to writable memory for one `SomrlGsomConfig`.
 */
enum SomrlStatus somrl_gsom_config_default(struct SomrlGsomConfig *out);

/**
 * Cosine similarity of two vectors of length `len`.
 *
 * # Safety
 * `a` and `b` must point to `len` readable doubles and `out` to one
 * writable double.
 */
enum SomrlStatus somrl_cosine_similarity(const double *a, const double *b, size_t len, double *out);

/**
 * New `rows` x `cols` map of random unit vectors of length `dim`. `seed`
 * fixes both the initial weights and all later training randomness.
 *
 * # Safety
 * `out` must point to writable storage for one handle pointer.
 */
enum SomrlStatus somrl_map_random(size_t rows,
                                  size_t cols,
                                  size_t dim,
                                  uint64_t seed,
                                  struct SomrlMap **out);

/**
 * Map from row-major node weights (`rows * cols * dim` doubles). The nodes
 * count as stored knowledge, so the next `somrl_map_store` integrates with
 * them.
 *
 * # Safety
 * `weights` must point to `rows * cols * dim` readable doubles and `out`
 * to writable storage for one handle pointer.
 */
enum SomrlStatus somrl_map_from_weights(size_t rows,
                                        size_t cols,
                                        size_t dim,
                                        const double *weights,
                                        uint64_t seed,
                                        struct SomrlMap **out);

/**
 * Loads a map written by `somrl_map_save`.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` must point to writable
 * storage for one handle pointer.
 */
enum SomrlStatus somrl_map_load(const char *path, uint64_t seed, struct SomrlMap **out);

/**
 * Writes the map to `path`, echoing `cfg` when it is not NULL.
 *
 * # Safety
 * `map` must be a live handle, `path` a NUL-terminated string and `cfg`
 * NULL or a valid config.
 */
enum SomrlStatus somrl_map_save(const struct SomrlMap *map,
                                const char *path,
                                const struct SomrlGsomConfig *cfg);

/**
 * Releases a handle. NULL is ignored.
 *
 * # Safety
 * `map` must be NULL or a handle not yet freed.
 */
void somrl_map_free(struct SomrlMap *map);

/**
 * Number of nodes; 0 for a NULL handle.
 *
 * # Safety
 * `map` must be NULL or a live handle.
 */
size_t somrl_map_node_count(const struct SomrlMap *map);

/**
 * Grid shape and node length.
 *
 * # Safety
 * `map` must be a live handle; each output pointer may be NULL.
 */
enum SomrlStatus somrl_map_shape(const struct SomrlMap *map,
                                 size_t *rows,
                                 size_t *cols,
                                 size_t *dim);

/**
 * Copies the weights of node `node` (row-major index) into `out`, which
 * must hold `len` = node length doubles.
 *
 * # Safety
 * `map` must be a live handle and `out` must point to `len` writable
 * doubles.
 */
enum SomrlStatus somrl_map_node_weights(const struct SomrlMap *map,
                                        size_t node,
                                        double *out,
                                        size_t len);

/**
 * Row-major index of the node most cosine-similar to `x`.
 *
 * # Safety
 * `map` must be a live handle, `x` must point to `len` readable doubles
 * and `node` to one writable `size_t`.
 */
enum SomrlStatus somrl_map_find_winner(const struct SomrlMap *map,
                                       const double *x,
                                       size_t len,
                                       size_t *node);

/**
 * Source node for target weights `w`: the most similar node and its
 * similarity. Ties go to the lowest index.
 *
 * # Safety
 * `map` must be a live handle, `w` must point to `len` readable doubles,
 * `node` to one writable `size_t` and `similarity` to one writable double.
 */
enum SomrlStatus somrl_map_select_source(const struct SomrlMap *map,
                                         const double *w,
                                         size_t len,
                                         size_t *node,
                                         double *similarity);

/**
 * Stores a learned weight vector. The first vector stored in a random map
 * is trained on alone; later ones are integrated together with the
 * recycled node weights. The map may grow.
 *
 * # Safety
 * `map` must be a live handle not used concurrently, `w` must point to
 * `len` readable doubles and `cfg` must be NULL (defaults) or valid.
 */
enum SomrlStatus somrl_map_store(struct SomrlMap *map,
                                 const double *w,
                                 size_t len,
                                 const struct SomrlGsomConfig *cfg);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SOMRL_H */

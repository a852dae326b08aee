#ifndef PROXCAUSAL_H
#define PROXCAUSAL_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Proxy rule used when discovering a graph.
 */
typedef enum {
  PC_PROXY_RULE_SMALLEST_OTHER = 0,
  PC_PROXY_RULE_MAJORITY_VOTE = 1,
} PcProxyRule;

/**
 * Status codes. `PC_STATUS_OK` is zero; every other value is an error.
 */
typedef enum {
  PC_STATUS_OK = 0,
  PC_STATUS_NULL_POINTER = 1,
  PC_STATUS_INVALID_UTF8 = 2,
  PC_STATUS_UNKNOWN_SCENARIO = 3,
  PC_STATUS_INVALID_MODEL = 4,
  PC_STATUS_UNKNOWN_VARIABLE = 5,
  PC_STATUS_INVALID_DATASET = 6,
  PC_STATUS_NON_FINITE = 7,
  PC_STATUS_TOO_FEW_DISTINCT_VALUES = 8,
  PC_STATUS_EMPTY_BIN = 9,
  PC_STATUS_BIN_UNDERFLOW = 10,
  PC_STATUS_PRECONDITION = 11,
  PC_STATUS_ASSUMPTION_VIOLATION = 12,
  PC_STATUS_DIMENSION_MISMATCH = 13,
  PC_STATUS_SINGULAR_SYSTEM = 14,
  PC_STATUS_DEGENERATE = 15,
  PC_STATUS_CONFIG = 16,
  PC_STATUS_PARSE = 17,
  PC_STATUS_IO = 18,
  PC_STATUS_JSON = 19,
  PC_STATUS_OUT_OF_RANGE = 20,
  PC_STATUS_PANIC = 99,
} PcStatus;

/**
 * A fitted dose-response curve together with its bridges.
 */
typedef struct PcCurve PcCurve;

/**
 * A dataset of tagged columns.
 */
typedef struct PcDataset PcDataset;

/**
 * A discovered or known treatment → outcome graph.
 */
typedef struct PcGraph PcGraph;

/**
 * A structural causal model.
 */
typedef struct PcScm PcScm;

/**
 * Edge-test outcome.
 */
typedef struct {
  double statistic;
  double p_value;
  size_t dof;
  bool reject;
  size_t design_rank;
} PcTestResult;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the most recent failure on this thread, or NULL. The pointer
 * stays valid until the next call into this library on the same thread.
 */
const char *pc_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *pc_version(void);

/**
 * Releases a string returned by this library.
 *
 * # Safety
 * `s` must be NULL or a pointer obtained from this library and not yet freed.
 */
void pc_string_free(char *s);

/**
 * Upper tail of the chi-square law with `k` degrees of freedom. Returns NaN
 * for `k = 0`, negative or non-finite `x`.
 */
double pc_chi_square_sf(double x, size_t k);

/**
 * Built-in scenario by id, e.g. `synthetic-main` or
 * `proxy-strength:10:linear:causal`.
 *
 * # Safety
 * `id` must be a NUL-terminated string; `out` must be writable.
 */
PcStatus pc_scenario_new(const char *id, PcScm **out);

/**
 * Model from its JSON description.
 *
 * # Safety
 * `json` must be a NUL-terminated string; `out` must be writable.
 */
PcStatus pc_scm_from_json(const char *json, PcScm **out);

/**
 * # Safety
 * `scm` must be NULL or a handle from this library not yet freed.
 */
void pc_scm_free(PcScm *scm);

/**
 * Draws `n` samples of the observed variables.
 *
 * # Safety
 * `scm` must be a live handle; `out` must be writable.
 */
PcStatus pc_scm_sample(const PcScm *scm, size_t n, uint64_t seed, PcDataset **out);

/**
 * Monte Carlo `E[outcome | do(treated = dose)]` for one dose vector of
 * length `dim`; `treated` is a comma-separated list.
 *
 * # Safety
 * `scm` must be a live handle; strings NUL-terminated; `dose` must hold
 * `dim` values; `out` must be writable.
 */
PcStatus pc_scm_ground_truth(const PcScm *scm,
                             const char *outcome,
                             const char *treated,
                             const double *dose,
                             size_t dim,
                             size_t replicates,
                             uint64_t seed,
                             double *out);

/**
 * Parses CSV text with `name:a|y|x` headers.
 *
 * # Safety
 * `text` must be a NUL-terminated string; `out` must be writable.
 */
PcStatus pc_dataset_from_csv(const char *text, PcDataset **out);

/**
 * Reads a CSV file.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
PcStatus pc_dataset_read_csv(const char *path, PcDataset **out);

/**
 * Serializes the dataset as CSV.
 *
 * # Safety
 * `ds` must be a live handle; `out` must be writable.
 */
PcStatus pc_dataset_to_csv(const PcDataset *ds, char **out);

/**
 * Number of rows, or 0 for NULL.
 *
 * # Safety
 * `ds` must be NULL or a live handle.
 */
size_t pc_dataset_rows(const PcDataset *ds);

/**
 * Number of columns, or 0 for NULL.
 *
 * # Safety
 * `ds` must be NULL or a live handle.
 */
size_t pc_dataset_columns(const PcDataset *ds);

/**
 * Borrows the values of a named column. The pointer is valid while the
 * dataset lives.
 *
 * # Safety
 * `ds` must be a live handle; `name` NUL-terminated; `values` and `len`
 * writable.
 */
PcStatus pc_dataset_column(const PcDataset *ds,
                           const char *name,
                           const double **values,
                           size_t *len);

/**
 * # Safety
 * `ds` must be NULL or a handle from this library not yet freed.
 */
void pc_dataset_free(PcDataset *ds);

/**
 * Tests `A_i ⊥ Y_j | U` with `proxy` standing in for the confounder, using
 * quantile bins `(m, n, l)`.
 *
 * # Safety
 * `ds` must be a live handle; strings NUL-terminated; `out` writable.
 */
PcStatus pc_test_edge(const PcDataset *ds,
                      const char *treatment,
                      const char *outcome,
                      const char *proxy,
                      size_t m,
                      size_t n,
                      size_t l,
                      double alpha,
                      PcTestResult *out);

/**
 * Tests every treatment/outcome pair and assembles the graph.
 *
 * # Safety
 * `ds` must be a live handle; `out` writable.
 */
PcStatus pc_discover(const PcDataset *ds,
                     size_t m,
                     size_t n,
                     size_t l,
                     double alpha,
                     PcProxyRule rule,
                     PcGraph **out);

/**
 * The graph implied by a model's equations.
 *
 * # Safety
 * `scm` must be a live handle; `out` writable.
 */
PcStatus pc_graph_truth(const PcScm *scm, PcGraph **out);

/**
 * Treatment and outcome counts.
 *
 * # Safety
 * `g` must be a live handle; outputs writable.
 */
PcStatus pc_graph_shape(const PcGraph *g, size_t *treatments, size_t *outcomes);

/**
 * Whether the edge `A_i → Y_j` is present (zero-based indices).
 *
 * # Safety
 * `g` must be a live handle; `present` writable.
 */
PcStatus pc_graph_edge(const PcGraph *g, size_t i, size_t j, bool *present);

/**
 * The graph as JSON (adjacency and p-values).
 *
 * # Safety
 * `g` must be a live handle; `out` writable.
 */
PcStatus pc_graph_to_json(const PcGraph *g, char **out);

/**
 * Admissible proxies `(z, w)` for a target such as `A1,A3->Y1`.
 *
 * # Safety
 * `g` must be a live handle; `target` NUL-terminated; `z`, `w` writable.
 */
PcStatus pc_select_proxies(const PcGraph *g, const char *target, char **z, char **w);

/**
 * # Safety
 * `g` must be NULL or a handle from this library not yet freed.
 */
void pc_graph_free(PcGraph *g);

/**
 * Fits both bridges for `target` with proxies `z`, `w` and evaluates the
 * curve on `grid_points` doses evenly spaced in `[lo, hi]` (the diagonal
 * for joint treatments). `use_q = false` gives the outcome-bridge-only
 * curve.
 *
 * # Safety
 * `ds` must be a live handle; strings NUL-terminated; `out` writable.
 */
PcStatus pc_estimate(const PcDataset *ds,
                     const char *target,
                     const char *z,
                     const char *w,
                     size_t grid_points,
                     double lo,
                     double hi,
                     bool use_q,
                     PcCurve **out);

/**
 * Number of grid points, or 0 for NULL.
 *
 * # Safety
 * `c` must be NULL or a live handle.
 */
size_t pc_curve_len(const PcCurve *c);

/**
 * Dose dimension, or 0 for NULL.
 *
 * # Safety
 * `c` must be NULL or a live handle.
 */
size_t pc_curve_dim(const PcCurve *c);

/**
 * Grid point `k`: writes `dim` dose values into `dose` and the estimate.
 *
 * # Safety
 * `c` must be a live handle; `dose` must hold `pc_curve_dim(c)` values;
 * `estimate` writable.
 */
PcStatus pc_curve_point(const PcCurve *c, size_t k, double *dose, double *estimate);

/**
 * Curve, assignment and bridge models as JSON.
 *
 * # Safety
 * `c` must be a live handle; `out` writable.
 */
PcStatus pc_curve_to_json(const PcCurve *c, char **out);

/**
 * # Safety
 * `c` must be NULL or a handle from this library not yet freed.
 */
void pc_curve_free(PcCurve *c);

/**
 * Runs a benchmark from a flat JSON config (or a previous report) and
 * returns the report JSON.
 *
 * # Safety
 * `config_json` must be NUL-terminated; `out` writable.
 */
PcStatus pc_benchmark(const char *config_json, char **out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PROXCAUSAL_H */

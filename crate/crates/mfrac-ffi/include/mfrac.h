/* C interface of the mfrac dyadic toolkit. */

#pragma once

/* Generated with cbindgen:0.27.0 */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status code of every fallible call.
 */
typedef enum MfStatus {
  MF_STATUS_OK = 0,
  MF_STATUS_NULL_ARGUMENT = 1,
  MF_STATUS_INVALID_ARGUMENT = 2,
  MF_STATUS_FAILED = 3,
} MfStatus;

/**
 * Lebesgue exponents of one operator setup.
 */
typedef struct MfExponents MfExponents;

/**
 * Nonnegative cell-constant function on a system's mesh.
 */
typedef struct MfGrid MfGrid;

/**
 * Stopping-time sparse family.
 */
typedef struct MfSparse MfSparse;

/**
 * Finite analysis window: root box with its dyadic mesh.
 */
typedef struct MfSystem MfSystem;

/**
 * A weight vector with its derived conjugate and product weights.
 */
typedef struct MfWeights MfWeights;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the most recent failure on this thread; valid until the next
 * failing call on the same thread.
 */
const char *mf_last_error_message(void);

/**
 * Static version string of the underlying library.
 */
const char *mf_version(void);

/**
 * Create a system with root `[corner_i, corner_i + side)^n` and mesh level
 * `max_level`.
 *
 * # Safety
 * `corner` must point to `n` readable values; `out` must be writable.
 */
enum MfStatus mf_system_new(const int64_t *corner,
                            uintptr_t n,
                            int64_t side,
                            uint32_t max_level,
                            struct MfSystem **out);

/**
 * # Safety
 * `sys` must come from `mf_system_new` and not have been freed.
 */
void mf_system_free(struct MfSystem *sys);

/**
 * Total number of mesh cells of a system.
 *
 * # Safety
 * `sys` must be a live system handle.
 */
enum MfStatus mf_system_num_cells(const struct MfSystem *sys, uintptr_t *out);

/**
 * Constant grid.
 *
 * # Safety
 * `sys` live handle; `out` writable.
 */
enum MfStatus mf_grid_constant(const struct MfSystem *sys, double value, struct MfGrid **out);

/**
 * Radial power `|x|^{num/den}` discretized as exact cell averages.
 *
 * # Safety
 * `sys` live handle; `out` writable.
 */
enum MfStatus mf_grid_power(const struct MfSystem *sys,
                            int64_t num,
                            int64_t den,
                            struct MfGrid **out);

/**
 * Grid from a caller buffer of `len` cell values (row-major).
 *
 * # Safety
 * `values` must point to `len` readable doubles; `sys` live; `out` writable.
 */
enum MfStatus mf_grid_from_values(const struct MfSystem *sys,
                                  const double *values,
                                  uintptr_t len,
                                  struct MfGrid **out);

/**
 * Copy a grid's cell values into a caller buffer of `len` doubles.
 *
 * # Safety
 * `buffer` must hold `len` writable doubles; `grid` live.
 */
enum MfStatus mf_grid_copy_values(const struct MfGrid *grid, double *buffer, uintptr_t len);

/**
 * Integral of a grid over the whole root.
 *
 * # Safety
 * `grid` live handle; `out` writable.
 */
enum MfStatus mf_grid_total(const struct MfGrid *grid, double *out);

/**
 * # Safety
 * `grid` from a grid constructor, not yet freed.
 */
void mf_grid_free(struct MfGrid *grid);

/**
 * Homogeneous exponent data: `1/p_1 + ... + 1/p_m = 1/q + alpha/n` with `q`
 * derived. Rationals are numerator/denominator pairs.
 *
 * # Safety
 * `p_num`/`p_den` point to `m` readable values; `out` writable.
 */
enum MfStatus mf_exponents_homogeneous(uint32_t n,
                                       int64_t alpha_num,
                                       int64_t alpha_den,
                                       const int64_t *p_num,
                                       const int64_t *p_den,
                                       uintptr_t m,
                                       struct MfExponents **out);

/**
 * # Safety
 * `e` from `mf_exponents_homogeneous`, not yet freed.
 */
void mf_exponents_free(struct MfExponents *e);

/**
 * Power-law weight vector `w_i = |x|^{a_i}` with exactly discretized
 * conjugate and product weights.
 *
 * # Safety
 * `a_num`/`a_den` point to `m` values matching the exponent slots.
 */
enum MfStatus mf_weights_from_powers(const struct MfSystem *sys,
                                     const struct MfExponents *exps,
                                     const int64_t *a_num,
                                     const int64_t *a_den,
                                     struct MfWeights **out);

/**
 * Weight vector from explicit grids (one per slot).
 *
 * # Safety
 * `grids` points to `m` live grid handles on one system.
 */
enum MfStatus mf_weights_from_grids(const struct MfExponents *exps,
                                    const struct MfGrid *const *grids,
                                    struct MfWeights **out);

/**
 * # Safety
 * `w` from a weights constructor, not yet freed.
 */
void mf_weights_free(struct MfWeights *w);

/**
 * Multilinear Muckenhoupt-type characteristic over the full cube family
 * scanned down to `scan_level`.
 *
 * # Safety
 * `w` live handle; `out` writable.
 */
enum MfStatus mf_apq_constant(const struct MfWeights *w, int32_t scan_level, double *out);

/**
 * Fujii-Wilson constant of the slot's conjugate weight.
 *
 * # Safety
 * `w` live handle; `out` writable.
 */
enum MfStatus mf_a_infty_constant(const struct MfWeights *w,
                                  uintptr_t slot,
                                  int32_t scan_level,
                                  double *out);

/**
 * Multilinear fractional maximal field of `m` grids.
 *
 * # Safety
 * `grids` points to `m` live grids on one system; `out` writable.
 */
enum MfStatus mf_maximal_field(const struct MfExponents *exps,
                               const struct MfGrid *const *grids,
                               struct MfGrid **out);

/**
 * Stopping-time sparse family of `m` grids on the grid selected by
 * `shift_bits` (bit `i` set: coordinate `i` uses the 1/3 shift).
 *
 * # Safety
 * `grids` points to `m` live grids on one system; `out` writable.
 */
enum MfStatus mf_sparse_build(const struct MfExponents *exps,
                              const struct MfGrid *const *grids,
                              uint32_t shift_bits,
                              struct MfSparse **out);

/**
 * Number of member cubes.
 *
 * # Safety
 * `s` live handle; `out` writable.
 */
enum MfStatus mf_sparse_len(const struct MfSparse *s, uintptr_t *out);

/**
 * Run the sparseness checks: `Ok` when all invariants hold, `Failed` with
 * the violation in the error message otherwise.
 *
 * # Safety
 * `s` live handle.
 */
enum MfStatus mf_sparse_verify(const struct MfSparse *s);

/**
 * Write the family's line-based text form to a file.
 *
 * # Safety
 * `path` is a NUL-terminated UTF-8 path; `s` live handle.
 */
enum MfStatus mf_sparse_write_text(const struct MfSparse *s, const char *path);

/**
 * # Safety
 * `s` from `mf_sparse_build`, not yet freed.
 */
void mf_sparse_free(struct MfSparse *s);

/**
 * Run a sharpness experiment from a key/value config file and write the
 * report (CSV) to `csv_path`. `theorem` is `"t1"`, `"t2"` or `"t3"`.
 *
 * # Safety
 * Both paths are NUL-terminated UTF-8 strings.
 */
enum MfStatus mf_sharpness_run(const char *theorem, const char *config_path, const char *csv_path);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

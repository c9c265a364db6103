#ifndef OPERAD_CELLS_H
#define OPERAD_CELLS_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

#define OC_OK 0

#define OC_NULL 1

#define OC_VALIDATION 2

#define OC_RESOURCE 3

#define OC_BUFFER 4

#define OC_INTERNAL 5

#define OC_VERIFICATION 6

#define OC_KIND_CACTI 0

#define OC_KIND_BAR 1

#define OC_KIND_FM 2

#define OC_SERIES_P 0

#define OC_SERIES_O 1

#define OC_SERIES_F 2

/**
 * An enumerated cell catalog.
 */
typedef struct OcCatalog OcCatalog;

/**
 * The result of tracing one weighted configuration.
 */
typedef struct OcTrace OcTrace;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *oc_version(void);

/**
 * Copies the message of the last failure on this thread.
 *
 * # Safety
 * `buf` must be writable for `cap` bytes; `out_len` may be null.
 */
int32_t oc_last_error_message(char *buf, size_t cap, size_t *out_len);

/**
 * Enumerates all cells of `kind` and arity `k`, refusing more than `limit` cells.
 *
 * # Safety
 * `out` must be a valid pointer; on success it receives a handle to free
 * with `oc_catalog_free`.
 */
int32_t oc_catalog_enumerate(uint32_t kind, uint32_t k, uint64_t limit, struct OcCatalog **out);

/**
 * Reads and validates a catalog file.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a valid pointer.
 */
int32_t oc_catalog_read(const char *path, struct OcCatalog **out);

/**
 * # Safety
 * `cat` must come from this library; `path` must be NUL-terminated.
 */
int32_t oc_catalog_write(const struct OcCatalog *cat, const char *path);

/**
 * Number of cells in the catalog.
 *
 * # Safety
 * `cat` must come from this library; `out` must be valid.
 */
int32_t oc_catalog_len(const struct OcCatalog *cat, size_t *out);

/**
 * Number of cells of dimension `dim`; zero beyond the top dimension.
 *
 * # Safety
 * `cat` must come from this library; `out` must be valid.
 */
int32_t oc_catalog_count(const struct OcCatalog *cat, size_t dim, uint64_t *out);

/**
 * Text form and dimension of record `index` (canonical order).
 *
 * # Safety
 * `cat` must come from this library; `buf` writable for `cap` bytes;
 * `out_len` and `dim` may be null.
 */
int32_t oc_catalog_record(const struct OcCatalog *cat,
                          size_t index,
                          char *buf,
                          size_t cap,
                          size_t *out_len,
                          size_t *dim);

/**
 * Hex SHA-256 of the catalog records.
 *
 * # Safety
 * As for `oc_catalog_record`.
 */
int32_t oc_catalog_hash(const struct OcCatalog *cat, char *buf, size_t cap, size_t *out_len);

/**
 * # Safety
 * `cat` must come from this library and not be used afterwards; null is ignored.
 */
void oc_catalog_free(struct OcCatalog *cat);

/**
 * The boundary of a cell given in text form, as `+1 word` lines.
 *
 * # Safety
 * `cell` must be NUL-terminated; `buf` writable for `cap` bytes.
 */
int32_t oc_cell_boundary(uint32_t kind, const char *cell, char *buf, size_t cap, size_t *out_len);

/**
 * Betti numbers of the complex of `kind` in arity `k`, after checking
 * `d^2 = 0`. `*out_len` receives the number of degrees; `*torsion_free`
 * whether all torsion vanishes.
 *
 * # Safety
 * `betti` writable for `cap` entries; the other pointers valid or null.
 */
int32_t oc_homology(uint32_t kind,
                    uint32_t k,
                    uint64_t limit,
                    uint64_t *betti,
                    size_t cap,
                    size_t *out_len,
                    bool *torsion_free);

/**
 * `[x^xdeg]` of a counting series, e.g. `1 + 3t + 2t^2`, to `t`-order `m`.
 *
 * # Safety
 * `buf` writable for `cap` bytes.
 */
int32_t oc_series_coefficient(uint32_t which,
                              uint32_t m,
                              uint32_t xdeg,
                              char *buf,
                              size_t cap,
                              size_t *out_len);

/**
 * Traces `k` points (`xy` holds `x_1, y_1, .., x_k, y_k`) with positive
 * `weights` (rescaled to sum to one) and extracts their bar cell.
 *
 * # Safety
 * `xy` readable for `2k` doubles, `weights` for `k`; `out` valid.
 */
int32_t oc_trace(const double *xy, const double *weights, size_t k, struct OcTrace **out);

/**
 * Text form of the traced bar cell.
 *
 * # Safety
 * `t` from `oc_trace`; `buf` writable for `cap` bytes.
 */
int32_t oc_trace_cell(const struct OcTrace *t, char *buf, size_t cap, size_t *out_len);

/**
 * The whole cactus with its arc lengths, e.g. `212 (1/2,1,1/2)`.
 *
 * # Safety
 * As for `oc_trace_cell`.
 */
int32_t oc_trace_cactus(const struct OcTrace *t, char *buf, size_t cap, size_t *out_len);

/**
 * Number of critical points, counted without multiplicity.
 *
 * # Safety
 * `t` from `oc_trace`; `out` valid.
 */
int32_t oc_trace_critical_count(const struct OcTrace *t, size_t *out);

/**
 * # Safety
 * `t` must come from `oc_trace` and not be used afterwards; null is ignored.
 */
void oc_trace_free(struct OcTrace *t);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* OPERAD_CELLS_H */

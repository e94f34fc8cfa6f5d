#ifndef BARCODE_GRAD_H
#define BARCODE_GRAD_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum {
  BG_STATUS_OK = 0,
  BG_STATUS_NULL_POINTER = 1,
  BG_STATUS_INVALID_UTF8 = 2,
  BG_STATUS_INVALID_INPUT = 3,
  BG_STATUS_NOT_A_FILTRATION = 4,
  BG_STATUS_BAD_DEGREE = 5,
  BG_STATUS_INDEX_OUT_OF_RANGE = 6,
  BG_STATUS_INFINITE_DISTANCE = 7,
  BG_STATUS_SINGULAR = 8,
  BG_STATUS_INTERNAL = 9,
} BgStatus;

// A barcode: finite bars plus births of infinite bars.
typedef struct BgBarcode BgBarcode;

// A simplicial complex together with filter values on its simplices.
typedef struct BgFilter BgFilter;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the most recent failure on this thread. Valid until the next failing call on the same thread.
const char *bg_last_error_message(void);

// Parses `{"simplices": [[...], ...], "values": [...]}`.
//
// # Safety
// `json` must be a NUL-terminated string and `out` a valid pointer.
BgStatus bg_filter_from_json(const char *json, BgFilter **out);

// # Safety
// `filter` must come from [`bg_filter_from_json`] and not be freed twice. Null is ignored.
void bg_filter_free(BgFilter *filter);

// # Safety
// Pointers must be valid.
BgStatus bg_filter_num_simplices(const BgFilter *filter, size_t *out);

// Barcode of `filter` in `degree`.
//
// # Safety
// Pointers must be valid.
BgStatus bg_diagram(const BgFilter *filter, size_t degree, BgBarcode **out);

// Builds a barcode from `n_finite` (birth, death) pairs and `n_infinite` births.
// Array pointers may be null when their count is zero.
//
// # Safety
// Each non-null array must hold at least its stated number of elements.
BgStatus bg_barcode_new(const double *births,
                        const double *deaths,
                        size_t n_finite,
                        const double *infinite_births,
                        size_t n_infinite,
                        BgBarcode **out);

// # Safety
// `barcode` must come from this library and not be freed twice. Null is ignored.
void bg_barcode_free(BgBarcode *barcode);

// # Safety
// Pointers must be valid.
BgStatus bg_barcode_len(const BgBarcode *barcode, size_t *n_finite, size_t *n_infinite);

// Finite bar `index`, in the barcode's sorted order.
//
// # Safety
// Pointers must be valid.
BgStatus bg_barcode_finite(const BgBarcode *barcode, size_t index, double *birth, double *death);

// # Safety
// Pointers must be valid.
BgStatus bg_barcode_infinite(const BgBarcode *barcode, size_t index, double *birth);

// Bottleneck distance. Writes infinity and returns `Ok` when infinite-bar counts differ.
//
// # Safety
// Pointers must be valid.
BgStatus bg_bottleneck(const BgBarcode *a, const BgBarcode *b, double *out);

// `q`-Wasserstein distance. Writes infinity and returns `Ok` when infinite-bar counts differ.
//
// # Safety
// Pointers must be valid.
BgStatus bg_wasserstein(const BgBarcode *a, const BgBarcode *b, double q, double *out);

// Runs the optimizer on a JSON configuration and returns the trace as JSON lines.
// The returned string must be released with [`bg_string_free`].
//
// # Safety
// `config_json` must be a NUL-terminated string and `trace_out` a valid pointer.
BgStatus bg_optimize(const char *config_json, char **trace_out);

// # Safety
// `s` must come from this library and not be freed twice. Null is ignored.
void bg_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* BARCODE_GRAD_H */

#ifndef BTSPEC_H
#define BTSPEC_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of every fallible call.
 */
typedef enum BtStatus {
  BT_STATUS_OK = 0,
  BT_STATUS_NULL_POINTER = 1,
  BT_STATUS_INVALID_UTF8 = 2,
  BT_STATUS_INVALID_ARGUMENT = 3,
  BT_STATUS_INVALID_SPEC = 4,
  BT_STATUS_SINGULAR = 5,
  BT_STATUS_NO_CONVERGENCE = 6,
  BT_STATUS_DENSE_CAP_EXCEEDED = 7,
  BT_STATUS_BUFFER_TOO_SMALL = 8,
  BT_STATUS_INTERNAL = 9,
} BtStatus;

/**
 * Opaque operator handle.
 */
typedef struct BtOperator BtOperator;

typedef struct BtComplex {
  double re;
  double im;
} BtComplex;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Builds an operator from its JSON spec and stores the handle in `*out_op`.
 *
 * # Safety
 * `json` must be null or a NUL-terminated string; `out_op` must be null or
 * writable.
 */
enum BtStatus bt_operator_from_json(const char *json, struct BtOperator **out_op);

/**
 * Releases a handle. Null is ignored.
 *
 * # Safety
 * `op` must be null or a handle not yet freed.
 */
void bt_operator_free(struct BtOperator *op);

/**
 * Rows of the discretized operator, or 0 for a null handle.
 *
 * # Safety
 * `op` must be null or a live handle.
 */
size_t bt_operator_dimension(const struct BtOperator *op);

/**
 * Eigenvalue nearest `target` by shift-invert iteration.
 *
 * # Safety
 * `op` must be a live handle; `eigenvalue` and `residual` writable.
 */
enum BtStatus bt_locate_eigenvalue(const struct BtOperator *op,
                                   struct BtComplex target,
                                   double tol,
                                   struct BtComplex *eigenvalue,
                                   double *residual);

/**
 * `||(B - lambda)^{-1}||_2`; infinity when `lambda` is numerically an
 * eigenvalue.
 *
 * # Safety
 * `op` must be a live handle; `norm` writable.
 */
enum BtStatus bt_resolvent_norm(const struct BtOperator *op,
                                struct BtComplex lambda,
                                double tol,
                                double *norm);

/**
 * Eigenvalues inside the closed box, sorted. `*count` receives the number
 * found; `BufferTooSmall` is returned when it exceeds `capacity`, with
 * the first `capacity` values written.
 *
 * # Safety
 * `op` must be a live handle; `buffer` must hold `capacity` entries (or be
 * null when `capacity` is 0); `count` writable.
 */
enum BtStatus bt_survey_spectrum(const struct BtOperator *op,
                                 double re_min,
                                 double re_max,
                                 double im_min,
                                 double im_max,
                                 struct BtComplex *buffer,
                                 size_t capacity,
                                 size_t *count);

/**
 * Leading coefficient `mu_{k,0}`.
 *
 * # Safety
 * `value` must be writable.
 */
enum BtStatus bt_mu_k0(size_t k, struct BtComplex *value);

/**
 * Second coefficient `mu_{k,1}`: closed form for `k = 1`, quadrature
 * otherwise.
 *
 * # Safety
 * `value` must be writable.
 */
enum BtStatus bt_mu_k1(size_t k, struct BtComplex *value);

/**
 * Extrapolated variational constant on `(a, b)` from the reference grids.
 *
 * # Safety
 * `rho0` must be writable.
 */
enum BtStatus bt_rho0(double a, double b, double *rho0);

/**
 * Copies the calling thread's last error message into `buffer` (always
 * NUL-terminated when `len > 0`) and returns the full message length
 * without the terminator.
 *
 * # Safety
 * `buffer` must be null or hold `len` bytes.
 */
size_t bt_last_error_message(char *buffer, size_t len);

/**
 * Library version as a static NUL-terminated string.
 */
const char *bt_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* BTSPEC_H */

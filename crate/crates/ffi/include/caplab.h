#ifndef CAPLAB_H
#define CAPLAB_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every fallible call.
 */
typedef enum CaplabStatus {
  CAPLAB_STATUS_OK = 0,
  CAPLAB_STATUS_NULL_POINTER = 1,
  CAPLAB_STATUS_INVALID_UTF8 = 2,
  CAPLAB_STATUS_SYNTAX = 3,
  CAPLAB_STATUS_UNKNOWN_IDENTIFIER = 4,
  CAPLAB_STATUS_DOMAIN = 5,
  CAPLAB_STATUS_QUADRATURE_FAILURE = 6,
  CAPLAB_STATUS_NON_CONVERGENCE = 7,
  CAPLAB_STATUS_BALANCE_VIOLATION = 8,
  CAPLAB_STATUS_HYPOTHESIS_VIOLATION = 9,
  CAPLAB_STATUS_PRECONDITION = 10,
  CAPLAB_STATUS_CONFIG = 11,
  CAPLAB_STATUS_VERIFICATION = 12,
  CAPLAB_STATUS_IO = 13,
  CAPLAB_STATUS_PANIC = 14,
} CaplabStatus;

/**
 * How a capacity value was obtained.
 */
typedef enum CaplabMethod {
  CAPLAB_METHOD_DRIFTED_QUADRATURE = 0,
  CAPLAB_METHOD_DRIFTED_TAIL_LIMIT = 1,
  CAPLAB_METHOD_DIVERGENT_TAIL = 2,
  CAPLAB_METHOD_UNKNOWN_TAIL = 3,
  CAPLAB_METHOD_EXACT_MODEL = 4,
  CAPLAB_METHOD_ENERGY_ORACLE = 5,
  CAPLAB_METHOD_LOWER_BOUND = 6,
} CaplabMethod;

typedef enum CaplabMode {
  CAPLAB_MODE_INTRINSIC = 0,
  CAPLAB_MODE_EXTRINSIC = 1,
} CaplabMode;

typedef enum CaplabVerdict {
  CAPLAB_VERDICT_P_HYPERBOLIC = 0,
  CAPLAB_VERDICT_P_PARABOLIC = 1,
  CAPLAB_VERDICT_INCONCLUSIVE = 2,
} CaplabVerdict;

/**
 * Comparison constellation.
 */
typedef struct CaplabConstellation CaplabConstellation;

/**
 * Parsed radial expression.
 */
typedef struct CaplabExpr CaplabExpr;

typedef struct CaplabEstimate {
  double value;
  double error_estimate;
  enum CaplabMethod method;
} CaplabEstimate;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null.
 *
 * The pointer stays valid until the next failing call on the same thread.
 */
const char *caplab_last_error_message(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *caplab_version(void);

/**
 * # Safety
 * `s` must be null or a string returned by this library and not yet freed.
 */
void caplab_string_free(char *s);

/**
 * Parses a radial expression in the variable `r`.
 *
 * # Safety
 * `text` must be a NUL-terminated string; `out` must be writable.
 */
enum CaplabStatus caplab_expr_parse(const char *text, struct CaplabExpr **out);

/**
 * # Safety
 * `expr` must be a live handle; `out` must be writable.
 */
enum CaplabStatus caplab_expr_evaluate(const struct CaplabExpr *expr, double r, double *out);

/**
 * Symbolic derivative with respect to `r`, as a new handle.
 *
 * # Safety
 * `expr` must be a live handle; `out` must be writable.
 */
enum CaplabStatus caplab_expr_derivative(const struct CaplabExpr *expr, struct CaplabExpr **out);

/**
 * Canonical text of the expression; free with [`caplab_string_free`].
 *
 * # Safety
 * `expr` must be a live handle; `out` must be writable.
 */
enum CaplabStatus caplab_expr_to_string(const struct CaplabExpr *expr, char **out);

/**
 * # Safety
 * `expr` must be null or a live handle, which is invalid afterwards.
 */
void caplab_expr_free(struct CaplabExpr *expr);

/**
 * Constellation over the space form of curvature `b` with constant bounds
 * `g = 1`, `h = h0`, `lambda = lambda0`.
 *
 * # Safety
 * `out` must be writable.
 */
enum CaplabStatus caplab_constellation_space_form(uint32_t m,
                                                  uint32_t n,
                                                  double p,
                                                  double rho,
                                                  double b,
                                                  double h0,
                                                  double lambda0,
                                                  struct CaplabConstellation **out);

/**
 * Constellation from a JSON job description (the fields `m`, `n`, `p`,
 * `rho`, `warping`, `bounds` of the command-line config).
 *
 * # Safety
 * `json` must be a NUL-terminated string; `out` must be writable.
 */
enum CaplabStatus caplab_constellation_from_json(const char *json,
                                                 struct CaplabConstellation **out);

/**
 * # Safety
 * `c` must be null or a live handle, which is invalid afterwards.
 */
void caplab_constellation_free(struct CaplabConstellation *c);

/**
 * Balance function `M(r)`.
 *
 * # Safety
 * `c` must be a live handle; `out` must be writable.
 */
enum CaplabStatus caplab_balance(const struct CaplabConstellation *c, double r, double *out);

/**
 * Drifted potential on the annulus `(rho, outer)` at radius `r`.
 *
 * # Safety
 * `c` must be a live handle; `out` must be writable.
 */
enum CaplabStatus caplab_dirichlet_potential(const struct CaplabConstellation *c,
                                             double rho,
                                             double outer,
                                             double r,
                                             double *out);

/**
 * Drifted capacity of `(rho, outer)`; an infinite `outer` gives the limit.
 *
 * # Safety
 * `c` must be a live handle; `out` must be writable.
 */
enum CaplabStatus caplab_drifted_capacity(const struct CaplabConstellation *c,
                                          double rho,
                                          double outer,
                                          struct CaplabEstimate *out);

/**
 * Exact p-capacity of the model annulus `(rho, outer)` for `1 < p < inf`.
 *
 * # Safety
 * `c` must be a live handle; `out` must be writable.
 */
enum CaplabStatus caplab_model_pcapacity(const struct CaplabConstellation *c,
                                         double p,
                                         double rho,
                                         double outer,
                                         struct CaplabEstimate *out);

/**
 * Lower bound for the p-capacity of the extrinsic annulus `(rho, outer)`
 * given the boundary flux.
 *
 * # Safety
 * `c` must be a live handle; `out` must be writable.
 */
enum CaplabStatus caplab_pcap_lower_bound(const struct CaplabConstellation *c,
                                          double rho,
                                          double outer,
                                          double boundary_flux,
                                          struct CaplabEstimate *out);

/**
 * p-hyperbolicity verdict.
 *
 * # Safety
 * `c` must be a live handle; `out` must be writable.
 */
enum CaplabStatus caplab_classify(const struct CaplabConstellation *c,
                                  enum CaplabMode mode,
                                  enum CaplabVerdict *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CAPLAB_H */

#ifndef BIGPICTURE_H
#define BIGPICTURE_H

/* Generated by cbindgen from crates/ffi; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status code returned by every fallible call.
 */
typedef enum BpStatus {
  /**
   * Success.
   */
  BP_STATUS_OK = 0,
  /**
   * A required pointer argument was null.
   */
  BP_STATUS_NULL_ARGUMENT = 1,
  /**
   * A string argument was not valid UTF-8.
   */
  BP_STATUS_INVALID_UTF8 = 2,
  /**
   * A string argument did not parse.
   */
  BP_STATUS_PARSE = 3,
  /**
   * The inputs were outside the domain of the operation.
   */
  BP_STATUS_DOMAIN = 4,
} BpStatus;

/**
 * A truncated Laurent series with exact rational coefficients (opaque).
 */
typedef struct BpSeries BpSeries;

/**
 * A vertex of the big picture (opaque).
 */
typedef struct BpVertex BpVertex;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Parses a vertex from "a,b;c,d" with integer entries, reducing to the
 * canonical primitive Hermite form.
 */
enum BpStatus bp_vertex_parse(const char *text, struct BpVertex **out);

/**
 * The vertex nu_n = [n, 0; 0, 1] on the main thread.
 */
enum BpStatus bp_vertex_nu(uint64_t n, struct BpVertex **out);

/**
 * Renders a vertex as "a,b;0,d". Returns null if the handle is null.
 */
char *bp_vertex_to_string(const struct BpVertex *v);

void bp_vertex_free(struct BpVertex *v);

/**
 * The hyperdistance between two vertices, as a decimal string (it can
 * exceed any fixed-width integer).
 */
enum BpStatus bp_hyperdistance(const struct BpVertex *u, const struct BpVertex *v, char **out);

/**
 * The number of p-neighbors of a vertex; p must be prime.
 */
enum BpStatus bp_neighbor_count(const struct BpVertex *v, uint64_t p, uint64_t *out);

/**
 * The number of vertices at hyperdistance exactly n from nu_1.
 */
enum BpStatus bp_sphere_size(uint64_t n, uint64_t *out);

/**
 * The number of vertices of the snake of Gamma_0(n).
 */
enum BpStatus bp_snake_size(uint64_t n, uint64_t *out);

/**
 * Applies a rational matrix "a,b;c,d" (acting up to scalars) to a vertex.
 */
enum BpStatus bp_act(const char *g, const struct BpVertex *v, struct BpVertex **out);

/**
 * Whether the rational matrix lies in Gamma_0(n), up to scalars.
 */
enum BpStatus bp_in_gamma0(const char *g, uint64_t n, bool *out);

/**
 * Whether the rational matrix normalizes Gamma_0(n) inside PGL2+(Q).
 */
enum BpStatus bp_in_normalizer(const char *g, uint64_t n, bool *out);

/**
 * The partition function truncated at determinant x, over lattice cosets
 * (vertex_mode false) or commensurability classes (vertex_mode true);
 * requires beta > 2.
 */
enum BpStatus bp_partition(double beta, uint64_t x, bool vertex_mode, double *out);

/**
 * The normalized principal series J = j - 744 through order trunc.
 */
enum BpStatus bp_series_j(int64_t trunc, struct BpSeries **out);

/**
 * Loads one class from a McKay-Thompson CSV table (columns
 * class,n,value with the q^-1 row present).
 */
enum BpStatus bp_series_load(const char *path, const char *class_, struct BpSeries **out);

/**
 * The k-th replicate through order t; the base must be exact through
 * k^2 t and replicable at k and its divisors.
 */
enum BpStatus bp_series_replicate(const struct BpSeries *f,
                                  uint32_t k,
                                  int64_t t,
                                  struct BpSeries **out);

/**
 * The exact coefficient of q^n as a decimal string ("p/q" when not an
 * integer). Indices above the truncation order are out of domain.
 */
enum BpStatus bp_series_coefficient(const struct BpSeries *f, int64_t n, char **out);

/**
 * Numeric evaluation at z = re + im*i with Im(z) > 0 via q = e^{2 pi i z};
 * tail receives a rigorous bound on the truncation error.
 */
enum BpStatus bp_series_eval(const struct BpSeries *f,
                             double re,
                             double im,
                             double *out_re,
                             double *out_im,
                             double *tail);

void bp_series_free(struct BpSeries *f);

/**
 * Releases a string returned by any bp_* function.
 */
void bp_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* BIGPICTURE_H */

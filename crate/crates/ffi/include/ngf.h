#ifndef NGF_H
#define NGF_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result of every fallible call.
typedef enum NgfStatus {
  NGF_STATUS_OK = 0,
  NGF_STATUS_NULL_POINTER = 1,
  NGF_STATUS_INVALID_ARGUMENT = 2,
  // A buffer was too small or a dimension did not match.
  NGF_STATUS_DIMENSION_MISMATCH = 3,
  // Overflow or a failed eigenvalue estimate.
  NGF_STATUS_NUMERICAL = 4,
  NGF_STATUS_PANIC = 5,
} NgfStatus;

// Dense `n × n` filter matrix.
typedef struct NgfFilter NgfFilter;

// Undirected simple graph.
typedef struct NgfGraph NgfGraph;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or null. The pointer is
// valid until the next failing call on the same thread.
const char *ngf_last_error(void);

// Graph on `n` nodes from `edge_count` pairs stored as `edges[2*e]`, `edges[2*e+1]`.
//
// # Safety
// `edges` must point to `2 * edge_count` readable values and `out` must be writable.
enum NgfStatus ngf_graph_from_edges(size_t n,
                                    const size_t *edges,
                                    size_t edge_count,
                                    struct NgfGraph **out);

// Erdős–Rényi graph.
//
// # Safety
// `out` must be writable.
enum NgfStatus ngf_graph_erdos_renyi(size_t n, double p, uint64_t seed, struct NgfGraph **out);

// Stochastic block model with equal community sizes.
//
// # Safety
// `out` must be writable.
enum NgfStatus ngf_graph_sbm(size_t n,
                             size_t communities,
                             double p_in,
                             double p_out,
                             uint64_t seed,
                             struct NgfGraph **out);

// Watts–Strogatz graph: ring lattice of degree `k_ring`, rewired with probability `beta`.
//
// # Safety
// `out` must be writable.
enum NgfStatus ngf_graph_small_world(size_t n,
                                     size_t k_ring,
                                     double beta,
                                     uint64_t seed,
                                     struct NgfGraph **out);

// Copy of `g` with `create_pct` of its edge count added and `destroy_pct` removed.
//
// # Safety
// `g` must be a live graph handle and `out` writable.
enum NgfStatus ngf_graph_perturb(const struct NgfGraph *g,
                                 double create_pct,
                                 double destroy_pct,
                                 uint64_t seed,
                                 struct NgfGraph **out);

// # Safety
// `g` must be null or a handle not yet freed.
void ngf_graph_free(struct NgfGraph *g);

// # Safety
// `g` must be a live graph handle and `n`, `edges` writable.
enum NgfStatus ngf_graph_size(const struct NgfGraph *g, size_t *n, size_t *edges);

// Largest finite hop distance between any two nodes.
//
// # Safety
// `g` must be a live graph handle and `out` writable.
enum NgfStatus ngf_graph_diameter(const struct NgfGraph *g, size_t *out);

// Writes the `n × n` k-hop adjacency matrix `A(k)` into `out`.
//
// # Safety
// `g` must be a live graph handle and `out` must hold `len` writable values.
enum NgfStatus ngf_graph_khop(const struct NgfGraph *g, size_t k, double *out, size_t len);

// Neighborhood filter `Σ_k h_k A(k)` with `taps` coefficients.
//
// # Safety
// `g` must be a live graph handle, `coeffs` must hold `taps` values and `out` be writable.
enum NgfStatus ngf_filter_neighborhood(const struct NgfGraph *g,
                                       const double *coeffs,
                                       size_t taps,
                                       struct NgfFilter **out);

// Classical filter `Σ_k h_k S^k` on the adjacency matrix, divided by its
// spectral radius when `normalize` is nonzero.
//
// # Safety
// `g` must be a live graph handle, `coeffs` must hold `taps` values and `out` be writable.
enum NgfStatus ngf_filter_classical(const struct NgfGraph *g,
                                    const double *coeffs,
                                    size_t taps,
                                    int32_t normalize,
                                    struct NgfFilter **out);

// # Safety
// `f` must be null or a handle not yet freed.
void ngf_filter_free(struct NgfFilter *f);

// Node count of the filter's graph.
//
// # Safety
// `f` must be a live filter handle and `out` writable.
enum NgfStatus ngf_filter_size(const struct NgfFilter *f, size_t *out);

// Copies the `n × n` filter matrix into `out`.
//
// # Safety
// `f` must be a live filter handle and `out` must hold `len` writable values.
enum NgfStatus ngf_filter_matrix(const struct NgfFilter *f, double *out, size_t len);

// `y = H x` for an `n × cols` signal matrix `x`.
//
// # Safety
// `f` must be a live filter handle; `x` and `y` must each hold `n * cols` values.
enum NgfStatus ngf_filter_apply(const struct NgfFilter *f, const double *x, size_t cols, double *y);

// `‖H̄ − H‖²_F / ‖H‖²_F`.
//
// # Safety
// Both handles must be live and `out` writable.
enum NgfStatus ngf_filter_normalized_error(const struct NgfFilter *reference,
                                           const struct NgfFilter *perturbed,
                                           double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* NGF_H */

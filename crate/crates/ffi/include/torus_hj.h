#ifndef TORUS_HJ_H
#define TORUS_HJ_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum ThjStatus {
  THJ_STATUS_OK = 0,
  THJ_STATUS_NULL_POINTER = 1,
  THJ_STATUS_INVALID_ARGUMENT = 2,
  THJ_STATUS_DIMENSION_MISMATCH = 3,
  THJ_STATUS_NO_CONVERGENCE = 4,
  THJ_STATUS_INTERNAL = 5,
} ThjStatus;

// Opaque grid function handle.
typedef struct ThjField ThjField;

// Opaque Hamiltonian handle.
typedef struct ThjHamiltonian ThjHamiltonian;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failure on this thread, or null. The pointer stays
// valid until the next failing call on the same thread.
const char *thj_last_error_message(void);

// `H = |p|^2 + <omega, p> - lambda u`.
//
// # Safety
// `omega` points to `n` doubles; the out pointer is writable.
enum ThjStatus thj_hamiltonian_quadratic(double lambda,
                                         const double *omega,
                                         size_t n,
                                         struct ThjHamiltonian **out_h);

// `H = sqrt(1+|p|^2) - 1 + |p|^2/2 + <omega,p> - lambda u - mu sin u + b`.
//
// # Safety
// `omega` points to `n` doubles; the out pointer is writable.
enum ThjStatus thj_hamiltonian_tonelli_sine(double lambda,
                                            double mu,
                                            double b,
                                            const double *omega,
                                            size_t n,
                                            struct ThjHamiltonian **out_h);

// # Safety
// `h` is null or came from a `thj_hamiltonian_*` constructor and was not freed.
void thj_hamiltonian_free(struct ThjHamiltonian *h);

// Dimension of the Hamiltonian.
//
// # Safety
// `h` is a live handle; `n_out` is writable.
enum ThjStatus thj_hamiltonian_dim(const struct ThjHamiltonian *h, size_t *n_out);

// Equilibrium level `c` and frequency `omega = H_p(0, c)`.
//
// # Safety
// `h` is a live handle; `c_out` is writable; `omega_out` holds `n` doubles.
enum ThjStatus thj_equilibrium(const struct ThjHamiltonian *h,
                               double *c_out,
                               double *omega_out,
                               size_t n);

// Grid function on the uniform `size^n` grid, values in row-major order.
//
// # Safety
// `values` points to `len` doubles; the out pointer is writable.
enum ThjStatus thj_field_new(size_t n,
                             size_t size,
                             const double *values,
                             size_t len,
                             double time,
                             struct ThjField **out_f);

// # Safety
// `f` is null or a live field handle.
void thj_field_free(struct ThjField *f);

// Number of nodes.
//
// # Safety
// `f` is a live handle; `len_out` is writable.
enum ThjStatus thj_field_len(const struct ThjField *f, size_t *len_out);

// Copies the node values into `buf`, which must hold exactly the node count.
//
// # Safety
// `f` is a live handle; `buf` holds `len` doubles.
enum ThjStatus thj_field_values(const struct ThjField *f, double *buf, size_t len);

// # Safety
// `f` is a live handle; `t_out` is writable.
enum ThjStatus thj_field_time(const struct ThjField *f, double *t_out);

// Torus position of node 0. Fields produced by `thj_evolve` live in a frame
// that travels with `omega`.
//
// # Safety
// `f` is a live handle; `buf` holds `n` doubles.
enum ThjStatus thj_field_origin(const struct ThjField *f, double *buf, size_t n);

// Advances `phi` to `t_final` with the default solver settings.
//
// # Safety
// `h` and `phi` are live handles; the out pointer is writable.
enum ThjStatus thj_evolve(const struct ThjHamiltonian *h,
                          const struct ThjField *phi,
                          double t_final,
                          struct ThjField **out_f);

// Multilinear interpolation at the torus point `x`.
//
// # Safety
// `f` is a live handle; `x` holds `n` doubles; `value_out` is writable.
enum ThjStatus thj_interpolate(const struct ThjField *f,
                               const double *x,
                               size_t n,
                               double *value_out);

// Closed-form `w_{x0}(x, t) = (lambda/4) dist(x, x0 + omega t)^2` of the
// quadratic family.
//
// # Safety
// `x0`, `x` and `omega` hold `n` doubles; `value_out` is writable.
enum ThjStatus thj_oracle_w(const double *x0,
                            const double *x,
                            size_t n,
                            double t,
                            double lambda,
                            const double *omega,
                            double *value_out);

// Searches for `k` with `|k_i| <= height`, `k . omega T = k_{n+1}` up to
// `tol`. On success `*certified_out = 1` and `k_out` holds the `n + 1`
// integers; otherwise `*certified_out = 0` and `k_out` is left untouched.
//
// # Safety
// `omega` holds `n` doubles; `k_out` holds `n + 1` integers; `certified_out`
// is writable.
enum ThjStatus thj_check_period(double period,
                                const double *omega,
                                size_t n,
                                int64_t height,
                                double tol,
                                int64_t *k_out,
                                int32_t *certified_out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* TORUS_HJ_H */

#ifndef SQD_H
#define SQD_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

typedef enum SqdStatus {
  SQD_STATUS_OK = 0,
  SQD_STATUS_NULL_POINTER = 1,
  SQD_STATUS_INVALID_ARGUMENT = 2,
  SQD_STATUS_INVALID_LATTICE = 3,
  SQD_STATUS_CAPACITY = 4,
  SQD_STATUS_SHAPE = 5,
  SQD_STATUS_INVALID_SECTOR = 6,
  SQD_STATUS_CONVERGENCE = 7,
  SQD_STATUS_NORMALIZATION = 8,
  SQD_STATUS_INDEX = 9,
  SQD_STATUS_UNDEFINED_FIDELITY = 10,
  SQD_STATUS_CAP_EXCEEDED = 11,
  SQD_STATUS_FORMAT = 12,
  SQD_STATUS_IO = 13,
  SQD_STATUS_PANIC = 14,
  SQD_STATUS_OTHER = 15,
} SqdStatus;

typedef enum SqdStrategy {
  SQD_STRATEGY_ORDERED = 0,
  SQD_STRATEGY_SAMPLED = 1,
} SqdStrategy;

/**
 * Opaque ground-state handle.
 */
typedef struct SqdGroundState SqdGroundState;

/**
 * Opaque Hamiltonian handle.
 */
typedef struct SqdHamiltonian SqdHamiltonian;

/**
 * Outcome of a minimal-subspace search.
 */
typedef struct SqdMinResult {
  /**
   * Exact minimal subspace size (ordered) or draws at the crossing (sampled).
   */
  uint64_t m;
  /**
   * Unique configurations at the schedule crossing.
   */
  uint64_t k;
  /**
   * Energy fidelity at the schedule crossing.
   */
  double fidelity;
} SqdMinResult;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Heisenberg model `J sum S_i . S_j` on a `height x width` lattice
 * (`height == 1` is a chain).
 *
 * # Safety
 * `out` must be valid for writing one pointer.
 */
enum SqdStatus sqd_hamiltonian_heisenberg(uint32_t height,
                                          uint32_t width,
                                          bool periodic,
                                          double j,
                                          struct SqdHamiltonian **out);

/**
 * Hubbard model with hopping `t` and on-site `u`. Negative `n_up` and
 * `n_down` select the lowest-energy particle sector; otherwise the sector is
 * fixed to `(n_up, n_down)`.
 *
 * # Safety
 * `out` must be valid for writing one pointer.
 */
enum SqdStatus sqd_hamiltonian_hubbard(uint32_t height,
                                       uint32_t width,
                                       bool periodic,
                                       double t,
                                       double u,
                                       int32_t n_up,
                                       int32_t n_down,
                                       struct SqdHamiltonian **out);

/**
 * # Safety
 * `h` must be null or a handle from this library not yet freed.
 */
void sqd_hamiltonian_free(struct SqdHamiltonian *h);

/**
 * # Safety
 * `h` must be a live handle and `out` valid for writing.
 */
enum SqdStatus sqd_hamiltonian_n_qubits(const struct SqdHamiltonian *h, uint32_t *out);

/**
 * Hilbert-space dimension `2^n_qubits`.
 *
 * # Safety
 * `h` must be a live handle and `out` valid for writing.
 */
enum SqdStatus sqd_hamiltonian_dim(const struct SqdHamiltonian *h, uint64_t *out);

/**
 * `y = H x` for vectors of length `len`, which must equal the dimension.
 *
 * # Safety
 * `x` must be readable and `y` writable for `len` doubles.
 */
enum SqdStatus sqd_hamiltonian_apply(const struct SqdHamiltonian *h,
                                     const double *x,
                                     double *y,
                                     size_t len);

/**
 * Exact ground state by Lanczos. `tol <= 0` selects the default tolerance.
 *
 * # Safety
 * `h` must be a live handle and `out` valid for writing one pointer.
 */
enum SqdStatus sqd_ground_state_solve(const struct SqdHamiltonian *h,
                                      double tol,
                                      uint64_t seed,
                                      struct SqdGroundState **out);

/**
 * # Safety
 * `gs` must be null or a handle from this library not yet freed.
 */
void sqd_ground_state_free(struct SqdGroundState *gs);

/**
 * # Safety
 * `gs` must be a live handle and `out` valid for writing.
 */
enum SqdStatus sqd_ground_state_energy(const struct SqdGroundState *gs, double *out);

/**
 * Shannon entropy of the configuration distribution, in nats.
 *
 * # Safety
 * `gs` must be a live handle and `out` valid for writing.
 */
enum SqdStatus sqd_ground_state_entropy(const struct SqdGroundState *gs, double *out);

/**
 * Effective support `exp(S)`.
 *
 * # Safety
 * `gs` must be a live handle and `out` valid for writing.
 */
enum SqdStatus sqd_ground_state_neff(const struct SqdGroundState *gs, double *out);

/**
 * Copies the `2^n_qubits` configuration probabilities into `out`.
 *
 * # Safety
 * `out` must be writable for `len` doubles.
 */
enum SqdStatus sqd_ground_state_probabilities(const struct SqdGroundState *gs,
                                              double *out,
                                              size_t len);

/**
 * Smallest subspace reaching `threshold` energy fidelity with the default
 * increment schedule. `seed` is used only by the sampled strategy.
 *
 * # Safety
 * `gs` and `h` must be live handles for the same system; `out` writable.
 */
enum SqdStatus sqd_find_min_k(const struct SqdGroundState *gs,
                              const struct SqdHamiltonian *h,
                              enum SqdStrategy strategy,
                              uint64_t seed,
                              double threshold,
                              uint64_t max_m,
                              struct SqdMinResult *out);

/**
 * `1 - |e0k - e0| / |e0|`.
 *
 * # Safety
 * `out` must be valid for writing.
 */
enum SqdStatus sqd_energy_fidelity(double e0k, double e0, double *out);

/**
 * Message for the last failed call on this thread, or null. The pointer
 * stays valid until the next library call on the same thread.
 */
const char *sqd_last_error_message(void);

/**
 * Library version as a static nul-terminated string.
 */
const char *sqd_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SQD_H */

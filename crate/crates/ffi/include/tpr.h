#ifndef TPR_H
#define TPR_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum TprStatus {
  TPR_STATUS_OK = 0,
  TPR_STATUS_NULL_POINTER = 1,
  TPR_STATUS_INVALID_ARGUMENT = 2,
  TPR_STATUS_CONVERGENCE = 3,
  TPR_STATUS_BUDGET = 4,
  TPR_STATUS_REGIME = 5,
  TPR_STATUS_BUFFER_TOO_SMALL = 6,
  TPR_STATUS_PANIC = 7,
} TprStatus;

typedef enum TprParity {
  TPR_PARITY_PLUS_ONE = 0,
  TPR_PARITY_MINUS_ONE = 1,
  TPR_PARITY_PLUS_I = 2,
  TPR_PARITY_MINUS_I = 3,
} TprParity;

typedef enum TprSpectrumClass {
  TPR_SPECTRUM_CLASS_DISCRETE = 0,
  TPR_SPECTRUM_CLASS_COLLAPSE = 1,
  TPR_SPECTRUM_CLASS_CONTINUOUS_UNBOUNDED = 2,
} TprSpectrumClass;

/**
 * Hamiltonian of the two-photon Rabi/Dicke model on a truncated space.
 */
typedef struct TprModel TprModel;

/**
 * Observable traces from a time evolution.
 */
typedef struct TprTrace TprTrace;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the most recent failed call on this thread; empty after a
 * success. Valid until the next call on the same thread.
 */
const char *tpr_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *tpr_version(void);

/**
 * Homogeneous `n_qubits`-qubit model `ω a†a + (ω_q/2)Σσ_z + (g/N)Σσ_x(a²+a†²)`
 * in natural units, truncated at `cutoff` bosons.
 *
 * # Safety
 * `out` must be a valid pointer to writable storage for one handle.
 */
enum TprStatus tpr_model_new(uintptr_t n_qubits,
                             double omega,
                             double omega_q,
                             double g,
                             uintptr_t cutoff,
                             struct TprModel **out);

/**
 * # Safety
 * `model` must be null or a handle from `tpr_model_new` not yet freed.
 */
void tpr_model_free(struct TprModel *model);

/**
 * Hilbert-space dimension, or 0 for a null handle.
 *
 * # Safety
 * `model` must be null or a live handle.
 */
uintptr_t tpr_model_dim(const struct TprModel *model);

/**
 * Lowest `k` eigenvalues with their generalized-parity labels. Both
 * buffers must hold `k` entries; `labels` may be null.
 *
 * # Safety
 * `model` must be a live handle; `energies` must point to `k` writable
 * doubles and `labels`, if non-null, to `k` writable `TprParity` values.
 */
enum TprStatus tpr_model_spectrum(const struct TprModel *model,
                                  uintptr_t k,
                                  double *energies,
                                  enum TprParity *labels);

/**
 * Evolves the product state `|q_1 … q_N, n⟩` on `samples` evenly spaced
 * times in `[0, t_end]`. `qubits[i]` is 0 for excited and 1 for ground.
 *
 * # Safety
 * `model` must be a live handle, `qubits` must point to `n_qubits`
 * bytes and `out` to writable storage for one handle.
 */
enum TprStatus tpr_model_evolve(const struct TprModel *model,
                                const uint8_t *qubits,
                                uintptr_t n,
                                double t_end,
                                uintptr_t samples,
                                struct TprTrace **out);

/**
 * # Safety
 * `trace` must be null or a handle from `tpr_model_evolve` not yet freed.
 */
void tpr_trace_free(struct TprTrace *trace);

/**
 * Number of samples, or 0 for a null handle.
 *
 * # Safety
 * `trace` must be null or a live handle.
 */
uintptr_t tpr_trace_len(const struct TprTrace *trace);

/**
 * Sample times. `needed` (nullable) receives the sample count.
 *
 * # Safety
 * `trace` must be a live handle and `buf` must point to `len` writable
 * doubles.
 */
enum TprStatus tpr_trace_times(const struct TprTrace *trace,
                               double *buf,
                               uintptr_t len,
                               uintptr_t *needed);

/**
 * Values of the observable `name`: `n` (photon number), `sz1` … (qubit
 * inversions), `excitations`, or the tracked population such as `P_g2`.
 *
 * # Safety
 * `trace` must be a live handle, `name` a NUL-terminated string and `buf`
 * must point to `len` writable doubles.
 */
enum TprStatus tpr_trace_observable(const struct TprTrace *trace,
                                    const char *name,
                                    double *buf,
                                    uintptr_t len,
                                    uintptr_t *needed);

/**
 * Spectral class of the single-qubit model at coupling `g`, and the
 * normalizability margin `1 − |γ|` (0 unless the spectrum is discrete).
 *
 * # Safety
 * `class_out` and `margin_out` must be null or writable.
 */
enum TprStatus tpr_classify(double g,
                            double omega,
                            enum TprSpectrumClass *class_out,
                            double *margin_out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* TPR_H */

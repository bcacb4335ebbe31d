#ifndef PE_TOOLKIT_H
#define PE_TOOLKIT_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum {
  PE_STATUS_OK = 0,
  PE_STATUS_NULL_POINTER = 1,
  PE_STATUS_INVALID_UTF8 = 2,
  /**
   * Input rejected: bad shape, cap exceeded, malformed JSON and the like.
   */
  PE_STATUS_VALIDATION = 3,
  PE_STATUS_IO = 4,
  PE_STATUS_PANIC = 5,
} PeStatus;

/**
 * Opaque number-block-diagonal state.
 */
typedef struct PeState PeState;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or NULL. Valid until the next call.
 */
const char *pe_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *pe_version(void);

/**
 * # Safety
 * `s` must come from this library or be NULL.
 */
void pe_string_free(char *s);

/**
 * Fock state |n_0, ..., n_{m-1}⟩.
 *
 * # Safety
 * `occupation` must point to `modes` values; `out` must be writable.
 */
PeStatus pe_state_fock(const size_t *occupation, size_t modes, PeState **out);

/**
 * # Safety
 * `json` must be a NUL-terminated string; `out` must be writable.
 */
PeStatus pe_state_from_json(const char *json, PeState **out);

/**
 * # Safety
 * `state` must be a live handle; `out` must be writable.
 */
PeStatus pe_state_to_json(const PeState *state, char **out);

/**
 * # Safety
 * `state` must be a live handle; `out` must be writable.
 */
PeStatus pe_state_modes(const PeState *state, size_t *out);

/**
 * # Safety
 * `state` must come from this library or be NULL; it is invalid afterwards.
 */
void pe_state_free(PeState *state);

/**
 * SSR-restricted negativity of a 2m-mode state across modes 0..m | m..2m.
 *
 * # Safety
 * `state` must be a live handle; `out` must be writable.
 */
PeStatus pe_e_ssr_halves(const PeState *state, double *out);

/**
 * Balanced activation of an m-mode state; writes the SSR negativity of the output.
 *
 * # Safety
 * `state` must be a live handle; `out` must be writable.
 */
PeStatus pe_activate_balanced(const PeState *state, double *out);

/**
 * Fisher-information PE monotone. Two-mode states use the exact search, others
 * the restart search with `restarts` starts from `seed`.
 *
 * # Safety
 * `state` must be a live handle; `out` must be writable.
 */
PeStatus pe_m_pe_f(const PeState *state, uint64_t seed, size_t restarts, double *out);

/**
 * Total variation between Binomial(n, p) and Poisson(np).
 *
 * # Safety
 * `out` must be writable.
 */
PeStatus pe_binomial_poisson_distance(uint64_t n, double p, double *out);

/**
 * Witness lower bound from a shot CSV and metadata JSON, with optimized gains.
 * Writes the bound result as JSON.
 *
 * # Safety
 * Paths must be NUL-terminated strings; `out` must be writable.
 */
PeStatus pe_witness_bound(const char *data_path,
                          const char *meta_path,
                          size_t resamples,
                          uint64_t seed,
                          char **out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PE_TOOLKIT_H */

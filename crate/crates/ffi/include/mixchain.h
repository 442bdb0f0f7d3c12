#ifndef MIXCHAIN_H
#define MIXCHAIN_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

#define MIXCHAIN_OK 0

#define MIXCHAIN_ERR_NULL_POINTER -1

#define MIXCHAIN_ERR_PARSE -2

#define MIXCHAIN_ERR_VALIDATION -3

#define MIXCHAIN_ERR_TOO_LARGE -4

#define MIXCHAIN_ERR_NOT_REVERSIBLE -5

#define MIXCHAIN_ERR_OTHER -6

/**
 * Opaque chain handle.
 */
typedef struct MixchainChain MixchainChain;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Most recent error message on this thread, or null if none. The pointer
 * stays valid until the next failing call on the same thread.
 */
const char *mixchain_last_error(void);

/**
 * Parses a chain from the JSON chain-file format. On success writes a new
 * handle through `out`.
 *
 * # Safety
 * `json` must be a valid NUL-terminated C string; `out` must be a valid
 * pointer.
 */
int32_t mixchain_chain_from_json(const char *json, struct MixchainChain **out);

/**
 * Builds a chain from a dense row-major k-by-k transition matrix; the
 * stationary distribution is computed internally.
 *
 * # Safety
 * `rows` must point to k*k doubles; `out` must be a valid pointer.
 */
int32_t mixchain_chain_from_transition(const double *rows, uintptr_t k, struct MixchainChain **out);

/**
 * Releases a chain handle. Null is a no-op.
 *
 * # Safety
 * `chain` must be a handle from a constructor, not yet freed.
 */
void mixchain_chain_free(struct MixchainChain *chain);

/**
 * Number of states.
 *
 * # Safety
 * `chain` must be a live handle.
 */
uintptr_t mixchain_chain_len(const struct MixchainChain *chain);

/**
 * Copies the stationary distribution into `out` (length k).
 *
 * # Safety
 * `chain` must be a live handle; `out` must hold k doubles.
 */
int32_t mixchain_chain_stationary(const struct MixchainChain *chain, double *out);

/**
 * alpha(lag).
 *
 * # Safety
 * `chain` must be a live handle; `out` must be valid.
 */
int32_t mixchain_alpha(const struct MixchainChain *chain, uint64_t lag, double *out);

/**
 * rho(lag).
 *
 * # Safety
 * `chain` must be a live handle; `out` must be valid.
 */
int32_t mixchain_rho(const struct MixchainChain *chain, uint64_t lag, double *out);

/**
 * beta(lag).
 *
 * # Safety
 * `chain` must be a live handle; `out` must be valid.
 */
int32_t mixchain_beta(const struct MixchainChain *chain, uint64_t lag, double *out);

/**
 * Second-largest eigenvalue modulus (reversible chains) or rho(1)
 * otherwise, and the gap 1 - slem.
 *
 * # Safety
 * `chain` must be a live handle; `slem` and `gap` must be valid.
 */
int32_t mixchain_slem_and_gap(const struct MixchainChain *chain, double *slem, double *gap);

/**
 * Writes 1 through `out` if the chain satisfies detailed balance, else 0.
 *
 * # Safety
 * `chain` must be a live handle; `out` must be valid.
 */
int32_t mixchain_is_reversible(const struct MixchainChain *chain, int32_t *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MIXCHAIN_H */

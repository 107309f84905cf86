#ifndef HMFLOW_H
#define HMFLOW_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

#define HMF_OK 0

#define HMF_ERR_INVALID 2

#define HMF_ERR_NOT_CONVERGED 3

#define HMF_ERR_NUMERICAL 4

/**
 * Opaque run handle: a validated configuration plus, after
 * `hmf_run_execute`, the pipeline output.
 */
typedef struct HmfRun HmfRun;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Parse and validate a JSON run configuration; on success `*out` receives a
 * handle that must be released with `hmf_run_free`.
 *
 * # Safety
 * `config_json` must be a NUL-terminated UTF-8 string and `out` a valid
 * pointer; both must stay valid for the duration of the call.
 */
int32_t hmf_run_new(const char *config_json, struct HmfRun **out);

/**
 * Run the pipeline to completion. Returns 0 when the flow reached the
 * configured tension tolerance and 3 when the step budget ran out first (the
 * partial result is still readable through the accessors).
 *
 * # Safety
 * `run` must be a live handle from `hmf_run_new`.
 */
int32_t hmf_run_execute(struct HmfRun *run);

/**
 * The 16-hex-digit configuration hash stamped into every artifact, as a
 * newly allocated string (free with `hmf_string_free`); NULL on null handle.
 *
 * # Safety
 * `run` must be a live handle or NULL.
 */
char *hmf_run_config_hash(const struct HmfRun *run);

/**
 * Number of grid nodes in the discrete map (0 for a null handle).
 *
 * # Safety
 * `run` must be a live handle or NULL.
 */
uintptr_t hmf_run_node_count(const struct HmfRun *run);

/**
 * Copy the final surface into `buf` as x,y,z triples in upper-half-space
 * coordinates; `len` must be at least 3 × `hmf_run_node_count`.
 *
 * # Safety
 * `run` must be a live, executed handle and `buf` must point to at least
 * `len` writable doubles.
 */
int32_t hmf_run_surface(const struct HmfRun *run, double *buf, uintptr_t len);

/**
 * Run the configured diagnostics on the final state and return the report as
 * a newly allocated JSON string in `*out` (free with `hmf_string_free`).
 *
 * # Safety
 * `run` must be a live, executed handle and `out` a valid pointer.
 */
int32_t hmf_run_report_json(const struct HmfRun *run, char **out);

/**
 * The message for the most recent failure on this thread, as a newly
 * allocated string (free with `hmf_string_free`); NULL if none.
 */
char *hmf_last_error_message(void);

/**
 * Free a string returned by this library. NULL is ignored.
 *
 * # Safety
 * `s` must have been returned by a function of this library and not yet
 * freed.
 */
void hmf_string_free(char *s);

/**
 * Release a run handle. NULL is ignored.
 *
 * # Safety
 * `run` must have been returned by `hmf_run_new` and not yet freed.
 */
void hmf_run_free(struct HmfRun *run);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* HMFLOW_H */

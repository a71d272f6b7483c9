#ifndef LIVINGLAB_H
#define LIVINGLAB_H

/* Generated by cbindgen; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every call.
 */
typedef enum LlStatus {
  LL_STATUS_OK = 0,
  LL_STATUS_NULL_POINTER = 1,
  LL_STATUS_INVALID_ARGUMENT = 2,
  LL_STATUS_NOT_FOUND = 3,
  LL_STATUS_CONFLICT = 4,
  LL_STATUS_UNAVAILABLE = 5,
  LL_STATUS_IO = 6,
  LL_STATUS_INTERNAL = 7,
} LlStatus;

/**
 * Opaque lab handle.
 */
typedef struct LlLab LlLab;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Open the lab described by a config file. Its data directory is created
 * if missing and the event log is replayed.
 *
 * # Safety
 * `config_path` must be a NUL-terminated string; `out` must be writable.
 */
enum LlStatus ll_lab_open(const char *config_path, struct LlLab **out);

/**
 * Write a snapshot and release the handle. Null is ignored.
 *
 * # Safety
 * `lab` must come from [`ll_lab_open`] and not be used afterwards.
 */
void ll_lab_free(struct LlLab *lab);

/**
 * Create an experiment from its JSON definition; its id is written to
 * `experiment_id`.
 *
 * # Safety
 * Pointers must be valid; `experiment_id` receives a string owned by the caller.
 */
enum LlStatus ll_experiment_create(const struct LlLab *lab,
                                   const char *definition_json,
                                   char **experiment_id);

/**
 * # Safety
 * Pointers must be valid.
 */
enum LlStatus ll_experiment_start(const struct LlLab *lab, const char *experiment_id);

/**
 * # Safety
 * Pointers must be valid.
 */
enum LlStatus ll_experiment_stop(const struct LlLab *lab, const char *experiment_id);

/**
 * Open a session for a query (ad-hoc retrieval) or a seed record (dataset
 * recommendation); exactly one of the two must be non-null. Writes
 * `{"session_id":…,"docs":[…]}` to `session_json`.
 *
 * # Safety
 * Pointers must be valid or null where allowed.
 */
enum LlStatus ll_session_create(const struct LlLab *lab,
                                const char *experiment_id,
                                const char *query_id,
                                const char *seed_record,
                                char **session_json);

/**
 * Record the clicked 0-based ranks of a session. `clicks` may be null when
 * `len` is 0.
 *
 * # Safety
 * `clicks` must point at `len` readable values.
 */
enum LlStatus ll_session_feedback(const struct LlLab *lab,
                                  const char *session_id,
                                  const size_t *clicks,
                                  size_t len);

/**
 * Write the experiment report as JSON to `report_json`.
 *
 * # Safety
 * Pointers must be valid.
 */
enum LlStatus ll_report_json(const struct LlLab *lab,
                             const char *experiment_id,
                             char **report_json);

/**
 * Two-sided exact sign test. `defined` is set to 0 when there are no
 * decided sessions, and `p_value` is then left untouched.
 *
 * # Safety
 * Output pointers must be writable.
 */
enum LlStatus ll_sign_test(uint64_t wins, uint64_t losses, double *p_value, bool *defined);

/**
 * Release a string returned by this library. Null is ignored.
 *
 * # Safety
 * `s` must come from this library and not be freed twice.
 */
void ll_string_free(char *s);

/**
 * Message of the last failed call on this thread, or an empty string. The
 * pointer stays valid until the next call on the same thread.
 */
const char *ll_last_error(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* LIVINGLAB_H */

#ifndef QSOPT_H
#define QSOPT_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum QsoptStatus {
  QsoptStatus_Ok = 0,
  QsoptStatus_NullArgument = 1,
  QsoptStatus_InvalidInput = 2,
  QsoptStatus_Json = 3,
  QsoptStatus_Io = 4,
  QsoptStatus_NotFitted = 5,
  QsoptStatus_Stopped = 6,
  QsoptStatus_Numerical = 7,
  QsoptStatus_Oracle = 8,
  QsoptStatus_Panic = 99,
} QsoptStatus;

/**
 * Opaque campaign handle.
 */
typedef struct QsoptCampaign QsoptCampaign;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version, a static string that must not be freed.
 */
const char *qsopt_version(void);

/**
 * Message for the failure of the latest status-returning call on this
 * thread, or NULL if it succeeded. Valid until the next such call.
 */
const char *qsopt_last_error(void);

/**
 * # Safety
 * `s` must come from this library and not have been freed. NULL is ignored.
 */
void qsopt_string_free(char *s);

/**
 * Creates a campaign from a JSON configuration.
 *
 * # Safety
 * `id` and `config_json` must be NUL-terminated; `out` must be writable.
 */
enum QsoptStatus qsopt_campaign_new(const char *id,
                                    const char *config_json,
                                    struct QsoptCampaign **out);

/**
 * Default configuration for a builtin oracle, as JSON.
 *
 * # Safety
 * `name` must be NUL-terminated; `out` must be writable.
 */
enum QsoptStatus qsopt_default_config(const char *name,
                                      uintptr_t design_size,
                                      uintptr_t max_runs,
                                      uint64_t seed,
                                      char **out);

/**
 * Loads a campaign file and keeps saving to it after every change.
 *
 * # Safety
 * `path` must be NUL-terminated; `out` must be writable.
 */
enum QsoptStatus qsopt_campaign_load(const char *path, struct QsoptCampaign **out);

/**
 * Saves now and after every later change.
 *
 * # Safety
 * `h` must be a live handle; `path` must be NUL-terminated.
 */
enum QsoptStatus qsopt_campaign_attach(struct QsoptCampaign *h, const char *path);

/**
 * # Safety
 * `h` must come from this library and not have been freed. NULL is ignored.
 */
void qsopt_campaign_free(struct QsoptCampaign *h);

/**
 * Next run as JSON; repeated calls return the same run until an observation.
 *
 * # Safety
 * `h` must be a live handle; `out` must be writable.
 */
enum QsoptStatus qsopt_campaign_suggest(struct QsoptCampaign *h, char **out);

/**
 * Records a response. `point_json` is `{"x": [...], "o": [...]}` on the raw
 * scale; `nonce` may be NULL. `appended` (nullable) receives 0 when the
 * nonce was already recorded.
 *
 * # Safety
 * `h` must be a live handle; strings NUL-terminated or NULL where allowed.
 */
enum QsoptStatus qsopt_campaign_observe(struct QsoptCampaign *h,
                                        const char *point_json,
                                        double y,
                                        const char *nonce,
                                        bool manual,
                                        bool *appended);

/**
 * 1 while the campaign accepts runs, 0 once stopped, -1 for NULL.
 *
 * # Safety
 * `h` must be a live handle or NULL.
 */
int32_t qsopt_campaign_is_active(const struct QsoptCampaign *h);

/**
 * Number of recorded runs.
 *
 * # Safety
 * `h` must be a live handle; `out` must be writable.
 */
enum QsoptStatus qsopt_campaign_runs(const struct QsoptCampaign *h, uintptr_t *out);

/**
 * Full campaign state as JSON.
 *
 * # Safety
 * `h` must be a live handle; `out` must be writable.
 */
enum QsoptStatus qsopt_campaign_to_json(struct QsoptCampaign *h, char **out);

/**
 * Hyperparameters and latent order-position coordinates as JSON.
 *
 * # Safety
 * `h` must be a live handle; `out` must be writable.
 */
enum QsoptStatus qsopt_campaign_model(struct QsoptCampaign *h, char **out);

/**
 * Evaluates a builtin oracle at a raw-scale point.
 *
 * # Safety
 * Strings must be NUL-terminated; `out` must be writable.
 */
enum QsoptStatus qsopt_oracle_evaluate(const char *name, const char *point_json, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* QSOPT_H */

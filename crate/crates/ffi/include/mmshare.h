#ifndef MMSHARE_H
#define MMSHARE_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

#define MMW_SCHEME_HYBRID 1

#define MMW_SCHEME_LICENSED 2

#define MMW_SCHEME_POOLED 4

#define MMW_SCHEME_ALL 7

#define MMW_CARRIER_LOW 0

#define MMW_CARRIER_HIGH 1

#define MMW_STATE_LOS 0

#define MMW_STATE_NLOS 1

/**
 * Result code of every fallible call.
 */
typedef enum MmwStatus {
  MMW_STATUS_OK = 0,
  MMW_STATUS_NULL_POINTER = 1,
  MMW_STATUS_INVALID_UTF8 = 2,
  MMW_STATUS_CONFIG = 3,
  MMW_STATUS_INVALID_ARGUMENT = 4,
  MMW_STATUS_RUNTIME = 5,
  MMW_STATUS_NO_DATA = 6,
  MMW_STATUS_PANIC = 7,
} MmwStatus;

/**
 * Pooled per-UE statistics of a finished run.
 */
typedef struct MmwReport MmwReport;

/**
 * Validated scenario.
 */
typedef struct MmwScenario MmwScenario;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or NULL. Valid until the
 * next call into this library from the same thread.
 */
const char *mmw_last_error_message(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *mmw_version(void);

/**
 * Parse and validate a TOML scenario. `toml` may be empty for defaults.
 *
 * # Safety
 * `toml` must be a NUL-terminated string and `out` a writable pointer.
 */
enum MmwStatus mmw_scenario_from_toml(const char *toml, struct MmwScenario **out);

/**
 * Release a scenario. NULL is ignored.
 *
 * # Safety
 * `s` must come from [`mmw_scenario_from_toml`] and not be freed twice.
 */
void mmw_scenario_free(struct MmwScenario *s);

/**
 * Run the schemes in `scheme_mask` (`MMW_SCHEME_*` bits). `repetitions == 0`
 * uses the scenario's count; `threads == 0` uses all cores.
 *
 * # Safety
 * `s` must be a live scenario and `out` a writable pointer.
 */
enum MmwStatus mmw_run(const struct MmwScenario *s,
                       uint32_t scheme_mask,
                       uint64_t seed,
                       uintptr_t repetitions,
                       uintptr_t threads,
                       struct MmwReport **out);

/**
 * Nearest-rank percentile `p` in [0, 100] of per-UE rates, bit/s.
 *
 * # Safety
 * `r` must be a live report and `out` a writable pointer.
 */
enum MmwStatus mmw_report_percentile(const struct MmwReport *r,
                                     uint32_t scheme,
                                     double p,
                                     double *out);

/**
 * Mean per-UE rate, bit/s.
 *
 * # Safety
 * `r` must be a live report and `out` a writable pointer.
 */
enum MmwStatus mmw_report_mean_rate(const struct MmwReport *r, uint32_t scheme, double *out);

/**
 * Number of pooled UE samples.
 *
 * # Safety
 * `r` must be a live report and `out` a writable pointer.
 */
enum MmwStatus mmw_report_sample_count(const struct MmwReport *r, uint32_t scheme, uintptr_t *out);

/**
 * Copy up to `cap` sorted rates into `buf`; `total` receives the full count.
 * `buf` may be NULL when `cap` is 0.
 *
 * # Safety
 * `buf` must hold `cap` doubles; `r` must be live; `total` writable.
 */
enum MmwStatus mmw_report_rates(const struct MmwReport *r,
                                uint32_t scheme,
                                double *buf,
                                uintptr_t cap,
                                uintptr_t *total);

/**
 * Release a report. NULL is ignored.
 *
 * # Safety
 * `r` must come from [`mmw_run`] and not be freed twice.
 */
void mmw_report_free(struct MmwReport *r);

/**
 * Outage, LOS and NLOS probabilities at `distance_m`, written to `out[0..3]`.
 *
 * # Safety
 * `s` must be live and `out` must hold 3 doubles.
 */
enum MmwStatus mmw_link_state_probs(const struct MmwScenario *s, double distance_m, double *out);

/**
 * Median path loss (no shadowing) in dB on `carrier` in `state`.
 *
 * # Safety
 * `s` must be live and `out` writable.
 */
enum MmwStatus mmw_pathloss_db(const struct MmwScenario *s,
                               uint32_t carrier,
                               uint32_t state,
                               double distance_m,
                               double *out);

/**
 * Child seed of `base` for one `(label, index)` pair; NULL label maps to "".
 *
 * # Safety
 * `label` must be NULL or a NUL-terminated string.
 */
uint64_t mmw_derive_seed(uint64_t base, const char *label, uint64_t index);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MMSHARE_H */

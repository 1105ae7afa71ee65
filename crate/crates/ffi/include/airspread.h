#ifndef AIRSPREAD_H
#define AIRSPREAD_H

#include <stddef.h>
#include <stdint.h>

typedef enum AirspreadCompartment {
  AIRSPREAD_COMPARTMENT_SUSCEPTIBLE = 0,
  AIRSPREAD_COMPARTMENT_EXPOSED = 1,
  AIRSPREAD_COMPARTMENT_INFECTED = 2,
} AirspreadCompartment;

typedef enum AirspreadStatus {
  AIRSPREAD_STATUS_OK = 0,
  AIRSPREAD_STATUS_NULL_POINTER = 1,
  AIRSPREAD_STATUS_INVALID_UTF8 = 2,
  AIRSPREAD_STATUS_INVALID_ARGUMENT = 3,
  // Bad config: unknown key, wrong type, missing file or invalid value.
  AIRSPREAD_STATUS_CONFIG = 4,
  // A room or config file failed to parse.
  AIRSPREAD_STATUS_FORMAT = 5,
  AIRSPREAD_STATUS_VALIDATION = 6,
  AIRSPREAD_STATUS_RESOLUTION = 7,
  AIRSPREAD_STATUS_CONVERGENCE = 8,
  AIRSPREAD_STATUS_STABILITY = 9,
  AIRSPREAD_STATUS_INJECTION = 10,
  AIRSPREAD_STATUS_IO = 11,
  AIRSPREAD_STATUS_INTERNAL = 12,
  // The caller's buffer is shorter than the data.
  AIRSPREAD_STATUS_BUFFER_TOO_SMALL = 13,
  AIRSPREAD_STATUS_PANIC = 14,
} AirspreadStatus;

// Simulation config handle.
typedef struct AirspreadConfig AirspreadConfig;

// Ensemble summary.
typedef struct AirspreadEnsemble AirspreadEnsemble;

// One realization's results.
typedef struct AirspreadRealization AirspreadRealization;

// Particle budget of a realization, in particles.
typedef struct AirspreadLedger {
  double emitted;
  double mask_trapped_out;
  double absorbed;
  double mask_trapped_in;
  double decayed;
  double vented;
  double outflow;
  double field;
} AirspreadLedger;

typedef struct AirspreadTestResult {
  double statistic;
  double p_value;
  double df;
} AirspreadTestResult;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version as a static NUL-terminated string.
const char *airspread_version(void);

// Copies the last error message of this thread into `buf` (truncated and
// NUL-terminated) and returns its full length in bytes, excluding the NUL.
// Pass a null `buf` to query the length.
//
// # Safety
// `buf` must be null or point to `cap` writable bytes.
uintptr_t airspread_last_error(char *buf, uintptr_t cap);

// Creates a config holding the defaults.
//
// # Safety
// `out` must be a valid pointer to write the handle to.
enum AirspreadStatus airspread_config_default(struct AirspreadConfig **out);

// Parses a TOML config layered over the defaults. A relative `room.file`
// resolves against the working directory.
//
// # Safety
// `toml` must be a NUL-terminated string; `out` a valid pointer.
enum AirspreadStatus airspread_config_parse(const char *toml, struct AirspreadConfig **out);

// Loads a TOML config file.
//
// # Safety
// `path` must be a NUL-terminated string; `out` a valid pointer.
enum AirspreadStatus airspread_config_load(const char *path, struct AirspreadConfig **out);

// Applies one `dotted.key=value` override. The config is unchanged on
// failure.
//
// # Safety
// `config` must be a live handle; `assignment` a NUL-terminated string.
enum AirspreadStatus airspread_config_set(struct AirspreadConfig *config, const char *assignment);

// Writes the 16-character config hash plus a NUL into `buf`.
//
// # Safety
// `config` must be a live handle; `buf` must hold `cap` bytes.
enum AirspreadStatus airspread_config_hash(const struct AirspreadConfig *config,
                                           char *buf,
                                           uintptr_t cap);

// Releases a config. Null is ignored.
//
// # Safety
// `config` must be null or a handle not yet freed.
void airspread_config_free(struct AirspreadConfig *config);

// Runs realization `index` of the config.
//
// # Safety
// `config` must be a live handle; `out` a valid pointer.
enum AirspreadStatus airspread_run_realization(const struct AirspreadConfig *config,
                                               uint64_t index,
                                               struct AirspreadRealization **out);

// Number of samples in the series.
//
// # Safety
// `result` must be a live handle; `out` a valid pointer.
enum AirspreadStatus airspread_realization_sample_count(const struct AirspreadRealization *result,
                                                        uintptr_t *out);

// Copies the sample times (s) and S, E, I counts into arrays of `cap`
// elements.
//
// # Safety
// `result` must be a live handle; each array must hold `cap` elements.
enum AirspreadStatus airspread_realization_series(const struct AirspreadRealization *result,
                                                  double *t,
                                                  uint64_t *s,
                                                  uint64_t *e,
                                                  uint64_t *i,
                                                  uintptr_t cap);

// Id of the initially infected agent.
//
// # Safety
// `result` must be a live handle; `out` a valid pointer.
enum AirspreadStatus airspread_realization_index_agent(const struct AirspreadRealization *result,
                                                       uintptr_t *out);

// Final exposed fraction beyond the index agent.
//
// # Safety
// `result` must be a live handle; `out` a valid pointer.
enum AirspreadStatus airspread_realization_final_exposed(const struct AirspreadRealization *result,
                                                         double *out);

// # Safety
// `result` must be a live handle; `out` a valid pointer.
enum AirspreadStatus airspread_realization_ledger(const struct AirspreadRealization *result,
                                                  struct AirspreadLedger *out);

// Releases a realization result. Null is ignored.
//
// # Safety
// `result` must be null or a handle not yet freed.
void airspread_realization_free(struct AirspreadRealization *result);

// Runs `run.realizations` realizations and summarizes them.
//
// # Safety
// `config` must be a live handle; `out` a valid pointer.
enum AirspreadStatus airspread_run_ensemble(const struct AirspreadConfig *config,
                                            struct AirspreadEnsemble **out);

// Number of sample times.
//
// # Safety
// `ensemble` must be a live handle; `out` a valid pointer.
enum AirspreadStatus airspread_ensemble_sample_count(const struct AirspreadEnsemble *ensemble,
                                                     uintptr_t *out);

// Number of realizations.
//
// # Safety
// `ensemble` must be a live handle; `out` a valid pointer.
enum AirspreadStatus airspread_ensemble_realization_count(const struct AirspreadEnsemble *ensemble,
                                                          uintptr_t *out);

// # Safety
// `ensemble` must be a live handle; `out` must hold `cap` elements.
enum AirspreadStatus airspread_ensemble_times(const struct AirspreadEnsemble *ensemble,
                                              double *out,
                                              uintptr_t cap);

// Copies the mean and standard deviation of one compartment's fraction.
//
// # Safety
// `ensemble` must be a live handle; `mean` and `std` must hold `cap`
// elements each.
enum AirspreadStatus airspread_ensemble_series(const struct AirspreadEnsemble *ensemble,
                                               enum AirspreadCompartment compartment,
                                               double *mean,
                                               double *std,
                                               uintptr_t cap);

// Final exposed fraction of each realization.
//
// # Safety
// `ensemble` must be a live handle; `out` must hold `cap` elements.
enum AirspreadStatus airspread_ensemble_final_exposed(const struct AirspreadEnsemble *ensemble,
                                                      double *out,
                                                      uintptr_t cap);

// Releases an ensemble. Null is ignored.
//
// # Safety
// `ensemble` must be null or a handle not yet freed.
void airspread_ensemble_free(struct AirspreadEnsemble *ensemble);

// Two-sided Welch t-test of `a` against `b`.
//
// # Safety
// `a` and `b` must hold `na` and `nb` values; `out` a valid pointer.
enum AirspreadStatus airspread_welch_t_test(const double *a,
                                            uintptr_t na,
                                            const double *b,
                                            uintptr_t nb,
                                            struct AirspreadTestResult *out);

// Mean-centered Levene test over `k` groups; group `g` has `lens[g]`
// values at `groups[g]`.
//
// # Safety
// `groups` and `lens` must hold `k` entries, each group its length.
enum AirspreadStatus airspread_levene_test(const double *const *groups,
                                           const uintptr_t *lens,
                                           uintptr_t k,
                                           struct AirspreadTestResult *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* AIRSPREAD_H */

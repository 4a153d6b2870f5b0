#ifndef UAN_RELAY_H
#define UAN_RELAY_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum UanStatus {
  UAN_STATUS_OK = 0,
  UAN_STATUS_NULL_POINTER = 1,
  UAN_STATUS_INVALID_UTF8 = 2,
  UAN_STATUS_INVALID_CONFIG = 3,
  UAN_STATUS_DOMAIN = 4,
  // The budget cannot support the requested allocation.
  UAN_STATUS_INFEASIBLE = 5,
  UAN_STATUS_NO_CONVERGENCE = 6,
  UAN_STATUS_OUT_OF_RANGE = 7,
  UAN_STATUS_IO = 8,
  UAN_STATUS_PANIC = 9,
} UanStatus;

typedef enum UanScheme {
  UAN_SCHEME_UPA_FIXED = 0,
  UAN_SCHEME_ORP_UPA = 1,
  UAN_SCHEME_OPA_MIDPOINT = 2,
  UAN_SCHEME_JOINT = 3,
  UAN_SCHEME_APPROX = 4,
} UanScheme;

typedef enum UanVerdict {
  UAN_VERDICT_PASS = 0,
  UAN_VERDICT_FAIL = 1,
  UAN_VERDICT_NOT_APPLICABLE = 2,
  UAN_VERDICT_INCONCLUSIVE = 3,
} UanVerdict;

// Result of [`uan_run`].
typedef struct UanReport UanReport;

// Scenario configuration. Create with [`uan_scenario_default`] or
// [`uan_scenario_from_json`].
typedef struct UanScenario UanScenario;

typedef struct UanOutage {
  double p_hat;
  double ci95_halfwidth;
  uint64_t trials;
  uint64_t seed;
} UanOutage;

typedef struct UanBand {
  double f_khz;
  double p_s;
  double p_r;
} UanBand;

typedef struct UanCertificate {
  double det2;
  double det3;
  double det4;
  double closed_form_det3;
  double step_disagreement;
  enum UanVerdict verdict;
} UanCertificate;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread; empty after a success.
// The pointer stays valid until the next library call on this thread.
const char *uan_last_error(void);

// Library version as a static NUL-terminated string.
const char *uan_version(void);

// # Safety
// `out` must be valid for writes.
enum UanStatus uan_scenario_default(struct UanScenario **out);

// Parses a JSON scenario; missing keys take their defaults.
//
// # Safety
// `json` must be a NUL-terminated string and `out` valid for writes.
enum UanStatus uan_scenario_from_json(const char *json, struct UanScenario **out);

// # Safety
// `scenario` must come from this library and not be used afterwards. Null is ignored.
void uan_scenario_free(struct UanScenario *scenario);

// Serializes the scenario; free the result with [`uan_string_free`].
//
// # Safety
// `scenario` must be a live handle and `out` valid for writes.
enum UanStatus uan_scenario_to_json(const struct UanScenario *scenario, char **out);

// Hex SHA-256 of the scenario; free with [`uan_string_free`].
//
// # Safety
// `scenario` must be a live handle and `out` valid for writes.
enum UanStatus uan_scenario_hash(const struct UanScenario *scenario, char **out);

// # Safety
// `scenario` must be a live handle.
enum UanStatus uan_scenario_set_scheme(struct UanScenario *scenario, enum UanScheme scheme);

// # Safety
// `scenario` must be a live handle.
enum UanStatus uan_scenario_set_bands(struct UanScenario *scenario, uintptr_t n);

// # Safety
// `scenario` must be a live handle.
enum UanStatus uan_scenario_set_trials(struct UanScenario *scenario,
                                       uint64_t trials,
                                       uint64_t seed);

// Sum-power budget in dB re μPa.
//
// # Safety
// `scenario` must be a live handle.
enum UanStatus uan_scenario_set_budget_db(struct UanScenario *scenario, double budget_db);

// Outage threshold in bits/s.
//
// # Safety
// `scenario` must be a live handle.
enum UanStatus uan_scenario_set_rate(struct UanScenario *scenario, double rate_bps);

// Constant channel gains for the two hops.
//
// # Safety
// `scenario` must be a live handle.
enum UanStatus uan_scenario_set_gain_ratio(struct UanScenario *scenario, double c_sr, double c_rd);

// Validates the scenario and runs its scheme.
//
// # Safety
// `scenario` must be a live handle and `out` valid for writes.
enum UanStatus uan_run(const struct UanScenario *scenario, struct UanReport **out);

// # Safety
// `report` must come from this library and not be used afterwards. Null is ignored.
void uan_report_free(struct UanReport *report);

// Relay distance from the source, km.
//
// # Safety
// `report` must be a live handle and `out` valid for writes.
enum UanStatus uan_report_relay_km(const struct UanReport *report, double *out);

// # Safety
// `report` must be a live handle and `out` valid for writes.
enum UanStatus uan_report_outage(const struct UanReport *report, struct UanOutage *out);

// # Safety
// `report` must be a live handle and `out` valid for writes.
enum UanStatus uan_report_band_count(const struct UanReport *report, uintptr_t *out);

// # Safety
// `report` must be a live handle and `out` valid for writes.
enum UanStatus uan_report_band(const struct UanReport *report,
                               uintptr_t index,
                               struct UanBand *out);

// Full report as JSON; free with [`uan_string_free`].
//
// # Safety
// `report` must be a live handle and `out` valid for writes.
enum UanStatus uan_report_to_json(const struct UanReport *report, char **out);

// Bordered-Hessian certificate at one operating point of the scenario's
// environment and fading model.
//
// # Safety
// `scenario` must be a live handle and `out` valid for writes.
enum UanStatus uan_hessian_certificate(const struct UanScenario *scenario,
                                       double f_khz,
                                       double psd_source,
                                       double psd_relay,
                                       double relay_km,
                                       struct UanCertificate *out);

// # Safety
// `s` must come from this library and not be used afterwards. Null is ignored.
void uan_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* UAN_RELAY_H */

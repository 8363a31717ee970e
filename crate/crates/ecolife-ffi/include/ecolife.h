#ifndef ECOLIFE_H
#define ECOLIFE_H

/* This file is generated by cbindgen from ecolife-ffi; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

// Status codes returned by every fallible entry point.
typedef enum EcoLifeStatus {
  ECOLIFE_OK = 0,
  ECOLIFE_NULL_ARGUMENT = 1,
  ECOLIFE_INVALID_UTF8 = 2,
  ECOLIFE_CONFIG_ERROR = 3,
  ECOLIFE_IO_ERROR = 4,
  ECOLIFE_RUN_ERROR = 5,
} EcoLifeStatus;

// A completed simulation: records plus summary, ready for inspection or
// report emission. Opaque across the ABI.
typedef struct EcoLifeRun EcoLifeRun;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Generate a named synthetic scenario and run `scheduler` against it.
//
// `options_json` may be null or a JSON object (see the crate docs for the
// accepted keys). On success `*out` owns the run.
//
// # Safety
// `scenario` and `scheduler` must be valid NUL-terminated strings;
// `options_json` may be null; `out` must be a valid pointer.
enum EcoLifeStatus ecolife_run_from_scenario(const char *scenario,
                                             const char *scheduler,
                                             uint64_t seed,
                                             const char *options_json,
                                             struct EcoLifeRun **out);

// Load a trace, carbon-intensity series, and profile catalog from files
// and run `scheduler` against them. The built-in hardware pair is used.
//
// # Safety
// Path and scheduler pointers must be valid NUL-terminated strings;
// `options_json` may be null; `out` must be a valid pointer.
enum EcoLifeStatus ecolife_run_from_files(const char *trace_path,
                                          const char *ci_path,
                                          const char *profiles_path,
                                          const char *scheduler,
                                          uint64_t seed,
                                          const char *options_json,
                                          struct EcoLifeRun **out);

// Total service time over the run, seconds. Returns 0 for a null handle.
//
// # Safety
// `run` must be null or a live handle from a constructor.
double ecolife_total_service_time_s(const struct EcoLifeRun *run);

// Total carbon over the run (service plus keep-alive), grams.
//
// # Safety
// `run` must be null or a live handle from a constructor.
double ecolife_total_carbon_g(const struct EcoLifeRun *run);

// Realized combined objective of the run.
//
// # Safety
// `run` must be null or a live handle from a constructor.
double ecolife_total_objective(const struct EcoLifeRun *run);

// Number of invocations processed.
//
// # Safety
// `run` must be null or a live handle from a constructor.
uint64_t ecolife_invocations(const struct EcoLifeRun *run);

// Number of cold starts.
//
// # Safety
// `run` must be null or a live handle from a constructor.
uint64_t ecolife_cold_starts(const struct EcoLifeRun *run);

// Number of warm-pool evictions.
//
// # Safety
// `run` must be null or a live handle from a constructor.
uint64_t ecolife_evictions(const struct EcoLifeRun *run);

// Serialize the run summary to a JSON string. Free it with
// `ecolife_string_free`.
//
// # Safety
// `run` must be a live handle; `out` must be a valid pointer.
enum EcoLifeStatus ecolife_summary_json(const struct EcoLifeRun *run, char **out);

// Write the run's report files (records, summary, cdf, overhead) into
// `out_dir`.
//
// # Safety
// `run` must be a live handle; `out_dir` a valid NUL-terminated string.
enum EcoLifeStatus ecolife_write_report(const struct EcoLifeRun *run, const char *out_dir);

// Last error message for this thread; empty until a call fails. Borrowed:
// valid until the next failing call on the same thread.
const char *ecolife_last_error(void);

// Free a string returned by this library.
//
// # Safety
// `s` must have been returned by `ecolife_summary_json` and not yet freed.
void ecolife_string_free(char *s);

// Free a run handle.
//
// # Safety
// `run` must have been returned by a constructor and not yet freed.
void ecolife_run_free(struct EcoLifeRun *run);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ECOLIFE_H */

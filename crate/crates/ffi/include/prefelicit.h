#ifndef PREFELICIT_H
#define PREFELICIT_H

/* Generated by cbindgen from prefelicit-ffi; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result codes for every fallible call.
typedef enum PeStatus {
  PE_STATUS_OK = 0,
  PE_STATUS_NULL_POINTER = 1,
  PE_STATUS_INVALID_ARGUMENT = 2,
  PE_STATUS_INVALID_BUNDLE = 3,
  PE_STATUS_INVALID_UTF8 = 4,
  PE_STATUS_PARSE_ERROR = 5,
  PE_STATUS_RUN_ERROR = 6,
  PE_STATUS_PANIC = 7,
} PeStatus;

// Opaque course catalog.
typedef struct PeCatalog PeCatalog;

// Opaque ground-truth student profile.
typedef struct PeProfile PeProfile;

// Opaque GUI report (the student's noisy self-report).
typedef struct PeReport PeReport;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the last error on this thread. Valid until the next failing
// call on the same thread; never null.
const char *pe_last_error_message(void);

// Library version as a static string; do not free.
const char *pe_version(void);

// Frees a string returned by this library.
//
// # Safety
// `ptr` must have come from this library and not be freed twice.
void pe_string_free(char *ptr);

// Creates a catalog; `max_bundle_size` must not exceed `num_courses`.
enum PeStatus pe_catalog_new(uint32_t num_courses,
                             uint32_t max_bundle_size,
                             struct PeCatalog **out);

// # Safety
// `catalog` must come from `pe_catalog_new` and not be freed twice.
void pe_catalog_free(struct PeCatalog *catalog);

// Number of valid bundles (all sizes up to the maximum).
enum PeStatus pe_catalog_num_bundles(const struct PeCatalog *catalog, uint64_t *out);

// Generates a random student profile for the catalog, deterministic in
// the seed.
enum PeStatus pe_profile_generate(const struct PeCatalog *catalog,
                                  uint64_t seed,
                                  struct PeProfile **out);

// # Safety
// `profile` must come from this library and not be freed twice.
void pe_profile_free(struct PeProfile *profile);

// Serializes a profile to JSON; free the string with `pe_string_free`.
enum PeStatus pe_profile_to_json(const struct PeProfile *profile, char **out);

// Parses a profile from JSON produced by `pe_profile_to_json`.
enum PeStatus pe_profile_from_json(const char *json, struct PeProfile **out);

// True value of a bundle given as an array of 1-based course ids.
enum PeStatus pe_true_value(const struct PeCatalog *catalog,
                            const struct PeProfile *profile,
                            const uint32_t *courses,
                            size_t num_courses,
                            double *out);

// Corrupts a profile into a GUI report under the given mistake
// parameters, deterministic in the seed.
enum PeStatus pe_report_corrupt(const struct PeProfile *profile,
                                double value_noise_std,
                                double group_omission_prob,
                                double strength_noise_std,
                                double gamma,
                                uint64_t seed,
                                struct PeReport **out);

// # Safety
// `report` must come from this library and not be freed twice.
void pe_report_free(struct PeReport *report);

// Value of a bundle under the GUI report.
enum PeStatus pe_reported_value(const struct PeCatalog *catalog,
                                const struct PeReport *report,
                                const uint32_t *courses,
                                size_t num_courses,
                                double *out);

// Exact argmax bundle under the true valuation; writes the course ids and
// the value. `capacity` must be at least the catalog's maximum bundle
// size.
enum PeStatus pe_best_bundle_true(const struct PeCatalog *catalog,
                                  const struct PeProfile *profile,
                                  uint32_t *out_courses,
                                  size_t capacity,
                                  size_t *out_len,
                                  double *out_value);

// Exact argmax bundle under the GUI report.
enum PeStatus pe_best_bundle_reported(const struct PeCatalog *catalog,
                                      const struct PeReport *report,
                                      uint32_t *out_courses,
                                      size_t capacity,
                                      size_t *out_len,
                                      double *out_value);

// Runs one student's full elicitation pipeline (simulated proxy only)
// from a TOML experiment configuration, returning the result as JSON.
// Free the string with `pe_string_free`.
enum PeStatus pe_run_student(const char *config_toml, size_t student_index, char **out_json);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PREFELICIT_H */

#ifndef PFTSP_H
#define PFTSP_H

/* Generated with cbindgen; edit the Rust source, not this file. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Codec selector mirrored into the header.
typedef enum PfCodec {
  PF_CODEC_NON_FACTORIAL = 0,
  PF_CODEC_FACTORIAL = 1,
} PfCodec;

// Status codes returned by every fallible call.
typedef enum PfStatus {
  PF_STATUS_OK = 0,
  // A required pointer argument was null.
  PF_STATUS_NULL_ARGUMENT = 1,
  // Invalid configuration or argument values.
  PF_STATUS_CONFIG = 2,
  // A resource budget (dense statevector, enumeration size) was exceeded.
  PF_STATUS_RESOURCE = 3,
  // Malformed input data or a domain error.
  PF_STATUS_DATA = 4,
  // A panic was caught at the boundary.
  PF_STATUS_PANIC = 5,
} PfStatus;

// Opaque problem instance.
typedef struct PfInstance PfInstance;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Last error message for this thread, or null. Caller frees the string via
// [`pf_string_free`].
char *pf_last_error_message(void);

// Release a string returned by this library.
//
// # Safety
// `s` must be a pointer previously returned by a `pftsp` function and not
// yet freed; null is ignored.
void pf_string_free(char *s);

// Load an instance from a coordinate CSV ("x,y" per line).
//
// # Safety
// `path` must be a NUL-terminated string; `out` must be a valid pointer.
enum PfStatus pf_instance_load(const char *path, struct PfInstance **out);

// Generate a uniform random instance on the 100 x 100 square.
//
// # Safety
// `out` must be a valid pointer.
enum PfStatus pf_instance_random(uint32_t n, uint64_t seed, struct PfInstance **out);

// Release an instance handle.
//
// # Safety
// `inst` must come from an instance constructor and not be freed twice;
// null is ignored.
void pf_instance_free(struct PfInstance *inst);

// Location count, or 0 for a null handle.
//
// # Safety
// `inst` must be a live instance handle or null.
uint32_t pf_instance_n(const struct PfInstance *inst);

// Distance between two locations.
//
// # Safety
// `inst` must be a live instance handle; `out` a valid pointer.
enum PfStatus pf_instance_distance(const struct PfInstance *inst,
                                   uint32_t u,
                                   uint32_t v,
                                   double *out);

// Closed-tour length of a visiting order (`n` entries starting at 0).
//
// # Safety
// `order` must point to `n` readable entries; `out` must be valid.
enum PfStatus pf_tour_length(const struct PfInstance *inst, const uint32_t *order, double *out);

// Exact optimum; writes `n` entries to `out_order`.
//
// # Safety
// `out_order` must have room for `n` entries; `out_distance` must be valid.
enum PfStatus pf_brute_force_optimum(const struct PfInstance *inst,
                                     uint32_t *out_order,
                                     double *out_distance);

// Greedy nearest-neighbour tour; writes `n` entries to `out_order`.
//
// # Safety
// `out_order` must have room for `n` entries; `out_distance` must be valid.
enum PfStatus pf_greedy(const struct PfInstance *inst, uint32_t *out_order, double *out_distance);

// Required word length for a codec at `n` locations.
//
// # Safety
// `out` must be a valid pointer.
enum PfStatus pf_bit_length(enum PfCodec codec, uint32_t n, uint32_t *out);

// Decode an ASCII '0'/'1' word into a visiting order of `n` entries.
//
// # Safety
// `word` must be NUL-terminated; `out_order` must have room for `n` entries.
enum PfStatus pf_decode(enum PfCodec codec,
                        bool gray,
                        uint32_t n,
                        const char *word,
                        uint32_t *out_order);

// Encode a visiting order into a word that decodes back to it. The returned
// string is freed with [`pf_string_free`].
//
// # Safety
// `order` must point to `n` readable entries; `out_word` must be valid.
enum PfStatus pf_encode(enum PfCodec codec,
                        bool gray,
                        uint32_t n,
                        const uint32_t *order,
                        char **out_word);

// Uniform random-word baseline with the given draw budget; writes the best
// order found and its distance.
//
// # Safety
// `out_order` must have room for `n` entries; `out_distance` must be valid.
enum PfStatus pf_monte_carlo(const struct PfInstance *inst,
                             enum PfCodec codec,
                             bool gray,
                             uint64_t budget,
                             uint64_t seed,
                             uint32_t *out_order,
                             double *out_distance);

// Run the variational solver. `config_json` is an optional `VqaConfig`
// document (null for the tuned defaults); the run record is returned as
// JSON in `out_record_json`, freed with [`pf_string_free`].
//
// # Safety
// `config_json` must be NUL-terminated or null; `out_record_json` valid.
enum PfStatus pf_solve_vqa(const struct PfInstance *inst,
                           uint8_t circuit,
                           enum PfCodec codec,
                           bool gray,
                           const char *config_json,
                           uint64_t seed,
                           char **out_record_json);

// Run the classical ML solver. `config_json` is an optional `MlConfig`
// document (null for the tuned defaults); the run record is returned as
// JSON in `out_record_json`, freed with [`pf_string_free`].
//
// # Safety
// `config_json` must be NUL-terminated or null; `out_record_json` valid.
enum PfStatus pf_solve_ml(const struct PfInstance *inst,
                          enum PfCodec codec,
                          bool gray,
                          const char *config_json,
                          uint64_t seed,
                          char **out_record_json);

// Projected hardware completion time in seconds: `4 * I * n_shot * t_shot`.
double pf_estimate_runtime(uint64_t iterations, uint64_t shots, double t_shot);

#ifdef __cplusplus
} // extern "C"
#endif // __cplusplus

#endif /* PFTSP_H */

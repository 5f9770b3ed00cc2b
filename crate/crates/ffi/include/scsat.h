#ifndef SCSAT_H
#define SCSAT_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

#define SCSAT_OK 0

#define SCSAT_ERR_NULL 1

#define SCSAT_ERR_PARAMETER 2

#define SCSAT_ERR_RANGE 3

#define SCSAT_ERR_MODEL 4

#define SCSAT_ERR_NUMERIC 5

#define SCSAT_ERR_CONFIG 6

#define SCSAT_ERR_IO 7

#define SCSAT_ERR_BUFFER 8

#define SCSAT_ERR_PANIC 9

// An EXIT chart with its rate-loss decomposition.
typedef struct ScsatExitChart ScsatExitChart;

typedef struct ScsatInterleaver ScsatInterleaver;

// A (φ, ψ) system.
typedef struct ScsatSystem ScsatSystem;

// Message of the last failure on this thread; empty if none. The pointer
// stays valid until the next failing call on the same thread.
const char *scsat_last_error(void);

// Library version as a static NUL-terminated string.
const char *scsat_version(void);

// Regular (l, r) LDPC ensemble over the BEC with erasure probability eps.
int32_t scsat_system_bec_new(size_t l, size_t r, double eps, struct ScsatSystem **result);

int32_t scsat_system_identity_new(struct ScsatSystem **result);

// BICM system for a 16-QAM preset ("gray", "natural", "set-partition",
// "id-optimized") with a regular (l, r) decoder. `smoothing` <= 0 keeps
// the unsmoothed decoder curve.
int32_t scsat_system_bicm_new(const char *mapping,
                              double snr_db,
                              size_t l,
                              size_t r,
                              double smoothing,
                              struct ScsatSystem **result);

void scsat_system_free(struct ScsatSystem *system);

// Largest and BP fixed points of u = φ₀(ψ₀(u)).
int32_t scsat_fixed_points(const struct ScsatSystem *system, double *u_opt, double *u_bp);

// Runs coupled DE with L = `sections`, width `w`, and copies the final
// u profile into `u_out` (length at least `sections`). `saturated` is set
// to 1 when min u ≥ u_opt − delta.
int32_t scsat_de_run(const struct ScsatSystem *system,
                     size_t sections,
                     size_t w,
                     size_t max_iter,
                     double delta,
                     double *u_out,
                     size_t u_len,
                     int32_t *saturated);

// Sets `unique` to 1 when u_opt is the unique global minimizer of the
// potential on an `n_grid`-point grid.
int32_t scsat_potential_unique_min(const struct ScsatSystem *system,
                                   size_t n_grid,
                                   int32_t *unique);

// Erasure probability where u_opt stops being the unique global
// minimizer for the regular (l, r) ensemble, bisected in [lo, hi].
int32_t scsat_potential_threshold_bec(size_t l,
                                      size_t r,
                                      double lo,
                                      double hi,
                                      double tol,
                                      double *eps);

// BP and MAP erasure thresholds of the regular (l, r) ensemble.
int32_t scsat_ensemble_thresholds(size_t l, size_t r, double *eps_bp, double *eps_map);

// Coded-modulation capacity of a 16-QAM preset in bits per symbol.
int32_t scsat_cm_capacity(const char *mapping, double snr_db, double *capacity);

int32_t scsat_exit_chart_new(const char *mapping,
                             double snr_db,
                             size_t l,
                             size_t r,
                             struct ScsatExitChart **result);

void scsat_exit_chart_free(struct ScsatExitChart *chart);

// Areas S_t, S_m, S_b and the rate-loss residual
// C_CM − Qr − QS_b − Q(S_t − S_m).
int32_t scsat_exit_chart_areas(const struct ScsatExitChart *chart,
                               double *s_t,
                               double *s_m,
                               double *s_b,
                               double *residual);

// Sets `count` to the number of crossings and copies them into the
// arrays, ordered by z. `stable` entries are 1 or 0. With `cap` = 0 the
// arrays may be null and only the count is returned; a nonzero `cap`
// below the count fills the arrays and returns `SCSAT_ERR_BUFFER`.
int32_t scsat_exit_chart_crossings(const struct ScsatExitChart *chart,
                                   double *z,
                                   double *u,
                                   int32_t *stable,
                                   size_t cap,
                                   size_t *count);

int32_t scsat_interleaver_new(size_t sections,
                              size_t w,
                              size_t m,
                              uint64_t seed,
                              struct ScsatInterleaver **result);

void scsat_interleaver_free(struct ScsatInterleaver *il);

// (bit, section) ↦ (bit_out, section_out).
int32_t scsat_interleaver_forward(const struct ScsatInterleaver *il,
                                  size_t bit,
                                  size_t section,
                                  size_t *bit_out,
                                  size_t *section_out);

int32_t scsat_interleaver_inverse(const struct ScsatInterleaver *il,
                                  size_t bit,
                                  size_t section,
                                  size_t *bit_out,
                                  size_t *section_out);

// Largest minus smallest per-offset bit count; 0 means exactly uniform.
int32_t scsat_interleaver_max_deviation(const struct ScsatInterleaver *il, size_t *deviation);

#endif  /* SCSAT_H */

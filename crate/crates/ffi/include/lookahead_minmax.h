#ifndef LOOKAHEAD_MINMAX_H
#define LOOKAHEAD_MINMAX_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum LammStatus {
  LAMM_OK = 0,
  LAMM_NULL_POINTER = 1,
  LAMM_INVALID_ARGUMENT = 2,
  LAMM_DIMENSION_MISMATCH = 3,
  LAMM_UNSUPPORTED = 4,
  LAMM_CONFIG = 5,
  LAMM_UNKNOWN_PRESET = 6,
  LAMM_NUMERICAL = 7,
  LAMM_IO = 8,
  LAMM_BUFFER_TOO_SMALL = 9,
  LAMM_PANIC = 10,
} LammStatus;

// Trajectory series tag.
typedef enum LammSeries {
  LAMM_SERIES_FAST = 0,
  LAMM_SERIES_SLOW = 1,
  LAMM_SERIES_SUPER_SLOW = 2,
  LAMM_SERIES_EMA = 3,
  LAMM_SERIES_UMA = 4,
  LAMM_SERIES_EMA_SLOW = 5,
  LAMM_SERIES_UMA_SLOW = 6,
} LammSeries;

// Opaque game problem.
typedef struct LammProblem LammProblem;

// Opaque run result.
typedef struct LammTrajectory LammTrajectory;

// One trajectory row.
typedef struct LammRow {
  uint64_t update;
  double passes;
  double distance;
  enum LammSeries series;
} LammRow;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or NULL. Valid until
// the next failing call on the same thread.
const char *lamm_last_error(void);

// Library version as a static NUL-terminated string.
const char *lamm_version(void);

// `L(x, y) = x·y`.
enum LammStatus lamm_problem_bilinear2d(struct LammProblem **out);

// `L(x, y) = a·x² + b·x·y + c·y²`.
enum LammStatus lamm_problem_quadratic2d(double a, double b, double c, struct LammProblem **out);

// Stochastic bilinear game with `n = d` samples drawn from `seed`.
enum LammStatus lamm_problem_stochastic_bilinear(size_t n,
                                                 size_t d,
                                                 uint64_t seed,
                                                 struct LammProblem **out);

// `bilinear2d`, `qp1`, `qp2`, `sbg` or `sbg:<seed>`.
enum LammStatus lamm_problem_preset(const char *name, struct LammProblem **out);

// Releases a problem. NULL is a no-op.
void lamm_problem_free(struct LammProblem *problem);

enum LammStatus lamm_problem_dims(const struct LammProblem *problem,
                                  size_t *d_theta,
                                  size_t *d_phi);

// Full-batch joint vector field at `point = (θ, φ)`; `point_len` and
// `out_len` must both be `d_theta + d_phi`.
enum LammStatus lamm_problem_jvf(const struct LammProblem *problem,
                                 const double *point,
                                 size_t point_len,
                                 double *out,
                                 size_t out_len);

// Writes the optimum `(θ*, φ*)` into `out`.
enum LammStatus lamm_problem_optimum(const struct LammProblem *problem,
                                     double *out,
                                     size_t out_len);

// Euclidean distance from `point` to the optimum.
enum LammStatus lamm_problem_distance(const struct LammProblem *problem,
                                      const double *point,
                                      size_t point_len,
                                      double *out);

// Spectrum of an operator descriptor (e.g. `la:6:0.5/eg:0.3`) or run
// preset on `problem`. Writes the radius and, if `capacity` allows, the
// sorted eigenvalues; `count` always receives the eigenvalue count.
enum LammStatus lamm_spectrum(const struct LammProblem *problem,
                              const char *operator_,
                              double *radius,
                              double *eig_re,
                              double *eig_im,
                              size_t capacity,
                              size_t *count);

// Runs a TOML run config.
enum LammStatus lamm_run_toml(const char *config, struct LammTrajectory **out);

// Runs a named preset under run seed `seed`.
enum LammStatus lamm_run_preset(const char *name, uint64_t seed, struct LammTrajectory **out);

// Releases a trajectory. NULL is a no-op.
void lamm_trajectory_free(struct LammTrajectory *trajectory);

// Row count, or 0 for NULL.
size_t lamm_trajectory_len(const struct LammTrajectory *trajectory);

enum LammStatus lamm_trajectory_row(const struct LammTrajectory *trajectory,
                                    size_t index,
                                    struct LammRow *out);

// Last logged distance of `series`; `LAMM_INVALID_ARGUMENT` if the
// series is not in the trajectory.
enum LammStatus lamm_trajectory_final_distance(const struct LammTrajectory *trajectory,
                                               enum LammSeries series,
                                               double *out);

// Trajectory as CSV text; release with [`lamm_string_free`].
enum LammStatus lamm_trajectory_csv(const struct LammTrajectory *trajectory, char **out);

// Releases a string returned by this library. NULL is a no-op.
void lamm_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* LOOKAHEAD_MINMAX_H */

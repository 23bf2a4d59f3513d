#ifndef GRASPWRENCH_H
#define GRASPWRENCH_H

/* Generated by cbindgen from the graspwrench-ffi crate. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every fallible call.
 */
typedef enum GwStatus {
  GW_STATUS_OK = 0,
  GW_STATUS_NULL_POINTER = 1,
  GW_STATUS_INVALID = 2,
  GW_STATUS_NUMERICAL = 3,
  GW_STATUS_NOT_FORCE_CLOSURE = 4,
  GW_STATUS_IO = 5,
  /**
   * A Rust panic was caught at the boundary.
   */
  GW_STATUS_INTERNAL = 6,
} GwStatus;

/**
 * Sampled grasp wrench boundary.
 */
typedef struct GwBoundary GwBoundary;

/**
 * Contacts on an object, in the object frame.
 */
typedef struct GwContactSet GwContactSet;

typedef struct GwMesh GwMesh;

typedef struct GwSynthResult GwSynthResult;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the last error message of this thread into `buf` (NUL
 * terminated, truncated to `len`). Returns the full message length
 * without the terminator, 0 when there is none.
 *
 * # Safety
 * `buf` must be null or point to `len` writable bytes.
 */
size_t gw_last_error(char *buf, size_t len);

/**
 * Library version as a static NUL-terminated string.
 */
const char *gw_version(void);

/**
 * Point contacts with Coulomb friction `mu`. `p` and `n` hold `m`
 * positions and inward normals (3 doubles each).
 *
 * # Safety
 * `p` and `n` must point to `3*m` doubles; `out` must be writable.
 */
enum GwStatus gw_contacts_new_pcf(const double *p,
                                  const double *n,
                                  size_t m,
                                  double mu,
                                  struct GwContactSet **out_set);

/**
 * Soft-finger contacts with tangential friction `mu1` and torsional
 * friction `mu2`.
 *
 * # Safety
 * As [`gw_contacts_new_pcf`].
 */
enum GwStatus gw_contacts_new_sfc(const double *p,
                                  const double *n,
                                  size_t m,
                                  double mu1,
                                  double mu2,
                                  struct GwContactSet **out_set);

/**
 * # Safety
 * `set` must be null or a handle from `gw_contacts_new_*` not yet freed.
 */
void gw_contacts_free(struct GwContactSet *set);

/**
 * # Safety
 * `set` must be a live handle.
 */
size_t gw_contacts_len(const struct GwContactSet *set);

/**
 * Samples `k` boundary points of the grasp wrench space of `set`.
 *
 * # Safety
 * `set` must be a live handle; `out` must be writable.
 */
enum GwStatus gw_estimate(const struct GwContactSet *set,
                          size_t k,
                          double delta_deg,
                          bool cpn,
                          uint64_t seed,
                          struct GwBoundary **out_boundary);

/**
 * # Safety
 * `b` must be null or a handle from [`gw_estimate`] not yet freed.
 */
void gw_boundary_free(struct GwBoundary *b);

/**
 * Number of samples in `b`.
 *
 * # Safety
 * `b` must be a live handle.
 */
size_t gw_boundary_len(const struct GwBoundary *b);

/**
 * Copies directions and boundary wrenches (6 doubles per sample) into
 * `u` and `w`, either of which may be null. `capacity` is the number of
 * samples the buffers hold and must be at least [`gw_boundary_len`].
 *
 * # Safety
 * Non-null `u`/`w` must point to `6*capacity` writable doubles.
 */
enum GwStatus gw_boundary_copy(const struct GwBoundary *b, double *u, double *w, size_t capacity);

/**
 * Sample-based ε of the boundary; 0 when it is not force closure.
 *
 * # Safety
 * `b` must be a live handle; `eps` must be writable.
 */
enum GwStatus gw_boundary_epsilon(const struct GwBoundary *b, double *eps);

/**
 * Sample-based ε_t for the sector of half-angle `gamma_deg` about `w_t`.
 *
 * # Safety
 * `w_t` must point to 6 doubles; `eps_t` must be writable.
 */
enum GwStatus gw_boundary_epsilon_t(const struct GwBoundary *b,
                                    const double *w_t,
                                    double gamma_deg,
                                    double *eps_t);

/**
 * Cosine task energy of the boundary against the sector.
 *
 * # Safety
 * As [`gw_boundary_epsilon_t`].
 */
enum GwStatus gw_task_energy(const struct GwBoundary *b,
                             const double *w_t,
                             double gamma_deg,
                             double *energy);

/**
 * Mean LP ray scale of the boundary samples against the `d`-edge oracle
 * built from the same normalized contacts, over at most `max_points`
 * samples taken at an even stride (0 = all).
 *
 * # Safety
 * `b` must be a live handle; `mean_q` must be writable.
 */
enum GwStatus gw_boundary_oracle_mean_q(const struct GwBoundary *b,
                                        size_t d,
                                        size_t max_points,
                                        double *mean_q);

/**
 * Largest `q` with `q·w` inside the `d`-edge discretized grasp wrench
 * space of `set` (contacts used as given, without normalization).
 *
 * # Safety
 * `w` must point to 6 doubles; `q` must be writable.
 */
enum GwStatus gw_oracle_ray(const struct GwContactSet *set, const double *w, size_t d, double *q);

/**
 * Smallest LP ray scale over the 12 signed coordinate wrenches; positive
 * exactly when the `d`-edge discretization is force closure.
 *
 * # Safety
 * `set` must be a live handle; `margin` must be writable.
 */
enum GwStatus gw_force_closure_margin(const struct GwContactSet *set, size_t d, double *margin);

/**
 * Loads a triangle mesh from an OBJ file.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
enum GwStatus gw_mesh_load_obj(const char *path, struct GwMesh **out_mesh);

/**
 * Mesh from `nv` vertices (3 doubles each) and `nt` triangles (3
 * zero-based indices each).
 *
 * # Safety
 * `vertices` must hold `3*nv` doubles and `triangles` `3*nt` indices.
 */
enum GwStatus gw_mesh_new(const double *vertices,
                          size_t nv,
                          const uint32_t *triangles,
                          size_t nt,
                          struct GwMesh **out_mesh);

/**
 * # Safety
 * `mesh` must be null or a live mesh handle.
 */
void gw_mesh_free(struct GwMesh *mesh);

/**
 * Distance from `x` to the surface, negative inside a watertight mesh.
 *
 * # Safety
 * `x` must point to 3 doubles; `distance` must be writable.
 */
enum GwStatus gw_mesh_signed_distance(const struct GwMesh *mesh, const double *x, double *distance);

/**
 * Runs the bundled synthesis task `name` (e.g. "lift-sphere") with its
 * default settings and `seed`.
 *
 * # Safety
 * `name` must be a NUL-terminated string; `out` must be writable.
 */
enum GwStatus gw_synth_task(const char *name, uint64_t seed, struct GwSynthResult **out_result);

/**
 * # Safety
 * `r` must be null or a live result handle.
 */
void gw_synth_result_free(struct GwSynthResult *r);

/**
 * Whether the validated configuration covers the task sector without
 * excess penetration; false for a null handle.
 *
 * # Safety
 * `r` must be null or a live result handle.
 */
bool gw_synth_result_success(const struct GwSynthResult *r);

/**
 * # Safety
 * `r` must be a live result handle; `eps_t` must be writable.
 */
enum GwStatus gw_synth_result_eps_t(const struct GwSynthResult *r, double *eps_t);

/**
 * Full result as a JSON string owned by the caller; release it with
 * [`gw_string_free`].
 *
 * # Safety
 * `r` must be a live result handle; `json` must be writable.
 */
enum GwStatus gw_synth_result_json(const struct GwSynthResult *r, char **json);

/**
 * # Safety
 * `s` must be null or a string returned by this library, not yet freed.
 */
void gw_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* GRASPWRENCH_H */

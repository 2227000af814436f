#ifndef PCM_H
#define PCM_H

/* Generated by cbindgen from src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum PcmStatus {
  PCM_STATUS_OK = 0,
  PCM_STATUS_NULL_POINTER = 1,
  PCM_STATUS_INVALID_ARGUMENT = 2,
  PCM_STATUS_CONFIG = 3,
  PCM_STATUS_DATA = 4,
  PCM_STATUS_UNSUPPORTED = 5,
  PCM_STATUS_SINGULAR = 6,
  PCM_STATUS_PANIC = 7,
} PcmStatus;

// Which regression a configured engine is used for.
typedef enum PcmRole {
  // `Y` on `(X, Z)`.
  PCM_ROLE_G = 0,
  // Squared residuals on `(X, Z)`; the engine string `none` disables weighting.
  PCM_ROLE_V = 1,
  // Projection on `Z`; also `X` on `Z` for the GCM.
  PCM_ROLE_MF = 2,
  // `Y` on `Z`.
  PCM_ROLE_M = 3,
} PcmRole;

typedef enum PcmMethod {
  // Multi-split test.
  PCM_METHOD_MULTI = 0,
  // Single split.
  PCM_METHOD_SINGLE = 1,
  // Spline series test with four folds.
  PCM_METHOD_SPLINE = 2,
  PCM_METHOD_GCM = 3,
  PCM_METHOD_WILLIAMSON = 4,
  PCM_METHOD_WALD = 5,
} PcmMethod;

// Opaque test configuration handle.
typedef struct PcmConfig PcmConfig;

// Opaque dataset handle.
typedef struct PcmDataset PcmDataset;

typedef struct PcmResult {
  double statistic;
  double p_value;
  bool reject;
  bool degenerate;
} PcmResult;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failure on this thread, or null if none. Owned by the
// library and valid until the next call on this thread.
const char *pcm_last_error_message(void);

// Library version as a static NUL-terminated string.
const char *pcm_version(void);

// Copies row-major `x` (`n × dx`), `y` (`n`) and `z` (`n × dz`) into a new
// dataset. `z` may be null when `dz` is 0.
//
// # Safety
// `x`, `y` and `z` must point to at least `n·dx`, `n` and `n·dz` readable
// doubles, and `out` must be a valid pointer to write the handle to.
enum PcmStatus pcm_dataset_new(const double *x,
                               size_t dx,
                               const double *y,
                               const double *z,
                               size_t dz,
                               size_t n,
                               struct PcmDataset **out);

// Number of rows, or 0 for a null handle.
//
// # Safety
// `data` must be null or a live handle from [`pcm_dataset_new`].
size_t pcm_dataset_rows(const struct PcmDataset *data);

// # Safety
// `data` must be null or a handle from [`pcm_dataset_new`] not yet freed.
void pcm_dataset_free(struct PcmDataset *data);

// New configuration: least squares for every regression, six splits,
// level 0.05, seed 0.
//
// # Safety
// `out` must be a valid pointer to write the handle to.
enum PcmStatus pcm_config_new(struct PcmConfig **out);

// # Safety
// `config` must be null or a handle from [`pcm_config_new`] not yet freed.
void pcm_config_free(struct PcmConfig *config);

// Sets the engine for `role` from its text form, e.g. `"lasso:cv"` or
// `"forest:trees=200,leaf=5"`.
//
// # Safety
// `config` must be a live handle and `spec` a NUL-terminated string.
enum PcmStatus pcm_config_set_regressor(struct PcmConfig *config,
                                        enum PcmRole role,
                                        const char *spec);

// # Safety
// `config` must be a live handle.
enum PcmStatus pcm_config_set_splits(struct PcmConfig *config, size_t splits);

// # Safety
// `config` must be a live handle.
enum PcmStatus pcm_config_set_alpha(struct PcmConfig *config, double alpha);

// # Safety
// `config` must be a live handle.
enum PcmStatus pcm_config_set_seed(struct PcmConfig *config, uint64_t seed);

// Runs `method` on `data`. The GCM uses the `Mf` engine for `X` on `Z` and
// the `M` engine for `Y` on `Z`; the Williamson test uses `G` and `M`.
//
// # Safety
// `data` and `config` must be live handles and `out` a valid pointer.
enum PcmStatus pcm_run(const struct PcmDataset *data,
                       const struct PcmConfig *config,
                       enum PcmMethod method,
                       struct PcmResult *out);

// Asymptotic power in the univariate linear model. `method` is
// [`PcmMethod::Single`] for the split test or [`PcmMethod::Gcm`].
//
// # Safety
// `out` must be a valid pointer.
enum PcmStatus pcm_power(double beta,
                         double sigma_beta,
                         double sigma_xi_sq,
                         double sigma_eps_xi,
                         size_t n1,
                         size_t n2,
                         double alpha,
                         enum PcmMethod method,
                         double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PCM_H */

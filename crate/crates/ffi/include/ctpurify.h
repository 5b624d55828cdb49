#ifndef CTPURIFY_H
#define CTPURIFY_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stddef.h>
#include <stdint.h>

// Result of a call. Values match the command-line exit codes.
typedef enum CtpStatus {
  CTP_STATUS_OK = 0,
  // Unclassified failure, including a caught panic.
  CTP_STATUS_FAILURE = 1,
  CTP_STATUS_IO = 3,
  CTP_STATUS_FORMAT = 4,
  CTP_STATUS_DIMENSION_MISMATCH = 5,
  // Also returned for null or non-UTF-8 arguments.
  CTP_STATUS_INVALID_ARGUMENT = 6,
  CTP_STATUS_CONSTANT_IMAGE = 7,
  CTP_STATUS_GEOMETRY = 8,
  CTP_STATUS_NOISE_MODEL = 9,
  CTP_STATUS_PATH_EXISTS = 10,
  CTP_STATUS_MANIFEST = 11,
  CTP_STATUS_CONFIG = 12,
  CTP_STATUS_DENOISER = 13,
  CTP_STATUS_PAIR = 14,
  CTP_STATUS_BATCH_FAILURES = 15,
} CtpStatus;

// Reconstruction filter for [`ctp_iradon`].
typedef enum CtpFilter {
  CTP_FILTER_RAM_LAK = 0,
  CTP_FILTER_NONE = 1,
} CtpFilter;

// Normalized 2-D image.
typedef struct CtpImage CtpImage;

// Per-pixel region labels: 0 background, 1 body, 2 lung.
typedef struct CtpMask CtpMask;

// Projection data, one row per angle.
typedef struct CtpSinogram CtpSinogram;

// Parallel-beam geometry with uniformly spaced angles over [0, pi).
typedef struct CtpGeometry {
  size_t num_angles;
  // 0 derives the bin count from the image diagonal.
  size_t num_bins;
  // Detector bin width in pixels.
  double bin_spacing;
} CtpGeometry;

typedef struct CtpNoiseModel {
  double dose_fraction;
  double incident_photons_n0;
  double electronic_sigma;
  double mu_scale;
  uint64_t seed;
} CtpNoiseModel;

typedef struct CtpSegmentParams {
  size_t bins;
  size_t min_lung_area;
  double min_threshold;
} CtpSegmentParams;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the most recent failure on this thread, or NULL. The
// pointer stays valid until the next failing call on the same thread.
const char *ctp_last_error_message(void);

// Library version as a static NUL-terminated string.
const char *ctp_version(void);

struct CtpGeometry ctp_geometry_default(void);

struct CtpNoiseModel ctp_noise_model_default(void);

struct CtpSegmentParams ctp_segment_params_default(void);

// Copies `width * height` row-major values into a new image.
//
// # Safety
// `data` must point to `width * height` readable doubles.
enum CtpStatus ctp_image_new(size_t width,
                             size_t height,
                             const double *data,
                             struct CtpImage **out);

// Loads an image file, rescaling by the intensity range it declares.
//
// # Safety
// `path` must be a NUL-terminated string; `out` must be writable.
enum CtpStatus ctp_image_load(const char *path, struct CtpImage **out);

// # Safety
// `img` must be a live handle and `path` a NUL-terminated string.
enum CtpStatus ctp_image_save(const struct CtpImage *img, const char *path);

// Width in pixels, or 0 for a null handle.
//
// # Safety
// `img` must be null or a live handle.
size_t ctp_image_width(const struct CtpImage *img);

// # Safety
// `img` must be null or a live handle.
size_t ctp_image_height(const struct CtpImage *img);

// Copies the pixels, row-major, into `dst` (capacity `len` values).
//
// # Safety
// `img` must be a live handle; `dst` must hold `len` writable doubles.
enum CtpStatus ctp_image_copy_data(const struct CtpImage *img, double *dst, size_t len);

// # Safety
// `img` must be null or a handle not yet freed.
void ctp_image_free(struct CtpImage *img);

// # Safety
// `path` must be a NUL-terminated string; `out` must be writable.
enum CtpStatus ctp_mask_load(const char *path, struct CtpMask **out);

// # Safety
// `mask` must be a live handle and `path` a NUL-terminated string.
enum CtpStatus ctp_mask_save(const struct CtpMask *mask, const char *path);

// # Safety
// `mask` must be null or a live handle.
size_t ctp_mask_width(const struct CtpMask *mask);

// # Safety
// `mask` must be null or a live handle.
size_t ctp_mask_height(const struct CtpMask *mask);

// Pixels carrying `label` (0, 1 or 2); 0 for a null handle or unknown label.
//
// # Safety
// `mask` must be null or a live handle.
size_t ctp_mask_count(const struct CtpMask *mask, uint8_t label);

// Copies the label codes, row-major, into `dst`.
//
// # Safety
// `mask` must be a live handle; `dst` must hold `len` writable bytes.
enum CtpStatus ctp_mask_copy_labels(const struct CtpMask *mask, uint8_t *dst, size_t len);

// # Safety
// `mask` must be null or a handle not yet freed.
void ctp_mask_free(struct CtpMask *mask);

// # Safety
// `sino` must be null or a live handle.
size_t ctp_sinogram_num_angles(const struct CtpSinogram *sino);

// # Safety
// `sino` must be null or a live handle.
size_t ctp_sinogram_num_bins(const struct CtpSinogram *sino);

// Copies the line integrals, angle-major, into `dst`.
//
// # Safety
// `sino` must be a live handle; `dst` must hold `len` writable doubles.
enum CtpStatus ctp_sinogram_copy_data(const struct CtpSinogram *sino, double *dst, size_t len);

// # Safety
// `sino` must be null or a handle not yet freed.
void ctp_sinogram_free(struct CtpSinogram *sino);

// # Safety
// `out` must be writable.
enum CtpStatus ctp_shepp_logan(size_t size, struct CtpImage **out);

// Synthetic chest slice. `truth` may be null when the ground-truth mask is
// not wanted.
//
// # Safety
// `image` must be writable; `truth` must be null or writable.
enum CtpStatus ctp_lung_phantom(size_t size,
                                uint64_t seed,
                                struct CtpImage **image,
                                struct CtpMask **truth);

// `params` may be null for the defaults.
//
// # Safety
// `img` must be a live handle, `params` null or readable, `out` writable.
enum CtpStatus ctp_segment(const struct CtpImage *img,
                           const struct CtpSegmentParams *params,
                           struct CtpMask **out);

// Common mask of the uLDCT and NDCT masks.
//
// # Safety
// Both handles must be live and `out` writable.
enum CtpStatus ctp_mask_common(const struct CtpMask *uldct,
                               const struct CtpMask *ndct,
                               struct CtpMask **out);

// `geom` may be null for the default geometry.
//
// # Safety
// `img` must be a live handle, `geom` null or readable, `out` writable.
enum CtpStatus ctp_radon(const struct CtpImage *img,
                         const struct CtpGeometry *geom,
                         struct CtpSinogram **out);

// Reconstructs an `out_size` square image using the sinogram's own angles
// and bins. `filter` takes a [`CtpFilter`] value.
//
// # Safety
// `sino` must be a live handle and `out` writable.
enum CtpStatus ctp_iradon(const struct CtpSinogram *sino,
                          int32_t filter,
                          size_t out_size,
                          struct CtpImage **out);

// `model` may be null for the default model (seed 0).
//
// # Safety
// `sino` must be a live handle, `model` null or readable, `out` writable.
enum CtpStatus ctp_inject_noise(const struct CtpSinogram *sino,
                                const struct CtpNoiseModel *model,
                                struct CtpSinogram **out);

// Projects, adds noise and reconstructs. Null `model` / `geom` select the
// defaults.
//
// # Safety
// `ndct` must be a live handle, `model` and `geom` null or readable, `out`
// writable.
enum CtpStatus ctp_simulate_uldct(const struct CtpImage *ndct,
                                  const struct CtpNoiseModel *model,
                                  const struct CtpGeometry *geom,
                                  struct CtpImage **out);

// Builds the purified training pair: `input` fuses uLDCT background with
// noised NDCT elsewhere, `target` is a copy of the NDCT.
//
// # Safety
// Image and mask handles must be live, `model` and `geom` null or readable,
// `input` and `target` writable.
enum CtpStatus ctp_build_training_pair(const struct CtpImage *uldct,
                                       const struct CtpImage *ndct,
                                       const struct CtpMask *mask,
                                       const struct CtpNoiseModel *model,
                                       const struct CtpGeometry *geom,
                                       struct CtpImage **input,
                                       struct CtpImage **target);

// Purified label with a Gaussian weak denoiser for the lung region.
//
// # Safety
// Image and mask handles must be live and `out` writable.
enum CtpStatus ctp_build_label_gaussian(const struct CtpImage *uldct,
                                        const struct CtpImage *ndct,
                                        const struct CtpMask *mask,
                                        double sigma,
                                        struct CtpImage **out);

// Purified label with an edge-preserving bilateral weak denoiser.
//
// # Safety
// Image and mask handles must be live and `out` writable.
enum CtpStatus ctp_build_label_bilateral(const struct CtpImage *uldct,
                                         const struct CtpImage *ndct,
                                         const struct CtpMask *mask,
                                         double spatial_sigma,
                                         double range_sigma,
                                         struct CtpImage **out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CTPURIFY_H */

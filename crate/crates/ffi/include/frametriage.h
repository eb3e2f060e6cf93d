/* C ABI for the frame-quality triage and restoration toolkit. */

#ifndef FRAMETRIAGE_H
#define FRAMETRIAGE_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Triage outcome for one frame.
typedef enum FtDisposition {
  FT_DISPOSITION_KEEP = 0,
  FT_DISPOSITION_RESTORE = 1,
  FT_DISPOSITION_DISCARD = 2,
} FtDisposition;

// Status code for every fallible call. Matches the CLI error categories.
typedef enum FtStatus {
  FT_STATUS_OK = 0,
  FT_STATUS_INVALID_INPUT = 1,
  FT_STATUS_PARSE = 2,
  FT_STATUS_SHAPE_MISMATCH = 3,
  FT_STATUS_NUMERIC = 4,
  FT_STATUS_IO = 5,
  FT_STATUS_NULL_POINTER = 6,
  FT_STATUS_PANIC = 7,
} FtStatus;

// Opaque run configuration handle.
typedef struct FtConfig FtConfig;

// Opaque detection list handle.
typedef struct FtDetections FtDetections;

// Opaque frame handle.
typedef struct FtFrame FtFrame;

// Full-reference metric values. Undefined metrics are NaN; an exact
// match reports PSNR as positive infinity.
typedef struct FtMetricSet {
  double psnr;
  double ssim;
  double vif;
  double reco;
} FtMetricSet;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Returns the message for the most recent failure on this thread. The
// pointer stays valid until the next failing `ft_` call on the thread.
// Never null; empty before any failure.
const char *ft_last_error_message(void);

// Library version as a static NUL-terminated string.
const char *ft_version(void);

// Creates a config with built-in defaults. Never fails.
struct FtConfig *ft_config_default(void);

// Loads and validates a TOML config file.
//
// # Safety
// `path` must be a NUL-terminated string; `out` must be a valid pointer.
enum FtStatus ft_config_load(const char *path, struct FtConfig **out);

// Releases a config handle. Null is a no-op.
//
// # Safety
// `config` must have come from this library and not been freed already.
void ft_config_free(struct FtConfig *config);

// Reads an 8- or 16-bit gray or RGB PNG.
//
// # Safety
// `path` must be a NUL-terminated string; `out` must be a valid pointer.
enum FtStatus ft_frame_read_png(const char *path, struct FtFrame **out);

// Writes a frame as PNG. `bit_depth` is 8 or 16.
//
// # Safety
// `frame` must be a live handle; `path` a NUL-terminated string.
enum FtStatus ft_frame_write_png(const struct FtFrame *frame, const char *path, uint8_t bit_depth);

// Builds a frame from interleaved row-major float64 samples in [0,1].
// `data` must hold `width * height * channels` values; channels is 1 or 3.
//
// # Safety
// `data` must point to at least that many readable doubles; `out` must
// be a valid pointer.
enum FtStatus ft_frame_from_data(size_t width,
                                 size_t height,
                                 size_t channels,
                                 const double *data,
                                 struct FtFrame **out);

// # Safety
// `frame` must be a live handle or null (returns 0).
size_t ft_frame_width(const struct FtFrame *frame);

// # Safety
// `frame` must be a live handle or null (returns 0).
size_t ft_frame_height(const struct FtFrame *frame);

// # Safety
// `frame` must be a live handle or null (returns 0).
size_t ft_frame_channels(const struct FtFrame *frame);

// Copies the frame's samples into `buf` (interleaved row-major order).
// `len` must equal `width * height * channels`.
//
// # Safety
// `frame` must be a live handle; `buf` must hold `len` writable doubles.
enum FtStatus ft_frame_copy_data(const struct FtFrame *frame, double *buf, size_t len);

// Releases a frame handle. Null is a no-op.
//
// # Safety
// `frame` must have come from this library and not been freed already.
void ft_frame_free(struct FtFrame *frame);

// Creates an empty detection list. Never fails.
struct FtDetections *ft_detections_new(void);

// Appends one detection. `class_code` is 0 blur, 1 bubbles,
// 2 specularity, 3 saturation, 4 contrast, 5 misc artifact; the box is
// normalized to [0,1] and must stay inside the frame.
//
// # Safety
// `detections` must be a live handle.
enum FtStatus ft_detections_push(struct FtDetections *detections,
                                 uint8_t class_code,
                                 double x,
                                 double y,
                                 double w,
                                 double h,
                                 double confidence);

// # Safety
// `detections` must be a live handle or null (returns 0).
size_t ft_detections_len(const struct FtDetections *detections);

// Releases a detection list. Null is a no-op.
//
// # Safety
// `detections` must have come from this library and not been freed already.
void ft_detections_free(struct FtDetections *detections);

// Scores one frame's detections and triages the score. Detections under
// the config's confidence threshold are ignored, matching the pipeline.
//
// # Safety
// All handles must be live; `out_qs` and `out_disposition` must be valid
// pointers.
enum FtStatus ft_quality_score(const struct FtConfig *config,
                               const struct FtDetections *detections,
                               double *out_qs,
                               enum FtDisposition *out_disposition);

// Triages and, when the score calls for it, restores one frame.
//
// Writes the disposition always. On `Restore` success, `out_frame`
// receives a new handle the caller must free; on `Keep` it receives a
// copy of the input; on `Discard` (including restoration failure, which
// downgrades) it receives null and the failure message is available via
// [`ft_last_error_message`].
//
// # Safety
// All handles must be live; `out_frame` and `out_disposition` must be
// valid pointers.
enum FtStatus ft_restore_frame(const struct FtConfig *config,
                               const struct FtFrame *frame,
                               const struct FtDetections *detections,
                               struct FtFrame **out_frame,
                               enum FtDisposition *out_disposition);

// Computes PSNR, SSIM, VIF, and the edge-coherence ratio between two
// frames of identical shape. Undefined values are NaN.
//
// # Safety
// Both frames must be live handles; `out` must be a valid pointer.
enum FtStatus ft_metrics(const struct FtFrame *reference,
                         const struct FtFrame *test,
                         struct FtMetricSet *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* FRAMETRIAGE_H */

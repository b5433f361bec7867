#ifndef SURVTX_H
#define SURVTX_H

/* Generated by cbindgen. Do not edit. */

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

/**
 * Result code of every fallible call.
 */
typedef enum SvtStatus {
  SVT_STATUS_OK = 0,
  SVT_STATUS_NULL_POINTER = 1,
  SVT_STATUS_INVALID_ARGUMENT = 2,
  SVT_STATUS_INVALID_FRAME = 3,
  SVT_STATUS_DIMENSION_MISMATCH = 4,
  SVT_STATUS_TRUNCATED = 5,
  SVT_STATUS_MALFORMED = 6,
  SVT_STATUS_CHECKSUM = 7,
  SVT_STATUS_PROTOCOL = 8,
  SVT_STATUS_EXTERNAL = 9,
  SVT_STATUS_CONTRACT = 10,
  SVT_STATUS_IO = 11,
  SVT_STATUS_BUFFER_TOO_SMALL = 12,
  SVT_STATUS_INDEX_OUT_OF_RANGE = 13,
  SVT_STATUS_PANIC = 14,
} SvtStatus;

/**
 * Owned byte buffer returned by the library.
 */
typedef struct SvtBuffer SvtBuffer;

/**
 * Ordered frames with a frame rate. Frames pushed into a sequence must all
 * share one shape.
 */
typedef struct SvtSequence SvtSequence;

/**
 * Key-frame selection settings. `d_min` and `max_interior` use 0 for
 * "unset".
 */
typedef struct SvtSelectionConfig {
  /**
   * 0 = fixed interval, 1 = adaptive.
   */
  uint32_t mode;
  size_t k;
  size_t w;
  size_t d_min;
  bool include_endpoints;
  size_t max_interior;
} SvtSelectionConfig;

/**
 * End-node pipeline settings.
 */
typedef struct SvtEndConfig {
  struct SvtSelectionConfig selection;
  double tau_int;
  double tau_mot;
  uint8_t m;
  /**
   * 0 = key frames first, 1 = redundancy first.
   */
  uint32_t order;
  bool eliminate_redundant;
} SvtEndConfig;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *svt_version(void);

/**
 * Copy the calling thread's last error message into `buf` (NUL-terminated,
 * truncated to `len`). Returns the full message length excluding the NUL,
 * or 0 when the last call succeeded.
 *
 * # Safety
 * `buf` must be null or point to `len` writable bytes.
 */
size_t svt_last_error_message(char *buf, size_t len);

/**
 * Default selection settings (fixed interval, k = 15).
 */
struct SvtSelectionConfig svt_selection_config_default(void);

/**
 * Default end-node settings.
 */
struct SvtEndConfig svt_end_config_default(void);

/**
 * Create an empty sequence with frame rate `fps_num / fps_den`.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum SvtStatus svt_sequence_new(uint32_t fps_num, uint32_t fps_den, struct SvtSequence **out);

/**
 * # Safety
 * `seq` must be null or a handle from this library that is not used again.
 */
void svt_sequence_free(struct SvtSequence *seq);

/**
 * Append a copy of an interleaved 8-bit frame with 1 (luma) or 3 (RGB)
 * channels. `len` must equal `width * height * channels`.
 *
 * # Safety
 * `seq` must be a valid handle and `data` must point to `len` readable bytes.
 */
enum SvtStatus svt_sequence_push_frame(struct SvtSequence *seq,
                                       size_t width,
                                       size_t height,
                                       size_t channels,
                                       const uint8_t *data,
                                       size_t len);

/**
 * Number of frames, or 0 for a null handle.
 *
 * # Safety
 * `seq` must be null or a valid handle.
 */
size_t svt_sequence_len(const struct SvtSequence *seq);

/**
 * Frame shape and rate of a non-empty sequence. Any output pointer may be
 * null.
 *
 * # Safety
 * `seq` must be a valid handle; non-null outputs must be writable.
 */
enum SvtStatus svt_sequence_info(const struct SvtSequence *seq,
                                 size_t *width,
                                 size_t *height,
                                 size_t *channels,
                                 uint32_t *fps_num,
                                 uint32_t *fps_den);

/**
 * Borrow the samples of frame `index` (1-based). The pointer stays valid
 * until the sequence is modified or freed.
 *
 * # Safety
 * `seq` must be a valid handle; `data` and `len` must be writable.
 */
enum SvtStatus svt_sequence_frame(const struct SvtSequence *seq,
                                  size_t index,
                                  const uint8_t **data,
                                  size_t *len);

/**
 * Read a raw file (with `.hdr` sidecar) or a PNG directory.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` writable.
 */
enum SvtStatus svt_sequence_read(const char *path, struct SvtSequence **out);

/**
 * Write a sequence as raw planar 4:2:0 (`as_image_dir == false`) or as a
 * PNG directory.
 *
 * # Safety
 * `seq` must be a valid handle and `path` a NUL-terminated string.
 */
enum SvtStatus svt_sequence_write(const struct SvtSequence *seq,
                                  const char *path,
                                  bool as_image_dir);

/**
 * 4x bicubic downsampling into a new sequence.
 *
 * # Safety
 * `seq` must be a valid handle and `out` writable.
 */
enum SvtStatus svt_downsample(const struct SvtSequence *seq, struct SvtSequence **out);

/**
 * 4x bicubic upsampling into a new sequence.
 *
 * # Safety
 * `seq` must be a valid handle and `out` writable.
 */
enum SvtStatus svt_upsample(const struct SvtSequence *seq, struct SvtSequence **out);

/**
 * Luma PSNR in dB (capped at 100) between frame `index` of `a` and `b`.
 *
 * # Safety
 * `a` and `b` must be valid handles and `out` writable.
 */
enum SvtStatus svt_psnr(const struct SvtSequence *a,
                        const struct SvtSequence *b,
                        size_t index,
                        double *out);

/**
 * Luma SSIM between frame `index` of `a` and `b`.
 *
 * # Safety
 * `a` and `b` must be valid handles and `out` writable.
 */
enum SvtStatus svt_ssim(const struct SvtSequence *a,
                        const struct SvtSequence *b,
                        size_t index,
                        double *out);

/**
 * Redundant frame indices of `seq` under the given thresholds.
 *
 * # Safety
 * `seq` must be a valid handle, `out` must hold `cap` entries (or be null
 * when `cap` is 0) and `out_count` must be writable.
 */
enum SvtStatus svt_detect_redundant(const struct SvtSequence *seq,
                                    double tau_int,
                                    double tau_mot,
                                    uint8_t m,
                                    size_t *out,
                                    size_t cap,
                                    size_t *out_count);

/**
 * Key-frame indices for `seq` (an LR sequence). Fixed-interval selection
 * only uses the frame count; adaptive selection uses the inter-frame PSNR
 * curve of the frames.
 *
 * # Safety
 * `seq` and `cfg` must be valid; `out`/`cap`/`out_count` as for
 * [`svt_detect_redundant`].
 */
enum SvtStatus svt_select_keyframes(const struct SvtSequence *seq,
                                    const struct SvtSelectionConfig *cfg,
                                    size_t *out,
                                    size_t cap,
                                    size_t *out_count);

/**
 * Run the end-node pipeline on an HR sequence with the raw codec and return
 * the serialized bundle.
 *
 * # Safety
 * `hr` and `cfg` must be valid and `out` writable.
 */
enum SvtStatus svt_end_pipeline(const struct SvtSequence *hr,
                                const struct SvtEndConfig *cfg,
                                struct SvtBuffer **out);

/**
 * Borrow the contents of a buffer. The pointer stays valid until the buffer
 * is freed.
 *
 * # Safety
 * `buf` must be a valid handle; `data` and `len` writable.
 */
enum SvtStatus svt_buffer_data(const struct SvtBuffer *buf, const uint8_t **data, size_t *len);

/**
 * # Safety
 * `buf` must be null or a handle from this library that is not used again.
 */
void svt_buffer_free(struct SvtBuffer *buf);

/**
 * Decode a raw-codec bundle and rebuild the full-length HR sequence.
 * `command` selects the external reconstructor (command template as in the
 * CLI); null uses bicubic upsampling with key-frame substitution.
 *
 * # Safety
 * `bytes` must point to `len` readable bytes, `command` must be null or
 * NUL-terminated, and `out` writable.
 */
enum SvtStatus svt_cloud_reconstruct(const uint8_t *bytes,
                                     size_t len,
                                     const char *command,
                                     struct SvtSequence **out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SURVTX_H */

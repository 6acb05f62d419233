#ifndef RAES_H
#define RAES_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stddef.h>
#include <stdint.h>
#include <stdbool.h>

/**
 * Samples between an input sample and its processed output.
 */
#define RAES_LATENCY_SAMPLES 128

/**
 * Samples per processing hop.
 */
#define RAES_HOP_SAMPLES 64

#define RAES_SAMPLE_RATE 16000

typedef enum RaesStatus {
  RAES_STATUS_OK = 0,
  RAES_STATUS_NULL_POINTER = 1,
  RAES_STATUS_INVALID_ARGUMENT = 2,
  RAES_STATUS_IO = 3,
  /**
   * The weight file is malformed or does not match the architecture.
   */
  RAES_STATUS_WEIGHT_FORMAT = 4,
  RAES_STATUS_LENGTH_MISMATCH = 5,
  /**
   * Non-finite input samples or activations.
   */
  RAES_STATUS_NON_FINITE = 6,
  RAES_STATUS_INTERNAL = 7,
} RaesStatus;

/**
 * A loaded, validated model. Shareable between pipelines.
 */
typedef struct RaesModel RaesModel;

/**
 * One streaming echo suppression session.
 */
typedef struct RaesPipeline RaesPipeline;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *raes_version(void);

/**
 * Message for the last failed call on this thread. Valid until the next
 * failing call on the same thread. Empty if nothing failed yet.
 */
const char *raes_last_error(void);

/**
 * Loads a weight file from a UTF-8 path.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
enum RaesStatus raes_model_load(const char *path, struct RaesModel **out);

/**
 * Loads a weight file from memory. The bytes are copied.
 *
 * # Safety
 * `data` must point to `len` readable bytes; `out` must be writable.
 */
enum RaesStatus raes_model_load_bytes(const uint8_t *data, size_t len, struct RaesModel **out);

/**
 * Number of scalar parameters, or 0 for a null handle.
 *
 * # Safety
 * `model` must be null or a live handle.
 */
size_t raes_model_parameter_count(const struct RaesModel *model);

/**
 * # Safety
 * `model` must be null or a handle from `raes_model_load*` not yet freed.
 * Pipelines created from it stay valid.
 */
void raes_model_free(struct RaesModel *model);

/**
 * Creates a pipeline. A null `model` runs the adaptive filter alone.
 * `dtd_gate` in [0.5, 1] enables DTD post-processing at that confidence;
 * 0 disables it.
 *
 * # Safety
 * `model` must be null or a live handle; `out` must be writable.
 */
enum RaesStatus raes_pipeline_new(const struct RaesModel *model,
                                  float dtd_gate,
                                  struct RaesPipeline **out);

/**
 * Processes `len` samples of microphone and far-end audio and writes
 * `len` output samples, delayed by `RAES_LATENCY_SAMPLES`. Any chunk
 * length is accepted.
 *
 * # Safety
 * `pipeline` must be a live handle; `mic` and `farend` must hold `len`
 * readable floats and `out` `len` writable floats. `out` may alias `mic`.
 */
enum RaesStatus raes_pipeline_process(struct RaesPipeline *pipeline,
                                      const float *mic,
                                      const float *farend,
                                      size_t len,
                                      float *out);

/**
 * Drains the last `RAES_LATENCY_SAMPLES` outputs (plus any partial hop)
 * by feeding silence. Writes up to `capacity` samples and stores the
 * count produced in `written`.
 *
 * # Safety
 * `pipeline` must be a live handle; `out` must hold `capacity` writable
 * floats; `written` must be writable.
 */
enum RaesStatus raes_pipeline_flush(struct RaesPipeline *pipeline,
                                    float *out,
                                    size_t capacity,
                                    size_t *written);

/**
 * Hops processed so far, or 0 for a null handle.
 *
 * # Safety
 * `pipeline` must be null or a live handle.
 */
uint64_t raes_pipeline_frames(const struct RaesPipeline *pipeline);

/**
 * # Safety
 * `pipeline` must be null or a handle from `raes_pipeline_new` not yet
 * freed.
 */
void raes_pipeline_free(struct RaesPipeline *pipeline);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* RAES_H */

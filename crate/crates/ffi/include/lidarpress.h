#ifndef LIDARPRESS_H
#define LIDARPRESS_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum LpImageCodec {
  /**
   * DEFLATE-style dictionary codec.
   */
  LP_IMAGE_CODEC_DICTIONARY = 0,
  /**
   * Median predictor with Golomb-Rice coding.
   */
  LP_IMAGE_CODEC_PREDICTIVE = 1,
} LpImageCodec;

typedef enum LpLayout {
  LP_LAYOUT_SPHERICAL = 0,
  LP_LAYOUT_CARTESIAN_TRI = 1,
  LP_LAYOUT_CARTESIAN_SINGLE = 2,
} LpLayout;

typedef enum LpSensor {
  LP_SENSOR_VLP16 = 0,
  LP_SENSOR_HDL32 = 1,
} LpSensor;

/**
 * Result codes. Zero is success.
 */
typedef enum LpStatus {
  LP_STATUS_OK = 0,
  LP_STATUS_NULL_POINTER = 1,
  LP_STATUS_INVALID_ARGUMENT = 2,
  LP_STATUS_CORRUPT = 3,
  LP_STATUS_IO = 4,
  LP_STATUS_PARSE = 5,
  LP_STATUS_METRIC = 6,
  LP_STATUS_BUFFER_TOO_SMALL = 7,
  LP_STATUS_PANIC = 8,
} LpStatus;

/**
 * An owned byte buffer.
 */
typedef struct LpBuffer LpBuffer;

/**
 * A point cloud.
 */
typedef struct LpCloud LpCloud;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or NULL. The pointer is
 * valid until the next failing call on the same thread.
 */
const char *lp_last_error_message(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *lp_version(void);

/**
 * Builds a cloud from `count` interleaved x, y, z doubles.
 */
enum LpStatus lp_cloud_from_xyz(const double *xyz, size_t count, struct LpCloud **out);

enum LpStatus lp_cloud_read_pcd(const char *path, struct LpCloud **out);

enum LpStatus lp_cloud_read_csv(const char *path, struct LpCloud **out);

/**
 * Writes a binary PCD file.
 */
enum LpStatus lp_cloud_write_pcd(const struct LpCloud *cloud, const char *path);

/**
 * Number of points, or 0 for NULL.
 */
size_t lp_cloud_len(const struct LpCloud *cloud);

/**
 * Copies the points as interleaved x, y, z into `xyz`, which must hold
 * `capacity` points.
 */
enum LpStatus lp_cloud_copy_xyz(const struct LpCloud *cloud, double *xyz, size_t capacity);

/**
 * Uncompressed size recorded for the cloud (capture bytes), or 0.
 */
uint64_t lp_cloud_raw_size(const struct LpCloud *cloud);

void lp_cloud_free(struct LpCloud *cloud);

const uint8_t *lp_buffer_data(const struct LpBuffer *buffer);

size_t lp_buffer_len(const struct LpBuffer *buffer);

void lp_buffer_free(struct LpBuffer *buffer);

/**
 * Projects `cloud` onto the sensor's range-image grid and encodes every
 * image. `bit_depth` is 8 or 16.
 */
enum LpStatus lp_image_encode(const struct LpCloud *cloud,
                              enum LpSensor sensor,
                              uint32_t rpm,
                              enum LpImageCodec codec,
                              enum LpLayout layout,
                              uint32_t bit_depth,
                              struct LpBuffer **out);

/**
 * Decodes a buffer produced by [`lp_image_encode`] back to points.
 */
enum LpStatus lp_image_decode(const uint8_t *data, size_t len, struct LpCloud **out);

/**
 * Occupancy-octree encoding at leaf size `resolution` meters.
 */
enum LpStatus lp_octree_encode(const struct LpCloud *cloud,
                               double resolution,
                               bool deflate_payload,
                               struct LpBuffer **out);

enum LpStatus lp_octree_decode(const uint8_t *data, size_t len, struct LpCloud **out);

/**
 * Symmetric point-to-plane PSNR in dB; `+inf` for identical clouds.
 */
enum LpStatus lp_psnr(const struct LpCloud *original,
                      const struct LpCloud *decoded,
                      size_t k,
                      double *out_db);

enum LpStatus lp_compression_rate(uint64_t compressed_bytes, uint64_t raw_bytes, double *out);

enum LpStatus lp_bpp(uint64_t compressed_bytes, uint64_t point_count, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* LIDARPRESS_H */

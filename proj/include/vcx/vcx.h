/*
 * C interface to the visual complexity toolkit.
 *
 * Every fallible call returns a vcx_status; on failure vcx_last_error()
 * holds a message for the calling thread. Strings returned through char**
 * are owned by the caller and released with vcx_string_free.
 */
#ifndef VCX_H
#define VCX_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

#if defined(__GNUC__)
#define VCX_API __attribute__((visibility("default")))
#else
#define VCX_API
#endif

typedef enum vcx_status {
    VCX_OK = 0,
    VCX_ERR_INVALID_ARGUMENT = 1,
    VCX_ERR_NOT_FOUND = 2,
    VCX_ERR_DECODE = 3,
    VCX_ERR_DEGENERATE = 4,
    VCX_ERR_SINGULAR = 5,
    VCX_ERR_DISCONNECTED = 6,
    VCX_ERR_IO = 7,
    VCX_ERR_NETWORK = 8,
    VCX_ERR_AUTH = 9,
    VCX_ERR_PARSE = 10,
    VCX_ERR_RANGE = 11,
    VCX_ERR_STATE = 12,
    VCX_ERR_INTERNAL = 13
} vcx_status;

VCX_API const char* vcx_version(void);
VCX_API const char* vcx_status_name(vcx_status status);
/* Message of the last failed call on this thread; empty if none. */
VCX_API const char* vcx_last_error(void);
VCX_API void vcx_string_free(char* s);

/* Images */

typedef struct vcx_image vcx_image;

VCX_API vcx_status vcx_image_load(const char* path, vcx_image** out);
/* rgb holds height * width * 3 bytes, row-major. */
VCX_API vcx_status vcx_image_from_rgb(int height, int width, const uint8_t* rgb, vcx_image** out);
VCX_API vcx_status vcx_image_size(const vcx_image* img, int* height, int* width);
VCX_API void vcx_image_free(vcx_image* img);

/* Features. A NULL scales pointer selects S = {1, 2, 4, 8}, W = {0.4, 0.3, 0.2, 0.1}. */

VCX_API vcx_status vcx_msg(const vcx_image* img, const int* scales, const double* weights, size_t n_scales,
                           double* out);
VCX_API vcx_status vcx_msg_gray(const vcx_image* img, const int* scales, const double* weights, size_t n_scales,
                                double* out);
VCX_API vcx_status vcx_muc(const vcx_image* img, int bits, const int* scales, const double* weights,
                           size_t n_scales, double* out);
VCX_API vcx_status vcx_colorfulness(const vcx_image* img, int bits, double* out);
VCX_API vcx_status vcx_edge_density(const vcx_image* img, double sigma, double low, double high, double* out);
VCX_API vcx_status vcx_patch_symmetry(const vcx_image* img, int patch, double* out);

/* Statistics */

VCX_API vcx_status vcx_spearman(const double* x, const double* y, size_t n, double* out);
VCX_API vcx_status vcx_ks_test(const double* a, size_t n_a, const double* b, size_t n_b, double* statistic,
                               double* p_value);
VCX_API vcx_status vcx_permutation_test(const double* complexity, const double* x, const double* y, size_t n,
                                        size_t n_perm, uint64_t seed, double* p_value, double* delta_obs);

/*
 * Commands: extract, eval, fit, permtest, ks, bt, surprise.
 *
 * options_json is a JSON object of command options. On success *output
 * receives the command's result text (CSV or a JSON report). *diagnostics,
 * when not NULL, receives warnings such as skipped images (possibly empty).
 */
VCX_API vcx_status vcx_command(const char* name, const char* options_json, char** output, char** diagnostics);

/* Experiment service */

typedef struct vcx_server vcx_server;

/* host may be NULL to use the config's host; port 0 picks a free port. */
VCX_API vcx_status vcx_server_create(const char* config_path, const char* data_dir, const char* host, int port,
                                     vcx_server** out);
VCX_API int vcx_server_port(const vcx_server* server);
/* Blocks until vcx_server_stop is called from another thread. */
VCX_API vcx_status vcx_server_run(vcx_server* server);
VCX_API void vcx_server_stop(vcx_server* server);
VCX_API void vcx_server_free(vcx_server* server);

#ifdef __cplusplus
}
#endif

#endif

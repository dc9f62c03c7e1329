/* retouch: text-guided local image retouching.
 *
 * Plain C interface over the library. Objects are opaque handles created by
 * the *_open / *_read / *_create / pipeline calls and released with the
 * matching *_free. Every fallible call returns a retouch_status; on failure
 * retouch_last_error() describes the problem for the calling thread.
 * Strings returned through char** are heap copies owned by the caller and
 * released with retouch_string_free(). Handles may be shared between threads
 * for reading; a backend may serve concurrent calls.
 */
#ifndef RETOUCH_RETOUCH_H
#define RETOUCH_RETOUCH_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define RETOUCH_API __declspec(dllexport)
#else
#define RETOUCH_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum retouch_status {
    RETOUCH_OK = 0,
    RETOUCH_E_INVALID_ARGUMENT = 1,
    RETOUCH_E_SHAPE = 2,
    RETOUCH_E_FORMAT = 3,
    RETOUCH_E_IO = 4,
    RETOUCH_E_EMPTY_REGION = 5,
    RETOUCH_E_BACKEND = 6,
    RETOUCH_E_TRANSPORT = 7,
    RETOUCH_E_FRAMING = 8,
    RETOUCH_E_INTERNAL = 9
} retouch_status;

/* Pipeline stage of the last error, if it came from retouch_run_pipeline. */
typedef enum retouch_stage {
    RETOUCH_STAGE_NONE = 0,
    RETOUCH_STAGE_MASK = 1,
    RETOUCH_STAGE_RETOUCH = 2,
    RETOUCH_STAGE_ASSESS = 3
} retouch_stage;

typedef struct retouch_image retouch_image;
typedef struct retouch_mask retouch_mask;
typedef struct retouch_backend retouch_backend;
typedef struct retouch_run retouch_run;

RETOUCH_API const char* retouch_version(void);
RETOUCH_API const char* retouch_status_string(retouch_status status);
/* Message of the calling thread's last failure; "" if none. */
RETOUCH_API const char* retouch_last_error(void);
RETOUCH_API retouch_stage retouch_last_error_stage(void);
RETOUCH_API void retouch_string_free(char* s);

/* Images: width x height x 3 interleaved RGB floats in [0,1]. */
RETOUCH_API retouch_status retouch_image_create(size_t width, size_t height, const float* rgb, retouch_image** out);
RETOUCH_API retouch_status retouch_image_read(const char* path, retouch_image** out);
/* .png or .ppm by extension; atomic replace. */
RETOUCH_API retouch_status retouch_image_write(const retouch_image* image, const char* path);
RETOUCH_API size_t retouch_image_width(const retouch_image* image);
RETOUCH_API size_t retouch_image_height(const retouch_image* image);
RETOUCH_API const float* retouch_image_data(const retouch_image* image);
RETOUCH_API void retouch_image_free(retouch_image* image);

/* Masks: width x height bytes, each 0 or 1. */
RETOUCH_API retouch_status retouch_mask_create(size_t width, size_t height, const uint8_t* values, retouch_mask** out);
RETOUCH_API retouch_status retouch_mask_read(const char* path, retouch_mask** out);
/* .png or .pgm by extension, written as 0/255. */
RETOUCH_API retouch_status retouch_mask_write(const retouch_mask* mask, const char* path);
RETOUCH_API size_t retouch_mask_width(const retouch_mask* mask);
RETOUCH_API size_t retouch_mask_height(const retouch_mask* mask);
RETOUCH_API const uint8_t* retouch_mask_data(const retouch_mask* mask);
RETOUCH_API size_t retouch_mask_count(const retouch_mask* mask);
RETOUCH_API void retouch_mask_free(retouch_mask* mask);

/* Backend descriptors: "mock", "mock?seed=1&dim=64&grid=3&gain=0.8",
 * "fixture:<path>", "tcp://host:port", "exec:<command>". NULL falls back to
 * $RETOUCH_BACKEND, then "mock". */
RETOUCH_API retouch_status retouch_backend_open(const char* descriptor, retouch_backend** out);
RETOUCH_API retouch_status retouch_backend_identity(const retouch_backend* backend, char** json_out);
RETOUCH_API void retouch_backend_free(retouch_backend* backend);

typedef struct retouch_mask_options {
    double floor;      /* default 0.2 */
    int use_fixed_tau; /* default 0 */
    double fixed_tau;
    int crop_to_bbox; /* default 0 */
    unsigned jobs;    /* default 1 */
} retouch_mask_options;

RETOUCH_API void retouch_mask_options_init(retouch_mask_options* options);

/* *mask_out is set to NULL (with RETOUCH_OK) when nothing matches the query.
 * report_json may be NULL. */
RETOUCH_API retouch_status retouch_generate_mask(const retouch_backend* backend, const retouch_image* image,
                                                 const char* query, const retouch_mask_options* options,
                                                 retouch_mask** mask_out, char** report_json);

typedef struct retouch_run_options {
    size_t proposals;      /* m, default 4 */
    size_t steps;          /* T, default 200 */
    double eta;            /* default 1.0 */
    double beta_start;     /* default 1e-4 */
    double beta_end;       /* default 0.02 */
    uint64_t base_seed;    /* seeds base..base+m-1 unless `seeds` is set; default 0 */
    const uint64_t* seeds; /* optional, `proposals` distinct values */
    double alpha;          /* default 5.0 */
    int enable_cma;        /* default 1 */
    int enable_iqa;        /* default 1 */
    retouch_mask_options mask;
    unsigned jobs; /* default 1; applies to every stage */
} retouch_run_options;

RETOUCH_API void retouch_run_options_init(retouch_run_options* options);

/* Full pipeline. A query that matches nothing still succeeds; check
 * retouch_run_matched(). On failure retouch_last_error_stage() names the
 * stage. */
RETOUCH_API retouch_status retouch_run_pipeline(const retouch_backend* backend, const retouch_image* image,
                                                const char* query, const char* text,
                                                const retouch_run_options* options, retouch_run** out);
RETOUCH_API int retouch_run_matched(const retouch_run* run);
/* Borrowed; NULL when unmatched. */
RETOUCH_API const retouch_mask* retouch_run_mask(const retouch_run* run);
RETOUCH_API size_t retouch_run_proposal_count(const retouch_run* run);
/* Borrowed; NULL when the proposal failed or the run is unmatched. */
RETOUCH_API const retouch_image* retouch_run_proposal(const retouch_run* run, size_t index);
RETOUCH_API retouch_status retouch_run_selected(const retouch_run* run, size_t* index_out);
RETOUCH_API retouch_status retouch_run_report(const retouch_run* run, char** json_out);
RETOUCH_API void retouch_run_free(retouch_run* run);

typedef struct retouch_assess_options {
    double alpha;   /* default 5.0 */
    int enable_cma; /* default 1 */
    int enable_iqa; /* default 1 */
    unsigned jobs;  /* default 1 */
} retouch_assess_options;

RETOUCH_API void retouch_assess_options_init(retouch_assess_options* options);

/* Scores `count` proposals against `original` and picks the best.
 * report_json may be NULL. */
RETOUCH_API retouch_status retouch_assess(const retouch_backend* backend, const retouch_image* original,
                                          const retouch_image* const* proposals, size_t count, const char* text,
                                          const retouch_assess_options* options, size_t* chosen_out,
                                          char** report_json);

typedef struct retouch_eval_options {
    retouch_run_options run;
    const char* variants; /* "all" or e.g. "none,cma+iqa"; NULL means "all" */
    unsigned jobs;        /* entries in flight, default 1 */
} retouch_eval_options;

RETOUCH_API void retouch_eval_options_init(retouch_eval_options* options);
RETOUCH_API retouch_status retouch_evaluate_manifest(const retouch_backend* backend, const char* manifest_path,
                                                     const retouch_eval_options* options, char** report_json);
RETOUCH_API retouch_status retouch_eval_report_csv(const char* report_json, char** csv_out);

/* Metrics against a reference image of the same size. psnr is +inf for
 * identical images. */
RETOUCH_API retouch_status retouch_metric_mse(const retouch_image* a, const retouch_image* b, double* out);
RETOUCH_API retouch_status retouch_metric_psnr(const retouch_image* a, const retouch_image* b, double* out);
RETOUCH_API retouch_status retouch_metric_ssim(const retouch_image* a, const retouch_image* b, double* out);

/* Writes `text` to a temporary sibling and renames it over `path`. */
RETOUCH_API retouch_status retouch_write_text_atomic(const char* path, const char* text);

#ifdef __cplusplus
}
#endif

#endif

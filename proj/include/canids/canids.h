#ifndef CANIDS_CANIDS_H
#define CANIDS_CANIDS_H

#include <stddef.h>
#include <stdint.h>

#if defined(CANIDS_BUILDING_LIBRARY)
#define CANIDS_API __attribute__((visibility("default")))
#else
#define CANIDS_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum canids_status {
  CANIDS_OK = 0,
  CANIDS_E_INVALID_ARGUMENT = 1,
  CANIDS_E_IO = 2,
  CANIDS_E_FORMAT = 3,
  CANIDS_E_SHAPE = 4,
  CANIDS_E_NUMERIC = 5,
  CANIDS_E_CONFIG = 6,
  CANIDS_E_NOT_CONVERGED = 7,
  CANIDS_E_WRITE = 8,
  CANIDS_E_INTERNAL = 99
} canids_status;

typedef struct canids_config canids_config;
typedef struct canids_model canids_model;
typedef struct canids_detector canids_detector;
typedef struct canids_pipeline canids_pipeline;

/* dispositions reported by canids_pipeline_process */
enum { CANIDS_DELIVERED = 0, CANIDS_DROPPED_ANOMALOUS = 1, CANIDS_DROPPED_RATE = 2 };
/* rate verdicts */
enum { CANIDS_RATE_OK = 0, CANIDS_RATE_TOO_FAST = 1, CANIDS_RATE_TOO_SLOW = 2 };

CANIDS_API const char *canids_version(void);
/* Message for the last failing call on this thread; "" when none. */
CANIDS_API const char *canids_last_error(void);
/* 0 ok, 1 validation failure (bad input, config or missing artifact),
   2 runtime failure (numeric trouble, unwritable output, internal error) */
CANIDS_API int canids_exit_code(canids_status status);
CANIDS_API void canids_string_free(char *s);

CANIDS_API canids_status canids_config_load(const char *path, canids_config **out);
CANIDS_API canids_status canids_config_parse(const char *text, const char *origin,
                                             canids_config **out);
/* replaces the seed from the file; the config hash is unchanged */
CANIDS_API canids_status canids_config_set_seed(canids_config *cfg, uint64_t seed);
CANIDS_API canids_status canids_config_seed(const canids_config *cfg, uint64_t *out);
CANIDS_API void canids_config_free(canids_config *cfg);

/* Pipeline commands. `cfg` may be NULL where marked optional. */
CANIDS_API canids_status canids_cmd_gen(const canids_config *cfg, const char *out);
CANIDS_API canids_status canids_cmd_inject(const char *trace, const canids_config *cfg,
                                           const char *out);
/* history may be NULL; verbose != 0 prints per-epoch losses to stderr */
CANIDS_API canids_status canids_cmd_train(const char *trace, const canids_config *cfg,
                                          const char *model_out, const char *history,
                                          int verbose);
/* variant NULL: taken from cfg, else Diff. cfg optional. */
CANIDS_API canids_status canids_cmd_fit_detector(const char *trace, const char *model,
                                                 const char *variant, const canids_config *cfg,
                                                 const char *out);
CANIDS_API canids_status canids_cmd_detect(const char *trace, const char *model,
                                           const char *detector, const canids_config *cfg,
                                           const char *out);
/* manifest, roc_out, table_out and cfg may be NULL. *tables receives the
   printable tables (free with canids_string_free); tables may be NULL. */
CANIDS_API canids_status canids_cmd_eval(const char *const *detections, size_t n_detections,
                                         const char *truth, const char *manifest,
                                         const char *out, const char *roc_out,
                                         const char *table_out, const canids_config *cfg,
                                         char **tables);
/* reads records from stdin, writes dispositions to stdout */
CANIDS_API canids_status canids_cmd_live(const char *model, const char *detector,
                                         const canids_config *cfg, size_t *frames);

CANIDS_API canids_status canids_model_load(const char *path, canids_model **out);
CANIDS_API void canids_model_free(canids_model *m);
CANIDS_API size_t canids_model_signal_count(const canids_model *m);
CANIDS_API size_t canids_model_subsequence_length(const canids_model *m);
CANIDS_API size_t canids_model_parameter_count(const canids_model *m);
/* window: L rows of k scaled values, row-major, oldest first; out: k values */
CANIDS_API canids_status canids_model_predict_next(const canids_model *m, const double *window,
                                                   size_t rows, double *out);

CANIDS_API canids_status canids_detector_load(const char *path, canids_detector **out);
CANIDS_API void canids_detector_free(canids_detector *d);
/* negative score = anomalous */
CANIDS_API canids_status canids_detector_score(const canids_detector *d, const double *pred,
                                               const double *actual, size_t k, double *score);

/* Online processing with raw (unscaled) frames. cfg supplies the period and
   rate tolerance; without it 15 ms and the defaults are used. */
CANIDS_API canids_status canids_pipeline_create(const canids_model *m, const canids_detector *d,
                                                const canids_config *cfg,
                                                canids_pipeline **out);
CANIDS_API void canids_pipeline_free(canids_pipeline *p);
CANIDS_API canids_status canids_pipeline_process(canids_pipeline *p, double timestamp,
                                                 const double *signals, size_t k,
                                                 int *disposition, double *score, int *rate);

/* trapezoidal ROC-AUC; labels are 0/1 and a lower score means more likely positive */
CANIDS_API canids_status canids_auc(const uint8_t *labels, const double *scores, size_t n,
                                    double *auc);

#ifdef __cplusplus
}
#endif

#endif

/* C interface to the pvqml forecasting library.
 *
 * Every function returns a pvq_status. On failure a message is available from
 * pvq_last_error() on the calling thread until the next call on that thread.
 * Strings returned through char** out-parameters are heap allocated and must
 * be released with pvq_string_free. Handles are released with their _free
 * function; passing NULL to a _free function is a no-op. */

#ifndef PVQML_H
#define PVQML_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define PVQ_API __declspec(dllexport)
#else
#define PVQ_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum pvq_status {
  PVQ_OK = 0,
  PVQ_ERR_CONFIG = 1,
  PVQ_ERR_SHAPE = 2,
  PVQ_ERR_CONTRACT = 3,
  PVQ_ERR_PARSE = 4,
  PVQ_ERR_SCHEMA = 5,
  PVQ_ERR_CLEANING = 6,
  PVQ_ERR_SCALING = 7,
  PVQ_ERR_UNSUPPORTED = 8,
  PVQ_ERR_TRAINING = 9,
  PVQ_ERR_IO = 10,
  PVQ_ERR_FORMAT = 11,
  PVQ_ERR_NULL_ARGUMENT = 12,
  PVQ_ERR_INTERNAL = 13
} pvq_status;

typedef struct pvq_frame pvq_frame;
typedef struct pvq_config pvq_config;
typedef struct pvq_model pvq_model;

PVQ_API const char* pvq_version(void);
PVQ_API const char* pvq_last_error(void);
PVQ_API const char* pvq_status_name(pvq_status status);
/* 0 success, 2 I/O, 3 file format (parse, schema, model format), 1 other. */
PVQ_API int pvq_exit_code(pvq_status status);
PVQ_API void pvq_string_free(char* s);

/* ---- frames: hourly Ta, Tm, I3, I15, P series ---- */

PVQ_API pvq_status pvq_frame_load_csv(const char* path, pvq_frame** out);
PVQ_API pvq_status pvq_frame_synth(size_t days, uint64_t seed, pvq_frame** out);
/* Cleans `raw` into a new frame; report_json may be NULL. */
PVQ_API pvq_status pvq_frame_clean(const pvq_frame* raw, pvq_frame** out, char** report_json);
PVQ_API pvq_status pvq_frame_write_csv(const pvq_frame* frame, const char* path);
PVQ_API pvq_status pvq_frame_rows(const pvq_frame* frame, size_t* rows);
PVQ_API void pvq_frame_free(pvq_frame* frame);

/* ---- run configuration (flat key = value) ---- */

PVQ_API pvq_status pvq_config_new(pvq_config** out);
PVQ_API pvq_status pvq_config_load(const char* path, pvq_config** out);
PVQ_API pvq_status pvq_config_set(pvq_config* cfg, const char* key, const char* value);
/* Value of an explicitly set key, or NULL in *value when unset. */
PVQ_API pvq_status pvq_config_get(const pvq_config* cfg, const char* key, char** value);
/* Fully resolved settings; model may be NULL to use the config's model key. */
PVQ_API pvq_status pvq_config_render(const pvq_config* cfg, const char* model, char** text);
PVQ_API void pvq_config_free(pvq_config* cfg);

/* Trainable parameter count of a model kind under the given config
 * (cfg may be NULL for the defaults). */
PVQ_API pvq_status pvq_param_count(const pvq_config* cfg, const char* model, size_t* count);

/* ---- training ----
 * Artifacts go to out_dir when it is not NULL. A diverged or failed fold
 * returns PVQ_ERR_TRAINING after writing everything that was produced;
 * result_json is filled in either case. */

/* Purged k-fold cross-validation over a cleaned frame: fold_<k>.model.json,
 * fold_<k>.history.csv, fold_<k>.history.svg, metrics.json, run.cfg. */
PVQ_API pvq_status pvq_train_cv(const pvq_frame* frame, const pvq_config* cfg, const char* model,
                                const char* out_dir, char** result_json);

/* Chronological hold-out runs for every (model, fraction) cell.
 * models is a comma-separated list. Writes <model>_f<fraction>.model.json,
 * matching history CSVs, reduced_data.csv and reduced_data.svg. */
PVQ_API pvq_status pvq_train_reduced(const pvq_frame* frame, const pvq_config* cfg,
                                     const char* models, const double* fractions,
                                     size_t n_fractions, const char* out_dir, char** result_json);

/* ---- trained models ---- */

PVQ_API pvq_status pvq_model_load(const char* path, pvq_model** out);
PVQ_API pvq_status pvq_model_info(const pvq_model* model, char** json);
/* Forecast `horizon` hours after the last history row, in original units.
 * Hour-ahead models use the last `window` rows and require horizon == 1.
 * clamp != 0 limits values to the power range seen by the scaler.
 * values must hold `horizon` doubles; csv (timestamp,P) may be NULL. */
PVQ_API pvq_status pvq_model_forecast(const pvq_model* model, const pvq_frame* history,
                                      size_t horizon, int clamp, double* values, char** csv);
/* Metrics on every window of a cleaned frame, in scaled units, with the
 * persistence baseline alongside. horizon 0 picks 1 for hour-ahead models
 * and the window length for sequence models. */
PVQ_API pvq_status pvq_model_evaluate(const pvq_model* model, const pvq_frame* frame,
                                      size_t horizon, char** json);
PVQ_API void pvq_model_free(pvq_model* model);

/* ---- circuit diagnostics ----
 * circuit is "vvrq" or "qdi"; options_json may be NULL for defaults. The
 * result JSON carries the summary plus CSV text for export. */
PVQ_API pvq_status pvq_analyze_fim(const char* circuit, const char* options_json, char** result_json);
PVQ_API pvq_status pvq_analyze_fourier(const char* circuit, const char* options_json,
                                       char** result_json);

#ifdef __cplusplus
}
#endif

#endif /* PVQML_H */

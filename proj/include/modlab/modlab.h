#ifndef MODLAB_MODLAB_H
#define MODLAB_MODLAB_H

/* C interface to the modlab library. Every function returns a status; on
 * failure mlab_last_error() describes the cause on the calling thread.
 * Strings returned through char** are owned by the caller and released
 * with mlab_free_string. */

#ifdef __cplusplus
extern "C" {
#endif

#if defined(MODLAB_BUILDING_LIBRARY)
#define MLAB_API __attribute__((visibility("default")))
#else
#define MLAB_API
#endif

/* Status values equal the CLI exit codes. */
typedef enum mlab_status {
  MLAB_OK = 0,
  MLAB_ERR_INTERNAL = 1,
  MLAB_ERR_USAGE = 2,
  MLAB_ERR_DATA = 3,
  MLAB_ERR_NUMERIC = 4
} mlab_status;

typedef struct mlab_config mlab_config;
typedef struct mlab_record mlab_record;

MLAB_API const char* mlab_version(void);
MLAB_API const char* mlab_last_error(void);
MLAB_API void mlab_free_string(char* s);

/* Run configuration. from_json merges a partial JSON object onto the
 * defaults; set takes one key with a JSON literal or a bare string. */
MLAB_API mlab_status mlab_config_default(mlab_config** out);
MLAB_API mlab_status mlab_config_from_json(const char* json, mlab_config** out);
MLAB_API mlab_status mlab_config_set(mlab_config* config, const char* key, const char* value);
MLAB_API mlab_status mlab_config_to_json(const mlab_config* config, char** out);
MLAB_API void mlab_config_free(mlab_config* config);

/* Analysis options are a JSON object (NULL for defaults) with keys
 * symmetricity_samples (0 = exhaustive), circle_pairs, keep_mean,
 * store_weights. */

/* Train, then analyze. */
MLAB_API mlab_status mlab_train(const mlab_config* config, const char* analysis_json, mlab_record** out);

MLAB_API mlab_status mlab_record_load(const char* path, mlab_record** out);
MLAB_API mlab_status mlab_record_save(const mlab_record* record, const char* path);
MLAB_API mlab_status mlab_record_to_json(const mlab_record* record, char** out);
MLAB_API void mlab_record_free(mlab_record* record);

/* Recompute metrics, circles and classification from stored weights. */
MLAB_API mlab_status mlab_record_analyze(mlab_record* record, const char* analysis_json);

/* {"metrics":..., "classification":..., "converged":..., ...} */
MLAB_API mlab_status mlab_record_summary_json(const mlab_record* record, char** out);

/* Circle reports, accompanying pairs and joint-isolation accuracies. */
MLAB_API mlab_status mlab_record_isolation_json(const mlab_record* record, int n_pairs, int keep_mean, char** out);

/* Label for a metric report given as JSON. */
MLAB_API mlab_status mlab_classify_json(const char* metrics_json, char** out);

/* layout: 0 raw, 1 rows a-b / columns a+b. */
MLAB_API mlab_status mlab_record_heatmap_svg(const mlab_record* record, int layout, char** out);
/* Number embeddings projected on principal components (first, second). */
MLAB_API mlab_status mlab_record_circle_svg(const mlab_record* record, int first, int second, char** out);

/* Run a sweep spec; records land in out_dir. workers <= 0 reads
 * MODLAB_WORKERS. Returns the index document. */
MLAB_API mlab_status mlab_sweep_run(const char* spec_json, const char* out_dir, int workers, char** out);

/* Phase report over a directory of records: writes the SVG scatter and,
 * when csv_path is non-NULL, the CSV summary. Returns the boundary fit. */
MLAB_API mlab_status mlab_report(const char* runs_dir, const char* svg_path, const char* csv_path, char** out);

/* Fast internal consistency checks; MLAB_ERR_NUMERIC when one fails. */
MLAB_API mlab_status mlab_selfcheck(char** out);

#ifdef __cplusplus
}
#endif

#endif

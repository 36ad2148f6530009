/* C interface to the subjtag engine. All functions return subjtag_status
 * unless documented otherwise; on failure a thread-local message is
 * available through subjtag_last_error(). Handles are opaque and must be
 * released with their matching _free function. */

#ifndef SUBJTAG_H
#define SUBJTAG_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum subjtag_status {
    SUBJTAG_OK = 0,
    SUBJTAG_ERR_CONFIG = 2,   /* invalid configuration or argument */
    SUBJTAG_ERR_IO = 3,       /* filesystem failure */
    SUBJTAG_ERR_PARSE = 4,    /* malformed input data */
    SUBJTAG_ERR_SERVICE = 5,  /* remote service failure */
    SUBJTAG_ERR_INTERNAL = 9
} subjtag_status;

const char* subjtag_version(void);

/* Message for the last failing call on this thread; empty string if none. */
const char* subjtag_last_error(void);

/* Receives one machine-parseable log line per pipeline stage. NULL restores
 * the default sink (stderr). */
typedef void (*subjtag_log_fn)(const char* line, void* user_data);
void subjtag_set_logger(subjtag_log_fn fn, void* user_data);

/* ---- run configuration ------------------------------------------------ */

typedef struct subjtag_config subjtag_config;

subjtag_config* subjtag_config_new(void);
void subjtag_config_free(subjtag_config* config);

/* Replaces the handle's settings with the file's (defaults elsewhere). */
subjtag_status subjtag_config_load(subjtag_config* config, const char* path);

/* Sets one key; values are strings regardless of the key's type
 * (e.g. "30", "true", "5,10,15"). Unknown keys are rejected. */
subjtag_status subjtag_config_set(subjtag_config* config, const char* key, const char* value);

/* Structural validation (backend requirements, k-grid bounds, ...). */
subjtag_status subjtag_config_validate(const subjtag_config* config);

/* ---- pipeline stages --------------------------------------------------- */

subjtag_status subjtag_run_index(const subjtag_config* config);
subjtag_status subjtag_run_retrieve(const subjtag_config* config);
subjtag_status subjtag_run_rerank(const subjtag_config* config);
subjtag_status subjtag_run_export_sts(const subjtag_config* config);
subjtag_status subjtag_run_export_sft(const subjtag_config* config);
subjtag_status subjtag_run_evaluate(const subjtag_config* config);
subjtag_status subjtag_run_pipeline(const subjtag_config* config);

/* ---- subject index ----------------------------------------------------- */

typedef struct subjtag_index subjtag_index;

subjtag_status subjtag_index_load(const char* path, subjtag_index** out_index);
void subjtag_index_free(subjtag_index* index);
int64_t subjtag_index_size(const subjtag_index* index);
int32_t subjtag_index_dim(const subjtag_index* index);

/* Top-k by cosine similarity. out_ids receives up to k strings owned by the
 * library (release with subjtag_ids_free); out_scores needs room for k
 * doubles. *out_count is set to the number of results. */
subjtag_status subjtag_index_query(const subjtag_index* index, const double* query_values,
                                   int32_t dim, int32_t k, char*** out_ids, double* out_scores,
                                   int32_t* out_count);
void subjtag_ids_free(char** ids, int32_t count);

/* ---- primitives -------------------------------------------------------- */

/* Deterministic trigram-hash embedding; out_values needs room for dim. */
subjtag_status subjtag_fallback_embed(const char* text, int32_t dim, double* out_values);

/* Cosine similarity clamped to [-1, 1]. */
subjtag_status subjtag_cosine(const double* a, const double* b, int32_t dim, double* out_value);

/* precision/recall/f1 of the first k predictions against the gold set;
 * out_prf must hold 3 doubles. */
subjtag_status subjtag_prf_at_k(const char* const* gold, int32_t gold_count,
                                const char* const* predicted, int32_t predicted_count, int32_t k,
                                double* out_prf);

/* 1 = match, 0 = no-match, -1 = unparseable. Total over any input. */
int32_t subjtag_parse_decision(const char* reply);

/* Renders the canonical yes/no prompt. Writes up to buffer_size bytes
 * (NUL-terminated, truncated if needed); *out_length receives the full
 * untruncated length. */
subjtag_status subjtag_render_prompt(const char* record_text, const char* subject_label,
                                     char* buffer, size_t buffer_size, size_t* out_length);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* SUBJTAG_H */

/*
 * seqrec - sequential recommendation toolkit.
 *
 * C89-compatible interface over the C++ core. All objects are opaque
 * handles created and destroyed by the library; every fallible call
 * returns a seqrec_status, with a human-readable detail message available
 * from seqrec_last_error() on the failing thread.
 */
#ifndef SEQREC_H
#define SEQREC_H

#include <stddef.h>

#if defined(_WIN32)
#  define SEQREC_API __declspec(dllexport)
#else
#  define SEQREC_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum seqrec_status {
    SEQREC_OK = 0,

    /* validation errors: the caller or its configuration is at fault */
    SEQREC_E_INVALID_ARGUMENT = 1,
    SEQREC_E_CONFIG = 2,
    SEQREC_E_UNKNOWN_ITEM = 3,

    /* runtime errors */
    SEQREC_E_IO = 10,
    SEQREC_E_PARSE = 11,
    SEQREC_E_EMPTY_INPUT = 12,
    SEQREC_E_DEGENERATE_SPLIT = 13,
    SEQREC_E_EMPTY_VOCAB = 14,
    SEQREC_E_INDEX_RANGE = 15,
    SEQREC_E_NON_FINITE = 16,
    SEQREC_E_ZERO_VECTOR = 17,
    SEQREC_E_INTERNAL = 18
} seqrec_status;

SEQREC_API const char* seqrec_version(void);
SEQREC_API const char* seqrec_status_name(seqrec_status status);
/* 1 when the status marks a caller/config mistake, 0 otherwise */
SEQREC_API int seqrec_status_is_validation(seqrec_status status);
/* detail message of the most recent failure on this thread; never NULL */
SEQREC_API const char* seqrec_last_error(void);

/* ------------------------------------------------------------------ */
/* run configuration                                                   */

typedef struct seqrec_config seqrec_config;

SEQREC_API seqrec_status seqrec_config_create(seqrec_config** out_config);
SEQREC_API seqrec_status seqrec_config_load(const char* path, seqrec_config** out_config);
SEQREC_API seqrec_status seqrec_config_set(seqrec_config* config, const char* key, const char* value);
/* copies the effective value (default or override) into buf, NUL-terminated */
SEQREC_API seqrec_status seqrec_config_get(const seqrec_config* config, const char* key,
                                           char* buf, size_t buf_len);
SEQREC_API seqrec_status seqrec_config_validate(const seqrec_config* config);
SEQREC_API void seqrec_config_free(seqrec_config* config);

/* ------------------------------------------------------------------ */
/* pipeline commands: artifacts are written under the config's out_dir */

SEQREC_API seqrec_status seqrec_run_synth(const seqrec_config* config);
SEQREC_API seqrec_status seqrec_run_ingest(const seqrec_config* config);
SEQREC_API seqrec_status seqrec_run_train_embeddings(const seqrec_config* config);
SEQREC_API seqrec_status seqrec_run_train_model(const seqrec_config* config);
SEQREC_API seqrec_status seqrec_run_evaluate(const seqrec_config* config);
/* full run with stage skipping; building block of the grid command */
SEQREC_API seqrec_status seqrec_run_pipeline(const seqrec_config* config);

/*
 * Top-N recommendations for a session of item-id strings. On success
 * *out_text holds "item_id\tscore\n" lines in rank order; release it with
 * seqrec_string_free.
 */
SEQREC_API seqrec_status seqrec_run_recommend(const seqrec_config* config,
                                              const char* const* item_ids, size_t n_items,
                                              size_t top_n, char** out_text);
SEQREC_API void seqrec_string_free(char* text);

/* ------------------------------------------------------------------ */
/* embeddings handle                                                   */

typedef struct seqrec_embeddings seqrec_embeddings;

SEQREC_API seqrec_status seqrec_embeddings_load(const char* path, seqrec_embeddings** out_embeddings);
SEQREC_API void seqrec_embeddings_free(seqrec_embeddings* embeddings);
SEQREC_API size_t seqrec_embeddings_count(const seqrec_embeddings* embeddings);
SEQREC_API size_t seqrec_embeddings_dim(const seqrec_embeddings* embeddings);
/* out_vector must hold seqrec_embeddings_dim() floats */
SEQREC_API seqrec_status seqrec_embeddings_lookup(const seqrec_embeddings* embeddings,
                                                  const char* item_id, float* out_vector);

/* ------------------------------------------------------------------ */
/* recommender handle: embeddings + checkpoint + optional ANN index    */

typedef struct seqrec_recommender seqrec_recommender;

/* index_path may be NULL: queries then fall back to an exact scan */
SEQREC_API seqrec_status seqrec_recommender_open(const char* embeddings_path,
                                                 const char* checkpoint_path,
                                                 const char* index_path,
                                                 seqrec_recommender** out_recommender);
SEQREC_API seqrec_status seqrec_recommender_recommend(const seqrec_recommender* recommender,
                                                      const char* const* item_ids, size_t n_items,
                                                      size_t top_n, int exclude_inputs,
                                                      char** out_text);
SEQREC_API void seqrec_recommender_free(seqrec_recommender* recommender);

#ifdef __cplusplus
}
#endif

#endif /* SEQREC_H */

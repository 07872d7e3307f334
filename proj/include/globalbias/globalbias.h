#ifndef GLOBALBIAS_GLOBALBIAS_H
#define GLOBALBIAS_GLOBALBIAS_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define GB_API __declspec(dllexport)
#else
#define GB_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum gb_status {
  GB_OK = 0,
  GB_ERR_INVALID_ARGUMENT = 1,
  GB_ERR_IO = 2,
  GB_ERR_PARSE = 3,
  GB_ERR_VALIDATION = 4,
  GB_ERR_MISSING_ARTIFACT = 5,
  GB_ERR_BACKEND = 6,
  GB_ERR_INTERNAL = 7
} gb_status;

typedef struct gb_context gb_context;

GB_API const char* gb_version(void);
GB_API const char* gb_status_name(gb_status status);

/* Message of the last failed call on the calling thread; "" if none.
   Valid until the next library call on that thread. */
GB_API const char* gb_last_error(void);

/* Strings returned through char** out-parameters are owned by the caller. */
GB_API void gb_string_free(char* s);

/* Loads and validates a config file. On failure *out is NULL. */
GB_API gb_status gb_context_create(const char* config_path, gb_context** out);
GB_API void gb_context_destroy(gb_context* ctx);

/* Overrides one config value and revalidates. Keys: seed, backend, alpha,
   apx_direction, run_dir, format, dump_centroids, normalize ("true"/"false"
   for the last two). */
GB_API gb_status gb_context_set_override(gb_context* ctx, const char* key, const char* value);

/* Run id of the current configuration (hash of every resolved knob). The
   pointer stays valid until the context changes. */
GB_API const char* gb_context_run_id(const gb_context* ctx);

GB_API size_t gb_stage_count(void);
GB_API const char* gb_stage_name(size_t index);

/* Runs one stage. On success *summary_json (if non-NULL) receives
   {"stage", "counts", "artifacts", "warnings"}. */
GB_API gb_status gb_context_run_stage(gb_context* ctx, const char* stage, char** summary_json);

/* exp(-mean(logprobs)) over natural-log token probabilities. */
GB_API gb_status gb_ppl(const double* logprobs, size_t n, double* out);
GB_API gb_status gb_pseudo_ppl(const double* masked_logprobs, size_t n, double* out);

/* Jensen-Shannon divergence in bits between two non-negative weight
   vectors over the same n outcomes; each is normalised first. */
GB_API gb_status gb_jsd(const double* p, const double* q, size_t n, double* out);

/* Character-profile request prompt for the given names. */
GB_API gb_status gb_build_prompt(const char* const* names, size_t n, char** out);

#ifdef __cplusplus
}
#endif

#endif

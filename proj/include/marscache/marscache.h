#ifndef MARSCACHE_H
#define MARSCACHE_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

#if defined(_WIN32)
#    ifdef MARSCACHE_BUILD
#        define MC_API __declspec(dllexport)
#    else
#        define MC_API __declspec(dllimport)
#    endif
#else
#    define MC_API __attribute__((visibility("default")))
#endif

//
// Status codes. Every fallible call returns one; on failure the message is
// available from mc_last_error() on the same thread until the next call.
//

typedef enum mc_status {
    MC_OK                   = 0,
    MC_ERR_INVALID_ARGUMENT = 1,
    MC_ERR_CONFIG           = 2,
    MC_ERR_IO               = 3,
    MC_ERR_NUMERIC          = 4,
    MC_ERR_STATE            = 5,
    MC_ERR_CHECK_FAILED     = 6,
    MC_ERR_INTERNAL         = 7,
} mc_status;

typedef struct mc_config  mc_config;   // resolved run configuration
typedef struct mc_model   mc_model;    // immutable weights, shareable across sessions
typedef struct mc_session mc_session;  // one decode with one engine

MC_API const char * mc_version(void);
MC_API const char * mc_status_string(mc_status status);
MC_API const char * mc_last_error(void);

// Strings returned through char ** out-parameters are owned by the caller.
MC_API void mc_string_free(char * str);

//
// Configuration
//

// Default configuration (toy model, default workload, vanilla engine).
MC_API mc_status mc_config_default(mc_config ** out);
MC_API mc_status mc_config_load(const char * path, mc_config ** out);
MC_API mc_status mc_config_from_json(const char * json, mc_config ** out);
// Loads `path` (or the defaults when NULL), applies every "key.path=value"
// override in order and resolves once, so intermediate states need not be
// valid.
MC_API mc_status mc_config_load_with_overrides(const char * path, const char * const * overrides, size_t count,
                                               mc_config ** out);
// Applies "key.path=value" to the source document and re-resolves.
MC_API mc_status mc_config_set(mc_config * config, const char * assignment);
// Fully resolved configuration as JSON.
MC_API mc_status mc_config_to_json(const mc_config * config, char ** out);
MC_API void      mc_config_free(mc_config * config);

//
// Model weights
//

// Seeded initialization from the config's model section and weight seed.
MC_API mc_status mc_model_create(const mc_config * config, mc_model ** out);
MC_API mc_status mc_model_load(const char * path, mc_model ** out);
MC_API mc_status mc_model_save(const mc_model * model, const char * path);
MC_API void      mc_model_free(mc_model * model);

//
// Decode sessions
//

// Session for the config's engine. `model` must outlive the session.
MC_API mc_status mc_session_create(const mc_model * model, const mc_config * config, mc_session ** out);
MC_API mc_status mc_session_run(mc_session * session);
// Copies up to `capacity` response tokens; `*length` receives the full count.
MC_API mc_status mc_session_tokens(const mc_session * session, uint32_t * tokens, size_t capacity, size_t * length);
MC_API mc_status mc_session_num_steps(const mc_session * session, size_t * steps);
MC_API mc_status mc_session_total_score_entries(const mc_session * session, uint64_t * entries);
MC_API mc_status mc_session_wall_seconds(const mc_session * session, double * seconds);
MC_API mc_status mc_session_write_trace(const mc_session * session, const char * path);
MC_API void      mc_session_free(mc_session * session);

//
// Commands. Artifacts go to the config's output_dir; `summary` (optional)
// receives the human-readable summary.
//

MC_API mc_status mc_cmd_decode(const mc_config * config, char ** summary);
MC_API mc_status mc_cmd_bench(const mc_config * config, char ** summary);
// mode: drift | sparsity | visibility | relocation | cost
MC_API mc_status mc_cmd_analyze(const mc_config * config, const char * mode, char ** summary);

#ifdef __cplusplus
}
#endif

#endif  // MARSCACHE_H

#ifndef EFC_H
#define EFC_H

/* C interface to the equation-free control pipeline. A session holds one
 * pipeline configuration; stages run against a directory of artifacts.
 * All functions are safe to call from a single thread per session. */

#ifdef __cplusplus
extern "C" {
#endif

typedef enum efc_status {
    EFC_OK = 0,
    EFC_ERR_USAGE = 1,   /* bad arguments or configuration */
    EFC_ERR_NUMERIC = 2, /* solver failure, divergence, singular system */
    EFC_ERR_IO = 3       /* missing or malformed files */
} efc_status;

typedef struct efc_session efc_session;

const char* efc_version(void);

/* config_json: full or partial configuration as JSON text; NULL or "" keeps
 * every default. Unknown keys are rejected. */
efc_status efc_session_new(const char* config_json, efc_session** out);
void efc_session_free(efc_session* session);

/* Overrides one field, e.g. ("seeds.model", "42") or
 * ("stage_options.plant", "\"fd\"") or ("control.poles", "[0.3,0.5]"). */
efc_status efc_session_set(efc_session* session, const char* key_path,
                           const char* json_value);

/* stage is one of: gen-data, train, steady-state, spectrum, reduce, design,
 * simulate, pipeline, report. Artifacts are read from and written to run_dir. */
efc_status efc_run_stage(efc_session* session, const char* stage, const char* run_dir);

/* Message of the last failed call on this session; "" after success. */
const char* efc_last_error(const efc_session* session);

/* One-line key=value summary of the last successful stage run. */
const char* efc_last_summary(const efc_session* session);

/* Newline-separated warnings collected by the last stage run; "" if none. */
const char* efc_last_warnings(const efc_session* session);

#ifdef __cplusplus
}
#endif

#endif /* EFC_H */

#include "efc/efc.h"

#include <exception>
#include <string>

#include "core/errors.h"
#include "pipeline/config.h"
#include "pipeline/stages.h"

struct efc_session {
    efc::PipelineConfig cfg;
    std::string error;
    std::string summary;
    std::string warnings;
};

namespace {

efc_status status_from(const efc::Error& e) {
    switch (e.kind()) {
        case efc::ErrorKind::usage: return EFC_ERR_USAGE;
        case efc::ErrorKind::numeric: return EFC_ERR_NUMERIC;
        case efc::ErrorKind::io: return EFC_ERR_IO;
    }
    return EFC_ERR_NUMERIC;
}

template <typename Fn>
efc_status guarded(efc_session* s, Fn&& fn) {
    s->error.clear();
    try {
        fn();
        return EFC_OK;
    } catch (const efc::Error& e) {
        s->error = e.what();
        return status_from(e);
    } catch (const std::exception& e) {
        s->error = e.what();
        return EFC_ERR_NUMERIC;
    }
}

}  // namespace

extern "C" {

const char* efc_version(void) { return "1.0.0"; }

efc_status efc_session_new(const char* config_json, efc_session** out) {
    if (!out) return EFC_ERR_USAGE;
    *out = nullptr;
    auto* s = new (std::nothrow) efc_session;
    if (!s) return EFC_ERR_NUMERIC;
    efc_status rc = guarded(s, [&] {
        s->cfg = efc::config_from_json(config_json ? config_json : "");
    });
    if (rc != EFC_OK) {
        delete s;
        return rc;
    }
    *out = s;
    return EFC_OK;
}

void efc_session_free(efc_session* session) { delete session; }

efc_status efc_session_set(efc_session* session, const char* key_path, const char* json_value) {
    if (!session) return EFC_ERR_USAGE;
    if (!key_path || !json_value) {
        session->error = "key_path and json_value must not be null";
        return EFC_ERR_USAGE;
    }
    return guarded(session, [&] { efc::config_set(session->cfg, key_path, json_value); });
}

efc_status efc_run_stage(efc_session* session, const char* stage, const char* run_dir) {
    if (!session) return EFC_ERR_USAGE;
    if (!stage || !run_dir) {
        session->error = "stage and run_dir must not be null";
        return EFC_ERR_USAGE;
    }
    return guarded(session, [&] {
        std::vector<std::string> warn;
        session->summary = efc::run_stage(session->cfg, stage, run_dir, &warn);
        session->warnings.clear();
        for (const auto& w : warn) {
            if (!session->warnings.empty()) session->warnings += '\n';
            session->warnings += w;
        }
    });
}

const char* efc_last_error(const efc_session* session) {
    return session ? session->error.c_str() : "null session";
}

const char* efc_last_summary(const efc_session* session) {
    return session ? session->summary.c_str() : "";
}

const char* efc_last_warnings(const efc_session* session) {
    return session ? session->warnings.c_str() : "";
}

}  // extern "C"

#include "marscache/marscache.h"

#include "app/commands.hpp"
#include "app/run_config.hpp"
#include "app/workload.hpp"
#include "core/error.hpp"
#include "diffusion/trace_io.hpp"
#include "model/snapshot.hpp"
#include "model/weights.hpp"

#include <cstdlib>
#include <cstring>
#include <fstream>
#include <new>
#include <optional>
#include <string>

using namespace marscache;

struct mc_config {
    app::json      source;  // document as loaded, overrides applied
    app::RunConfig resolved;
};

struct mc_model {
    model::Weights weights;
};

struct mc_session {
    const mc_model *                      model = nullptr;
    app::RunConfig                        config;
    std::unique_ptr<app::Workload>        workload;
    std::optional<app::EngineRun>         run;
};

namespace {

thread_local std::string g_last_error;

mc_status to_status(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::invalid_argument:
            return MC_ERR_INVALID_ARGUMENT;
        case ErrorKind::config:
            return MC_ERR_CONFIG;
        case ErrorKind::io:
            return MC_ERR_IO;
        case ErrorKind::numeric:
            return MC_ERR_NUMERIC;
        case ErrorKind::state:
            return MC_ERR_STATE;
        case ErrorKind::check_failed:
            return MC_ERR_CHECK_FAILED;
    }
    return MC_ERR_INTERNAL;
}

template <class F> mc_status guarded(F && body) {
    g_last_error.clear();
    try {
        body();
        return MC_OK;
    } catch (const Error & e) {
        g_last_error = e.what();
        return to_status(e.kind());
    } catch (const std::bad_alloc &) {
        g_last_error = "out of memory";
    } catch (const std::exception & e) {
        g_last_error = e.what();
    } catch (...) {
        g_last_error = "unknown error";
    }
    return MC_ERR_INTERNAL;
}

void require(const void * p, const char * what) {
    if (p == nullptr) {
        fail(ErrorKind::invalid_argument, std::string(what) + " must not be null");
    }
}

char * dup_string(const std::string & s) {
    char * out = static_cast<char *>(std::malloc(s.size() + 1));
    if (out == nullptr) {
        throw std::bad_alloc();
    }
    std::memcpy(out, s.c_str(), s.size() + 1);
    return out;
}

mc_status make_config(app::json doc, mc_config ** out) {
    return guarded([&] {
        require(out, "out");
        *out     = nullptr;
        auto cfg = std::make_unique<mc_config>();
        cfg->resolved = app::parse_run_config(doc);
        cfg->source   = std::move(doc);
        *out          = cfg.release();
    });
}

template <class F> mc_status run_command(const mc_config * config, char ** summary, F && command) {
    return guarded([&] {
        require(config, "config");
        const app::CommandOutput result = command(config->resolved);
        if (summary != nullptr) {
            *summary = dup_string(result.summary);
        }
    });
}

}  // namespace

extern "C" {

const char * mc_version(void) {
    return "0.1.0";
}

const char * mc_status_string(mc_status status) {
    switch (status) {
        case MC_OK:
            return "ok";
        case MC_ERR_INVALID_ARGUMENT:
            return "invalid argument";
        case MC_ERR_CONFIG:
            return "invalid configuration";
        case MC_ERR_IO:
            return "i/o error";
        case MC_ERR_NUMERIC:
            return "numeric error";
        case MC_ERR_STATE:
            return "invalid state";
        case MC_ERR_CHECK_FAILED:
            return "internal check failed";
        case MC_ERR_INTERNAL:
            return "internal error";
    }
    return "unknown status";
}

const char * mc_last_error(void) {
    return g_last_error.c_str();
}

void mc_string_free(char * str) {
    std::free(str);
}

mc_status mc_config_default(mc_config ** out) {
    return make_config(app::json::object(), out);
}

mc_status mc_config_load(const char * path, mc_config ** out) {
    app::json doc;
    const mc_status st = guarded([&] {
        require(path, "path");
        doc = app::load_json_file(path);
    });
    return st == MC_OK ? make_config(std::move(doc), out) : st;
}

mc_status mc_config_load_with_overrides(const char * path, const char * const * overrides, size_t count,
                                        mc_config ** out) {
    app::json doc = app::json::object();
    const mc_status st = guarded([&] {
        if (path != nullptr) {
            doc = app::load_json_file(path);
        }
        if (count > 0) {
            require(overrides, "overrides");
        }
        for (size_t i = 0; i < count; ++i) {
            require(overrides[i], "override");
            app::apply_override(doc, overrides[i]);
        }
    });
    return st == MC_OK ? make_config(std::move(doc), out) : st;
}

mc_status mc_config_from_json(const char * text, mc_config ** out) {
    app::json doc;
    const mc_status st = guarded([&] {
        require(text, "json");
        doc = app::json::parse(text, nullptr, false, true);
        if (doc.is_discarded()) {
            fail(ErrorKind::config, "config: not valid JSON");
        }
    });
    return st == MC_OK ? make_config(std::move(doc), out) : st;
}

mc_status mc_config_set(mc_config * config, const char * assignment) {
    return guarded([&] {
        require(config, "config");
        require(assignment, "assignment");
        app::json doc = config->source;
        app::apply_override(doc, assignment);
        config->resolved = app::parse_run_config(doc);
        config->source   = std::move(doc);
    });
}

mc_status mc_config_to_json(const mc_config * config, char ** out) {
    return guarded([&] {
        require(config, "config");
        require(out, "out");
        *out = dup_string(app::to_json(config->resolved).dump(2));
    });
}

void mc_config_free(mc_config * config) {
    delete config;
}

mc_status mc_model_create(const mc_config * config, mc_model ** out) {
    return guarded([&] {
        require(config, "config");
        require(out, "out");
        *out = new mc_model{model::init_weights(config->resolved.model, config->resolved.seeds.weights)};
    });
}

mc_status mc_model_load(const char * path, mc_model ** out) {
    return guarded([&] {
        require(path, "path");
        require(out, "out");
        *out = new mc_model{model::load_weights(path)};
    });
}

mc_status mc_model_save(const mc_model * m, const char * path) {
    return guarded([&] {
        require(m, "model");
        require(path, "path");
        model::save_weights(m->weights, path);
    });
}

void mc_model_free(mc_model * m) {
    delete m;
}

mc_status mc_session_create(const mc_model * m, const mc_config * config, mc_session ** out) {
    return guarded([&] {
        require(m, "model");
        require(config, "config");
        require(out, "out");
        *out         = nullptr;
        auto s      = std::make_unique<mc_session>();
        s->model    = m;
        s->config   = config->resolved;
        s->workload = app::build_workload(s->config, m->weights);
        *out        = s.release();
    });
}

mc_status mc_session_run(mc_session * s) {
    return guarded([&] {
        require(s, "session");
        s->run = app::run_engine(*s->workload, s->config.engine.spec, s->config.decode);
    });
}

static const app::EngineRun & finished(const mc_session * s) {
    require(s, "session");
    if (!s->run) {
        fail(ErrorKind::state, "session has not been run");
    }
    return *s->run;
}

mc_status mc_session_tokens(const mc_session * s, uint32_t * tokens, size_t capacity, size_t * length) {
    return guarded([&] {
        const auto & run = finished(s);
        require(length, "length");
        if (capacity > 0) {
            require(tokens, "tokens");
        }
        const auto & t = run.result.tokens;
        *length        = t.size();
        for (std::size_t i = 0; i < std::min(capacity, t.size()); ++i) {
            tokens[i] = t[i];
        }
    });
}

mc_status mc_session_num_steps(const mc_session * s, size_t * steps) {
    return guarded([&] {
        const auto & run = finished(s);
        require(steps, "steps");
        *steps = run.result.trace.steps.size();
    });
}

mc_status mc_session_total_score_entries(const mc_session * s, uint64_t * entries) {
    return guarded([&] {
        const auto & run = finished(s);
        require(entries, "entries");
        *entries = run.result.trace.total_score_entries();
    });
}

mc_status mc_session_wall_seconds(const mc_session * s, double * seconds) {
    return guarded([&] {
        const auto & run = finished(s);
        require(seconds, "seconds");
        *seconds = run.wall_seconds;
    });
}

mc_status mc_session_write_trace(const mc_session * s, const char * path) {
    return guarded([&] {
        const auto & run = finished(s);
        require(path, "path");
        std::ofstream f(path);
        diffusion::write_trace(run.result.trace, f);
        if (!f) {
            fail(ErrorKind::io, std::string("cannot write ") + path);
        }
    });
}

void mc_session_free(mc_session * s) {
    delete s;
}

mc_status mc_cmd_decode(const mc_config * config, char ** summary) {
    return run_command(config, summary, [](const app::RunConfig & c) { return app::cmd_decode(c); });
}

mc_status mc_cmd_bench(const mc_config * config, char ** summary) {
    return run_command(config, summary, [](const app::RunConfig & c) { return app::cmd_bench(c); });
}

mc_status mc_cmd_analyze(const mc_config * config, const char * mode, char ** summary) {
    return run_command(config, summary, [&](const app::RunConfig & c) {
        require(mode, "mode");
        return app::cmd_analyze(c, mode);
    });
}

}  // extern "C"

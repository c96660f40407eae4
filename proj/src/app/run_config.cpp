#include "app/run_config.hpp"

#include "core/error.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

namespace marscache::app {

namespace {

[[noreturn]] void bad(const std::string & field, const std::string & what) {
    fail(ErrorKind::config, field + ": " + what);
}

void reject_unknown(const json & obj, const std::string & prefix, const std::set<std::string> & known) {
    for (const auto & [key, _] : obj.items()) {
        if (!known.contains(key)) {
            bad(prefix + key, "unknown key");
        }
    }
}

const json & object_at(const json & doc, const std::string & key, const std::string & prefix) {
    const json & v = doc.at(key);
    if (!v.is_object()) {
        bad(prefix + key, "expected an object");
    }
    return v;
}

std::size_t as_count(const json & v, const std::string & field) {
    if (!v.is_number_integer() || (!v.is_number_unsigned() && v.get<std::int64_t>() < 0)) {
        bad(field, "expected a non-negative integer, got " + v.dump());
    }
    return v.get<std::size_t>();
}

double as_real(const json & v, const std::string & field) {
    if (!v.is_number()) {
        bad(field, "expected a number, got " + v.dump());
    }
    return v.get<double>();
}

bool as_bool(const json & v, const std::string & field) {
    if (!v.is_boolean()) {
        bad(field, "expected true or false, got " + v.dump());
    }
    return v.get<bool>();
}

std::string as_string(const json & v, const std::string & field) {
    if (!v.is_string()) {
        bad(field, "expected a string, got " + v.dump());
    }
    return v.get<std::string>();
}

std::vector<std::size_t> as_counts(const json & v, const std::string & field) {
    if (!v.is_array()) {
        bad(field, "expected an array");
    }
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        out.push_back(as_count(v[i], field + "[" + std::to_string(i) + "]"));
    }
    return out;
}

template <class T, class F> void read_if(const json & obj, const char * key, const std::string & prefix, T & out, F conv) {
    if (obj.contains(key)) {
        out = conv(obj.at(key), prefix + key);
    }
}

std::vector<std::string> preset_names(const json & entry) {
    std::vector<std::string> names;
    for (const char * key : {"preset", "presets"}) {
        if (!entry.contains(key)) {
            continue;
        }
        const json & v = entry.at(key);
        if (v.is_string()) {
            names.push_back(v.get<std::string>());
        } else if (v.is_array()) {
            for (const auto & n : v) {
                names.push_back(as_string(n, std::string("engine.") + key));
            }
        } else {
            bad(std::string("engine.") + key, "expected a name or a list of names");
        }
    }
    return names;
}

const std::set<std::string> kEngineKeys = {
    "engine_kind", "label",           "groups",        "tau_text",
    "tau_visual",  "anchor_budgets",  "chunk_enabled", "sample_size",
    "budget_frame_reference", "text_keys_for_chunked", "dual_rebuild_each_step", "description",
};

}  // namespace

std::string default_preset_dir() {
#ifdef MARSCACHE_PRESET_DIR
    return MARSCACHE_PRESET_DIR;
#else
    return "presets";
#endif
}

json load_json_file(const std::string & path) {
    std::ifstream in(path);
    if (!in) {
        fail(ErrorKind::io, "cannot open " + path);
    }
    try {
        return json::parse(in, nullptr, true, true);
    } catch (const json::parse_error & e) {
        fail(ErrorKind::config, path + ": " + e.what());
    }
}

EngineConfig resolve_engine(const json & entry, const std::string & preset_dir, const model::ModelConfig & model,
                            const LayoutParams & layout) {
    json inline_keys = json::object();
    EngineConfig out;
    if (entry.is_string()) {
        out.presets.push_back(entry.get<std::string>());
    } else if (entry.is_object()) {
        out.presets = preset_names(entry);
        for (const auto & [key, value] : entry.items()) {
            if (key != "preset" && key != "presets" && key != "from_presets") {
                inline_keys[key] = value;
            }
        }
    } else {
        bad("engine", "expected a preset name or an object");
    }

    json merged = json::object();
    for (const auto & name : out.presets) {
        const auto path = std::filesystem::path(preset_dir) / (name + ".json");
        if (!std::filesystem::exists(path)) {
            bad("engine.preset", "no preset named '" + name + "' in " + preset_dir);
        }
        const json preset = load_json_file(path.string());
        if (!preset.is_object()) {
            bad("preset " + name, "expected an object");
        }
        reject_unknown(preset, "preset " + name + ": ", kEngineKeys);
        merged.update(preset);
    }
    reject_unknown(inline_keys, "engine.", kEngineKeys);
    merged.update(inline_keys);

    const std::string  p    = "engine.";
    mars::EngineSpec & spec = out.spec;
    if (merged.contains("engine_kind")) {
        spec.kind = mars::parse_engine_kind(as_string(merged.at("engine_kind"), p + "engine_kind"));
    }
    read_if(merged, "label", p, spec.label, as_string);
    if (spec.label.empty()) {
        for (const auto & n : out.presets) {
            spec.label += (spec.label.empty() ? "" : "+") + n;
        }
        if (spec.label.empty()) {
            spec.label = mars::to_string(spec.kind);
        }
    }
    const std::size_t G = model.num_groups();
    if (merged.contains("groups") && as_count(merged.at("groups"), p + "groups") != G) {
        bad(p + "groups", "preset expects " + merged.at("groups").dump() + " groups, model has " + std::to_string(G));
    }
    read_if(merged, "chunk_enabled", p, spec.chunk_enabled, as_bool);
    read_if(merged, "sample_size", p, spec.sample_size, as_count);
    read_if(merged, "text_keys_for_chunked", p, spec.visibility.text_keys_for_chunked, as_bool);
    read_if(merged, "dual_rebuild_each_step", p, spec.dual_rebuild_each_step, as_bool);

    if (spec.kind == mars::EngineKind::mars) {
        if (!merged.contains("tau_text")) {
            bad(p + "tau_text", "required for the mars engine");
        }
        spec.schedule.tau_text   = as_counts(merged.at("tau_text"), p + "tau_text");
        spec.schedule.tau_visual = merged.contains("tau_visual") ? as_counts(merged.at("tau_visual"), p + "tau_visual")
                                                                 : spec.schedule.tau_text;
        std::optional<std::size_t> reference;
        if (merged.contains("budget_frame_reference") && !merged.at("budget_frame_reference").is_null()) {
            reference = as_count(merged.at("budget_frame_reference"), p + "budget_frame_reference");
            if (*reference == 0) {
                bad(p + "budget_frame_reference", "must be >= 1");
            }
        }
        spec.anchor_budgets.assign(G, std::nullopt);
        if (merged.contains("anchor_budgets")) {
            const json & b = merged.at("anchor_budgets");
            if (!b.is_array() || b.size() != G) {
                bad(p + "anchor_budgets", "expected an array of " + std::to_string(G) + " entries (null = full attention)");
            }
            for (std::size_t g = 0; g < G; ++g) {
                if (b[g].is_null()) {
                    continue;
                }
                std::size_t k = as_count(b[g], p + "anchor_budgets[" + std::to_string(g) + "]");
                if (reference) {
                    // Budgets written for frames of `reference` tokens scale to
                    // the layout's frame size; a nonzero budget stays >= 1.
                    const std::size_t scaled = k * layout.patches_per_frame / *reference;
                    k                        = k > 0 ? std::max<std::size_t>(scaled, 1) : 0;
                }
                spec.anchor_budgets[g] = k;
            }
        }
    }
    return out;
}

diffusion::SequenceLayout RunConfig::make_layout() const {
    return diffusion::SequenceLayout(layout.frames, layout.patches_per_frame, layout.prompt_length,
                                     decode.generation_length, decode.block_length, model.mask_token_id());
}

void RunConfig::validate() const {
    model.validate();
    if (layout.frames == 0) {
        bad("layout.frames", "must be >= 1");
    }
    if (layout.patches_per_frame == 0) {
        bad("layout.patches_per_frame", "must be >= 1");
    }
    if (decode.generation_length == 0) {
        bad("decode.generation_length", "must be >= 1");
    }
    if (decode.block_length == 0) {
        bad("decode.block_length", "must be >= 1");
    }
    const auto l = make_layout();
    decode.validate(l);
    engine.spec.validate(model, l);
    for (const auto & e : engines) {
        e.spec.validate(model, l);
    }
    if (!std::isfinite(visual_scale) || visual_scale < 0.0) {
        bad("visual_scale", "must be a finite non-negative number");
    }
    if (bench_repeats == 0) {
        bad("bench.repeats", "must be >= 1");
    }
    for (double r : analysis.relocation_ratios) {
        if (!(r >= 0.0 && r <= 1.0)) {
            bad("analysis.relocation_ratios", "every ratio must lie in [0, 1]");
        }
    }
    if (analysis.visibility_length == 0) {
        bad("analysis.visibility_length", "must be >= 1");
    }
}

RunConfig parse_run_config(const json & doc) {
    if (!doc.is_object()) {
        bad("config", "expected a JSON object");
    }
    reject_unknown(doc, "", {"model", "layout", "decode", "engine", "engines", "seeds", "visual_scale", "weights_path",
                             "save_weights", "output_dir", "preset_dir", "bench", "analysis"});
    RunConfig cfg;
    cfg.model = model::ModelConfig::toy();

    if (doc.contains("model")) {
        const json & m = object_at(doc, "model", "");
        reject_unknown(m, "model.", {"num_layers", "num_heads", "model_dim", "head_dim", "vocab_size",
                                     "group_boundaries", "mask_mode", "rope_base"});
        read_if(m, "num_layers", "model.", cfg.model.num_layers, as_count);
        read_if(m, "num_heads", "model.", cfg.model.num_heads, as_count);
        read_if(m, "model_dim", "model.", cfg.model.model_dim, as_count);
        read_if(m, "head_dim", "model.", cfg.model.head_dim, as_count);
        read_if(m, "vocab_size", "model.", cfg.model.vocab_size, as_count);
        read_if(m, "group_boundaries", "model.", cfg.model.group_boundaries, as_counts);
        read_if(m, "rope_base", "model.", cfg.model.rope_base, as_real);
        if (m.contains("mask_mode")) {
            cfg.model.mask_mode = model::parse_mask_mode(as_string(m.at("mask_mode"), "model.mask_mode"));
        }
    }
    cfg.model.validate();

    if (doc.contains("layout")) {
        const json & l = object_at(doc, "layout", "");
        reject_unknown(l, "layout.", {"frames", "patches_per_frame", "prompt_length"});
        read_if(l, "frames", "layout.", cfg.layout.frames, as_count);
        read_if(l, "patches_per_frame", "layout.", cfg.layout.patches_per_frame, as_count);
        read_if(l, "prompt_length", "layout.", cfg.layout.prompt_length, as_count);
    }

    if (doc.contains("decode")) {
        const json & d = object_at(doc, "decode", "");
        reject_unknown(d, "decode.", {"generation_length", "num_steps", "block_length", "tokens_per_step",
                                      "confidence_threshold"});
        read_if(d, "generation_length", "decode.", cfg.decode.generation_length, as_count);
        read_if(d, "num_steps", "decode.", cfg.decode.num_steps, as_count);
        read_if(d, "block_length", "decode.", cfg.decode.block_length, as_count);
        read_if(d, "tokens_per_step", "decode.", cfg.decode.tokens_per_step, as_count);
        if (d.contains("confidence_threshold") && !d.at("confidence_threshold").is_null()) {
            cfg.decode.confidence_threshold = as_real(d.at("confidence_threshold"), "decode.confidence_threshold");
        }
    }

    if (doc.contains("seeds")) {
        const json & s = object_at(doc, "seeds", "");
        reject_unknown(s, "seeds.", {"weights", "workload"});
        read_if(s, "weights", "seeds.", cfg.seeds.weights, as_count);
        read_if(s, "workload", "seeds.", cfg.seeds.workload, as_count);
    }
    read_if(doc, "visual_scale", "", cfg.visual_scale, as_real);
    read_if(doc, "weights_path", "", cfg.weights_path, as_string);
    read_if(doc, "save_weights", "", cfg.save_weights, as_bool);
    read_if(doc, "output_dir", "", cfg.output_dir, as_string);
    cfg.preset_dir = default_preset_dir();
    read_if(doc, "preset_dir", "", cfg.preset_dir, as_string);

    if (doc.contains("bench")) {
        const json & b = object_at(doc, "bench", "");
        reject_unknown(b, "bench.", {"repeats", "parallel"});
        read_if(b, "repeats", "bench.", cfg.bench_repeats, as_count);
        read_if(b, "parallel", "bench.", cfg.bench_parallel, as_bool);
    }

    if (doc.contains("analysis")) {
        const json & a = object_at(doc, "analysis", "");
        reject_unknown(a, "analysis.", {"visibility_length", "relocation_k", "relocation_factor", "relocation_ratios",
                                        "trace_path"});
        read_if(a, "visibility_length", "analysis.", cfg.analysis.visibility_length, as_count);
        read_if(a, "relocation_k", "analysis.", cfg.analysis.relocation_k, as_count);
        read_if(a, "relocation_factor", "analysis.", cfg.analysis.relocation_factor, as_real);
        read_if(a, "trace_path", "analysis.", cfg.analysis.trace_path, as_string);
        if (a.contains("relocation_ratios")) {
            const json & r = a.at("relocation_ratios");
            if (!r.is_array()) {
                bad("analysis.relocation_ratios", "expected an array");
            }
            cfg.analysis.relocation_ratios.clear();
            for (const auto & v : r) {
                cfg.analysis.relocation_ratios.push_back(as_real(v, "analysis.relocation_ratios"));
            }
        }
    }

    const json engine = doc.contains("engine") ? doc.at("engine") : json("vanilla");
    cfg.engine        = resolve_engine(engine, cfg.preset_dir, cfg.model, cfg.layout);
    if (doc.contains("engines")) {
        const json & list = doc.at("engines");
        if (!list.is_array()) {
            bad("engines", "expected an array");
        }
        for (const auto & e : list) {
            cfg.engines.push_back(resolve_engine(e, cfg.preset_dir, cfg.model, cfg.layout));
        }
    }
    cfg.validate();
    return cfg;
}

json to_json(const EngineConfig & engine) {
    const mars::EngineSpec & s = engine.spec;
    json                     j;
    j["from_presets"] = engine.presets;
    j["engine_kind"]  = mars::to_string(s.kind);
    j["label"]        = s.label;
    if (s.kind == mars::EngineKind::mars) {
        j["groups"]     = s.schedule.groups();
        j["tau_text"]   = s.schedule.tau_text;
        j["tau_visual"] = s.schedule.tau_visual;
        json budgets    = json::array();
        for (const auto & k : s.anchor_budgets) {
            budgets.push_back(k ? json(*k) : json(nullptr));
        }
        j["anchor_budgets"]        = budgets;
        j["chunk_enabled"]         = s.chunk_enabled;
        j["sample_size"]           = s.sample_size;
        j["text_keys_for_chunked"] = s.visibility.text_keys_for_chunked;
    }
    if (s.kind == mars::EngineKind::dual_cache) {
        j["dual_rebuild_each_step"] = s.dual_rebuild_each_step;
    }
    return j;
}

json to_json(const RunConfig & c) {
    json j;
    j["model"] = {
        {"num_layers",       c.model.num_layers                  },
        {"num_heads",        c.model.num_heads                   },
        {"model_dim",        c.model.model_dim                   },
        {"head_dim",         c.model.head_dim                    },
        {"vocab_size",       c.model.vocab_size                  },
        {"group_boundaries", c.model.group_boundaries            },
        {"mask_mode",        model::to_string(c.model.mask_mode) },
        {"rope_base",        c.model.rope_base                   },
    };
    j["layout"] = {
        {"frames",            c.layout.frames           },
        {"patches_per_frame", c.layout.patches_per_frame},
        {"prompt_length",     c.layout.prompt_length    },
    };
    j["decode"] = {
        {"generation_length",    c.decode.generation_length},
        {"num_steps",            c.decode.num_steps        },
        {"block_length",         c.decode.block_length     },
        {"tokens_per_step",      c.decode.tokens_per_step  },
        {"confidence_threshold",
         c.decode.confidence_threshold ? json(*c.decode.confidence_threshold) : json(nullptr)},
    };
    j["engine"]  = to_json(c.engine);
    j["engines"] = json::array();
    for (const auto & e : c.engines) {
        j["engines"].push_back(to_json(e));
    }
    j["seeds"]        = {{"weights", c.seeds.weights}, {"workload", c.seeds.workload}};
    j["visual_scale"] = c.visual_scale;
    j["weights_path"] = c.weights_path;
    j["save_weights"] = c.save_weights;
    j["output_dir"]   = c.output_dir;
    j["preset_dir"]   = c.preset_dir;
    j["bench"]        = {{"repeats", c.bench_repeats}, {"parallel", c.bench_parallel}};
    j["analysis"]     = {
        {"visibility_length", c.analysis.visibility_length},
        {"relocation_k",      c.analysis.relocation_k     },
        {"relocation_factor", c.analysis.relocation_factor},
        {"relocation_ratios", c.analysis.relocation_ratios},
        {"trace_path",        c.analysis.trace_path       },
    };
    return j;
}

void apply_override(json & doc, std::string_view assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string_view::npos || eq == 0) {
        fail(ErrorKind::invalid_argument, "override '" + std::string(assignment) + "': expected key=value");
    }
    const std::string path(assignment.substr(0, eq));
    const std::string text(assignment.substr(eq + 1));
    json              value = json::parse(text, nullptr, false);
    if (value.is_discarded()) {
        value = text;
    }

    json *      node = &doc;
    std::size_t pos  = 0;
    while (true) {
        const auto        dot  = path.find('.', pos);
        const std::string part = path.substr(pos, dot == std::string::npos ? std::string::npos : dot - pos);
        if (part.empty()) {
            fail(ErrorKind::invalid_argument, "override '" + path + "': empty path segment");
        }
        json * next = nullptr;
        if (node->is_array()) {
            std::size_t idx = 0;
            try {
                idx = std::stoul(part);
            } catch (const std::exception &) {
                fail(ErrorKind::invalid_argument, "override '" + path + "': '" + part + "' is not an array index");
            }
            if (idx >= node->size()) {
                fail(ErrorKind::invalid_argument, "override '" + path + "': index " + part + " out of range");
            }
            next = &(*node)[idx];
        } else {
            if (node->is_null()) {
                *node = json::object();
            }
            if (!node->is_object()) {
                fail(ErrorKind::invalid_argument, "override '" + path + "': '" + part + "' is inside a scalar");
            }
            next = &(*node)[part];
        }
        if (dot == std::string::npos) {
            *next = value;
            return;
        }
        // An engine given as a bare preset name becomes an object so keys can
        // be layered on top of it.
        if (next->is_string()) {
            *next = json{{"preset", next->get<std::string>()}};
        }
        node = next;
        pos  = dot + 1;
    }
}

}  // namespace marscache::app

#pragma once

#include "diffusion/decode.hpp"
#include "diffusion/layout.hpp"
#include "mars/engines.hpp"
#include "model/config.hpp"

#include "json.hpp"

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace marscache::app {

using json    = nlohmann::ordered_json;
using TokenId = model::TokenId;

struct LayoutParams {
    std::size_t frames            = 8;
    std::size_t patches_per_frame = 16;
    std::size_t prompt_length     = 16;
};

// An engine after preset merging and budget scaling.
struct EngineConfig {
    std::vector<std::string> presets;  // informational once resolved
    mars::EngineSpec         spec;
};

struct AnalysisConfig {
    std::size_t         visibility_length = 1024;
    std::size_t         relocation_k      = 4;
    double              relocation_factor = 8.0;
    std::vector<double> relocation_ratios{0.0, 0.25, 0.5, 0.75, 1.0};
    std::string         trace_path;  // cost mode: cross-check this trace
};

struct Seeds {
    std::uint64_t weights  = 42;
    std::uint64_t workload = 42;
};

// Everything a run depends on. Commands are pure functions of this plus the
// preset files it was resolved against.
struct RunConfig {
    model::ModelConfig        model;
    LayoutParams              layout;
    diffusion::DecodeConfig   decode;
    EngineConfig              engine;   // decode, analyze
    std::vector<EngineConfig> engines;  // bench
    Seeds                     seeds;
    double                    visual_scale = 1.0;
    std::string               weights_path;  // load a snapshot instead of seeding
    bool                      save_weights = false;
    std::string               output_dir   = "marscache-out";
    std::string               preset_dir;
    std::size_t               bench_repeats  = 1;
    bool                      bench_parallel = false;
    AnalysisConfig            analysis;

    diffusion::SequenceLayout make_layout() const;
    void                      validate() const;
};

// Preset directory compiled into the library.
std::string default_preset_dir();

// Merges the named preset files (in order) and then the inline keys of
// `entry`. `entry` is a preset name or an object with optional "preset" /
// "presets" keys plus engine keys.
EngineConfig resolve_engine(const json & entry, const std::string & preset_dir, const model::ModelConfig & model,
                            const LayoutParams & layout);

// Throws Error(config) naming the offending key, e.g. "decode.num_steps: ...".
RunConfig parse_run_config(const json & doc);
json      to_json(const RunConfig & config);
json      to_json(const EngineConfig & engine);

json load_json_file(const std::string & path);

// "a.b.2.c=value": value is parsed as JSON when possible, otherwise taken as
// a string. Missing objects along the path are created.
void apply_override(json & doc, std::string_view assignment);

}  // namespace marscache::app

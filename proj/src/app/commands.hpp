#pragma once

#include "app/run_config.hpp"
#include "app/workload.hpp"
#include "diffusion/decode.hpp"

#include <string>
#include <vector>

namespace marscache::app {

struct CommandOutput {
    std::string              summary;    // one line per engine or report
    std::vector<std::string> artifacts;  // paths written
};

struct EngineRun {
    diffusion::DecodeResult result;
    double                  wall_seconds = 0.0;
};

// Name the engine writes into its trace.
std::string engine_name(const mars::EngineSpec & spec);

EngineRun run_engine(const Workload & workload, const mars::EngineSpec & spec, const diffusion::DecodeConfig & decode,
                     const diffusion::StepObserver & observer = {});

// Writes tokens.txt, trace.jsonl and config.resolved.json (plus weights.bin
// when save_weights is set) into output_dir.
CommandOutput cmd_decode(const RunConfig & config);

// Runs every listed engine on one workload and writes bench.csv. Vanilla is
// the reference for ratios and agreement; it runs even when not listed.
CommandOutput cmd_bench(const RunConfig & config);

const std::vector<std::string> & analyze_modes();

// Writes <mode>.csv. Unknown modes throw Error(invalid_argument) listing the
// valid ones; failed internal checks throw Error(check_failed) after the CSV
// is written.
CommandOutput cmd_analyze(const RunConfig & config, const std::string & mode);

}  // namespace marscache::app

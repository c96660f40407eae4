#pragma once

#include "diffusion/decode.hpp"
#include "diffusion/layout.hpp"
#include "mars/engines.hpp"
#include "model/config.hpp"

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace marscache::analysis {

// Where one denoising step sits in the decode.
struct StepShape {
    std::size_t step  = 0;  // global, 1-based
    std::size_t block = 0;
};

struct StepCost {
    std::size_t                step             = 0;
    std::size_t                block            = 0;
    std::size_t                analytic_entries = 0;
    std::size_t                analytic_rows    = 0;
    std::optional<std::size_t> recorded_entries;
    std::optional<std::size_t> recorded_rows;
};

// Cost unit: single-head Q.K score entries summed over layers. Rows are
// (row, layer) pairs pushed through a transformer block.
struct CostReport {
    std::string           engine;
    std::vector<StepCost> steps;
    std::size_t           total_entries         = 0;
    std::size_t           total_rows            = 0;
    std::size_t           vanilla_entries       = 0;  // same workload, vanilla engine
    std::size_t           vanilla_rows          = 0;
    double                entry_ratio_vs_vanilla = 0.0;
    double                row_ratio_vs_vanilla   = 0.0;
};

// Step sequence implied by a count- or schedule-mode decode config.
// Threshold mode depends on model confidences, so it needs a trace.
std::vector<StepShape> step_shapes(const diffusion::DecodeConfig & config, const diffusion::SequenceLayout & layout);
std::vector<StepShape> step_shapes(const diffusion::DecodeTrace & trace);

// Closed-form entries of one refresh of all visual rows in a group with
// per-frame anchor budget k (nullopt: every visual row sees every key).
std::size_t visual_refresh_entries(const diffusion::SequenceLayout & layout, std::optional<std::size_t> k,
                                   bool text_keys_for_chunked);

// Analytic per-step counts, computed from the engine configuration alone.
CostReport attention_cost(const mars::EngineSpec & spec, const model::ModelConfig & model,
                          const diffusion::SequenceLayout & layout, std::span<const StepShape> steps);

// Same, with the step sequence taken from `trace` and the recorded counts
// attached. With `strict`, any mismatch throws Error(check_failed) naming the
// step.
CostReport attention_cost(const mars::EngineSpec & spec, const model::ModelConfig & model,
                          const diffusion::SequenceLayout & layout, const diffusion::DecodeTrace & trace,
                          bool strict = true);

// Steps whose recorded counts differ from the analytic ones.
std::vector<std::size_t> cost_mismatches(const CostReport & report);

}  // namespace marscache::analysis

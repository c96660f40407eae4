#pragma once

#include "core/matrix.hpp"
#include "diffusion/layout.hpp"
#include "diffusion/unmask.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace marscache::diffusion {

// Commit rule:
//  - confidence_threshold set: threshold mode, each block capped at its share
//    of num_steps (the last allowed step commits everything left);
//  - tokens_per_step > 0: fixed count per step, num_steps is an upper bound;
//  - otherwise num_steps is split over blocks and each block's tokens are
//    spread evenly over its steps.
struct DecodeConfig {
    std::size_t           generation_length = 64;
    std::size_t           num_steps         = 16;
    std::size_t           block_length      = 32;
    std::size_t           tokens_per_step   = 4;
    std::optional<double> confidence_threshold;

    void validate(const SequenceLayout & layout) const;
    // Upper bound on steps spent in each block.
    std::vector<std::size_t> block_step_budget(const SequenceLayout & layout) const;
};

// What an engine did during one step.
struct StepReport {
    std::vector<bool> refresh_text;    // per group
    std::vector<bool> refresh_visual;  // per group
    bool              full_recompute  = false;
    std::size_t       score_entries   = 0;  // single-head Q.K products, summed over layers
    std::size_t       rows_recomputed = 0;  // (row, layer) pairs pushed through a block
    std::uint64_t     anchor_digest   = 0;  // 0 when the engine keeps no anchors
};

struct StepOutput {
    core::Matrix logits;  // one row per active-block position
    StepReport   report;
};

// One denoising engine. `t` is the global 1-based step counter, `response`
// the current response tokens, `active_block` the block being decoded.
class Denoiser {
  public:
    virtual ~Denoiser() = default;

    virtual std::string name() const = 0;
    virtual StepOutput  step(std::size_t t, std::span<const TokenId> response, std::size_t active_block) = 0;
};

struct StepRecord {
    std::size_t         step        = 0;  // global, 1-based
    std::size_t         block       = 0;
    std::size_t         block_step  = 0;  // 1-based within the block
    std::vector<Commit> committed;        // positions relative to the response start
    StepReport          report;
    std::uint64_t       elapsed_ns = 0;
};

struct DecodeTrace {
    std::string             engine;
    std::string             clock = "global";
    std::size_t             groups = 0;
    std::vector<StepRecord> steps;

    std::size_t total_score_entries() const;
    std::size_t total_rows_recomputed() const;
    std::uint64_t total_elapsed_ns() const;
};

struct DecodeResult {
    std::vector<TokenId> tokens;
    DecodeTrace          trace;
};

using StepObserver = std::function<void(const StepRecord &, const core::Matrix & logits)>;

// Starts from a fully masked response and decodes blocks left to right.
// Committed tokens are never revisited.
DecodeResult decode(Denoiser & engine, const SequenceLayout & layout, const DecodeConfig & config,
                    const StepObserver & observer = {});

}  // namespace marscache::diffusion

#pragma once

#include "diffusion/decode.hpp"
#include "diffusion/layout.hpp"
#include "mars/anchors.hpp"
#include "mars/schedule.hpp"
#include "mars/sparse_attention.hpp"
#include "model/transformer.hpp"

#include <array>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace marscache::mars {

using diffusion::StepOutput;
using model::TokenId;

enum class EngineKind { vanilla, dual_cache, mars };

std::string to_string(EngineKind kind);
EngineKind  parse_engine_kind(const std::string & text);

struct EngineSpec {
    EngineKind  kind = EngineKind::vanilla;
    std::string label;

    // mars only
    RefreshSchedule                         schedule;
    std::vector<std::optional<std::size_t>> anchor_budgets;  // per group, per frame; nullopt = full attention
    bool                                    chunk_enabled = true;
    std::size_t                             sample_size   = 32;
    VisibilityOptions                       visibility;

    // dual_cache only: rebuild the context cache every step instead of once per block.
    bool dual_rebuild_each_step = false;

    // Throws Error(config) naming the offending field.
    void validate(const model::ModelConfig & model, const SequenceLayout & layout) const;

    // Anchors apply to group g: chunking on and a finite budget.
    bool group_is_sparse(std::size_t g) const;
};

// Everything an engine needs besides the evolving response.
struct DecodeContext {
    const model::Weights *  weights = nullptr;
    const SequenceLayout *  layout  = nullptr;
    const core::Matrix *    visual  = nullptr;
    std::vector<TokenId>    prompt;
};

// Full forward over the entire sequence every step.
class VanillaEngine final : public diffusion::Denoiser {
  public:
    explicit VanillaEngine(DecodeContext ctx, bool capture_attention = false);

    std::string name() const override { return "vanilla"; }
    StepOutput  step(std::size_t t, std::span<const TokenId> response, std::size_t active_block) override;

    // Result of the most recent step's forward pass.
    const model::ForwardResult & last_forward() const { return last_; }

  private:
    DecodeContext        ctx_;
    bool                 capture_attention_;
    model::ForwardResult last_;
};

// Full forward at the first step of each block, then only the active block's
// rows against cached context keys/values.
class DualCacheEngine final : public diffusion::Denoiser {
  public:
    DualCacheEngine(DecodeContext ctx, bool rebuild_each_step);

    std::string name() const override { return "dual_cache"; }
    StepOutput  step(std::size_t t, std::span<const TokenId> response, std::size_t active_block) override;

  private:
    DecodeContext                ctx_;
    bool                         rebuild_each_step_;
    std::optional<std::size_t>   cached_block_;
    std::vector<model::LayerKV>  kv_;
};

// Per-layer keys/values over the whole sequence, hidden states at group
// boundaries, refresh bookkeeping and the anchor plan.
struct CacheState {
    bool                                    initialized = false;
    std::vector<model::LayerKV>             kv;           // per layer
    std::vector<core::Matrix>               boundary;     // G + 1 entries; boundary[g] feeds group g
    std::vector<std::array<std::size_t, 2>> last_refresh; // per group: {text, visual}
    std::optional<AnchorPlan>               anchors;
};

class MarsEngine final : public diffusion::Denoiser {
  public:
    MarsEngine(DecodeContext ctx, EngineSpec spec);

    std::string name() const override { return spec_.label.empty() ? "mars" : spec_.label; }
    StepOutput  step(std::size_t t, std::span<const TokenId> response, std::size_t active_block) override;

    const CacheState & cache() const { return cache_; }

  private:
    StepOutput initialize(std::span<const TokenId> response, std::size_t active_block);
    StepOutput refresh_step(std::size_t t, std::span<const TokenId> response, std::size_t active_block);

    DecodeContext ctx_;
    EngineSpec    spec_;
    CacheState    cache_;
};

std::unique_ptr<diffusion::Denoiser> make_engine(const EngineSpec & spec, const DecodeContext & ctx);

}  // namespace marscache::mars

#pragma once

#include "core/matrix.hpp"
#include "core/random.hpp"
#include "diffusion/layout.hpp"
#include "diffusion/synthetic.hpp"
#include "mars/engines.hpp"
#include "model/weights.hpp"

#include <memory>
#include <vector>

namespace fixtures {

using namespace marscache;

inline core::Matrix random_matrix(std::size_t rows, std::size_t cols, core::RandomStream & rng, double scale = 1.0) {
    core::Matrix m(rows, cols);
    for (double & x : m.data()) {
        x = scale * rng.next_gaussian();
    }
    return m;
}

// 4 layers in 4 groups, 2 heads of width 8, vocab 32.
inline model::ModelConfig small_model(model::MaskMode mode = model::MaskMode::bidirectional) {
    model::ModelConfig c;
    c.num_layers       = 4;
    c.num_heads        = 2;
    c.model_dim        = 16;
    c.head_dim         = 8;
    c.vocab_size       = 32;
    c.group_boundaries = {0, 1, 2, 3};
    c.mask_mode        = mode;
    return c;
}

struct Setup {
    model::Weights            weights;
    diffusion::SequenceLayout layout;
    core::Matrix              visual;
    std::vector<model::TokenId> prompt;

    mars::DecodeContext context() const { return {&weights, &layout, &visual, prompt}; }
};

inline std::unique_ptr<Setup> make_setup(const model::ModelConfig & cfg, std::size_t frames, std::size_t patches,
                                         std::size_t prompt_len, std::size_t gen, std::size_t block,
                                         std::uint64_t seed, double visual_scale = 1.0) {
    diffusion::SequenceLayout layout(frames, patches, prompt_len, gen, block, cfg.mask_token_id());
    auto root   = core::seeded_stream(seed, "workload");
    auto visual = diffusion::synthetic_visual_embeddings(layout, cfg.model_dim, visual_scale, root.child("visual"));
    auto prompt = diffusion::synthetic_prompt(prompt_len, cfg.mask_token_id(), root.child("prompt"));
    return std::make_unique<Setup>(
        Setup{model::init_weights(cfg, seed), std::move(layout), std::move(visual), std::move(prompt)});
}

// Default toy workload: 8 frames x 16 patches, prompt 16, generation 64,
// block 32, seed 42.
inline std::unique_ptr<Setup> toy_setup(model::MaskMode mode = model::MaskMode::bidirectional) {
    auto cfg      = model::ModelConfig::toy();
    cfg.mask_mode = mode;
    return make_setup(cfg, 8, 16, 16, 64, 32, 42);
}

inline mars::EngineSpec mars_spec(std::vector<std::size_t> tau_text, std::vector<std::size_t> tau_visual,
                                  std::vector<std::optional<std::size_t>> budgets, std::string label = "mars") {
    mars::EngineSpec s;
    s.kind                = mars::EngineKind::mars;
    s.label               = std::move(label);
    s.schedule.tau_text   = std::move(tau_text);
    s.schedule.tau_visual = std::move(tau_visual);
    s.anchor_budgets      = std::move(budgets);
    return s;
}

}  // namespace fixtures

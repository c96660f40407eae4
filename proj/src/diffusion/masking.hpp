#pragma once

#include "core/matrix.hpp"
#include "core/random.hpp"
#include "diffusion/layout.hpp"
#include "model/weights.hpp"

#include <span>
#include <vector>

namespace marscache::diffusion {

struct DiffusionState {
    std::size_t          step_index = 1;  // 1-based
    double               t          = 1.0;
    std::vector<TokenId> tokens;
    std::vector<bool>    mask_flags;  // true exactly where tokens == [MASK]
    std::size_t          active_block = 0;

    std::size_t masked_count() const;
};

// Each position is independently replaced by [MASK] with probability t.
DiffusionState forward_mask(std::span<const TokenId> clean, double t, core::RandomStream & rng, TokenId mask_token_id);

// -(1/t) * sum_i m_i log p(R0_i | visual, prompt, Rt), averaged over the
// response length. Conditions are never masked. Evaluation only.
double dlm_loss(const model::Weights & weights, const SequenceLayout & layout, const core::Matrix & visual,
                std::span<const TokenId> prompt, std::span<const TokenId> clean_response, double t,
                core::RandomStream & rng);

}  // namespace marscache::diffusion

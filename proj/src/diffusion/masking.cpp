#include "diffusion/masking.hpp"

#include "core/error.hpp"
#include "model/transformer.hpp"

#include <algorithm>
#include <cmath>

namespace marscache::diffusion {

std::size_t DiffusionState::masked_count() const {
    return static_cast<std::size_t>(std::count(mask_flags.begin(), mask_flags.end(), true));
}

DiffusionState forward_mask(std::span<const TokenId> clean, double t, core::RandomStream & rng, TokenId mask_token_id) {
    if (!(t >= 0.0 && t <= 1.0)) {
        fail(ErrorKind::invalid_argument, "forward_mask: t must lie in [0, 1]");
    }
    DiffusionState state;
    state.t = t;
    state.tokens.assign(clean.begin(), clean.end());
    state.mask_flags.assign(clean.size(), false);
    for (std::size_t i = 0; i < clean.size(); ++i) {
        if (rng.next_uniform() < t) {
            state.tokens[i]     = mask_token_id;
            state.mask_flags[i] = true;
        }
    }
    return state;
}

double dlm_loss(const model::Weights & weights, const SequenceLayout & layout, const core::Matrix & visual,
                std::span<const TokenId> prompt, std::span<const TokenId> clean_response, double t,
                core::RandomStream & rng) {
    if (!(t > 0.0 && t <= 1.0)) {
        fail(ErrorKind::invalid_argument, "dlm_loss: t must lie in (0, 1]");
    }
    const DiffusionState noisy = forward_mask(clean_response, t, rng, layout.mask_token_id());
    const core::Matrix   input = assemble_embeddings(weights, layout, visual, prompt, noisy.tokens);
    const auto           out   = model::forward(weights, input, layout.position_ids());

    double total = 0.0;
    for (std::size_t i = 0; i < clean_response.size(); ++i) {
        if (!noisy.mask_flags[i]) {
            continue;
        }
        const auto   row  = out.logits.row(layout.response().begin + i);
        const double peak = *std::max_element(row.begin(), row.end());
        double       z    = 0.0;
        for (double v : row) {
            z += std::exp(v - peak);
        }
        total += row[clean_response[i]] - peak - std::log(z);
    }
    return -total / t / static_cast<double>(clean_response.size());
}

}  // namespace marscache::diffusion

#pragma once

#include "core/matrix.hpp"
#include "core/random.hpp"
#include "diffusion/layout.hpp"

#include <vector>

namespace marscache::diffusion {

// Stand-in for projected vision-encoder output. Each row mixes a scene
// vector shared by the whole clip, a per-patch spatial vector shared across
// frames, a slowly drifting per-frame motion vector and i.i.d. noise, so
// nearby frames are more alike than distant ones. Entries have roughly unit
// variance before `scale`.
core::Matrix synthetic_visual_embeddings(const SequenceLayout & layout, std::size_t model_dim, double scale,
                                         core::RandomStream rng);

// Uniform ids in [0, mask_token_id).
std::vector<TokenId> synthetic_prompt(std::size_t length, TokenId mask_token_id, core::RandomStream rng);

}  // namespace marscache::diffusion

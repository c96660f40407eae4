#pragma once

#include "core/index_range.hpp"

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace marscache::model {

using TokenId = std::uint32_t;

enum class MaskMode { causal, bidirectional };

std::string to_string(MaskMode mode);
MaskMode    parse_mask_mode(const std::string & text);

struct ModelConfig {
    std::size_t num_layers = 8;
    std::size_t num_heads  = 4;
    std::size_t model_dim  = 128;
    std::size_t head_dim   = 32;
    std::size_t vocab_size = 256;
    // First layer of each group; must start at 0 and be strictly increasing.
    std::vector<std::size_t> group_boundaries{0, 2, 4, 6};
    MaskMode                 mask_mode = MaskMode::bidirectional;
    double                   rope_base = 10000.0;

    // 8 layers in 4 groups of 2, 4 heads, width 128, vocab 256.
    static ModelConfig toy();

    // Throws Error(config) naming the offending field.
    void validate() const;

    std::size_t     num_groups() const noexcept { return group_boundaries.size(); }
    core::IndexRange group_layers(std::size_t group) const;
    std::size_t     group_of(std::size_t layer) const;
    std::size_t     ffn_dim() const noexcept { return 4 * model_dim; }
    // Highest token id; reserved for [MASK].
    TokenId         mask_token_id() const noexcept { return static_cast<TokenId>(vocab_size - 1); }
};

}  // namespace marscache::model

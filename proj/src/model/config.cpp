#include "model/config.hpp"

#include "core/error.hpp"

namespace marscache::model {

std::string to_string(MaskMode mode) {
    return mode == MaskMode::causal ? "causal" : "bidirectional";
}

MaskMode parse_mask_mode(const std::string & text) {
    if (text == "causal") {
        return MaskMode::causal;
    }
    if (text == "bidirectional") {
        return MaskMode::bidirectional;
    }
    fail(ErrorKind::config, "model.mask_mode: expected 'causal' or 'bidirectional', got '" + text + "'");
}

ModelConfig ModelConfig::toy() {
    return ModelConfig{};
}

void ModelConfig::validate() const {
    auto bad = [](const std::string & field, const std::string & why) { fail(ErrorKind::config, "model." + field + ": " + why); };
    if (num_layers == 0) {
        bad("num_layers", "must be >= 1");
    }
    if (num_heads == 0) {
        bad("num_heads", "must be >= 1");
    }
    if (head_dim == 0 || head_dim % 2 != 0) {
        bad("head_dim", "must be a positive even number (rotary pairs)");
    }
    if (model_dim != num_heads * head_dim) {
        bad("model_dim", "must equal num_heads * head_dim");
    }
    if (vocab_size < 2) {
        bad("vocab_size", "must be >= 2 (one id is reserved for [MASK])");
    }
    if (group_boundaries.empty() || group_boundaries.front() != 0) {
        bad("group_boundaries", "must start at layer 0");
    }
    for (std::size_t g = 1; g < group_boundaries.size(); ++g) {
        if (group_boundaries[g] <= group_boundaries[g - 1]) {
            bad("group_boundaries", "must be strictly increasing (groups are non-empty)");
        }
    }
    if (group_boundaries.back() >= num_layers) {
        bad("group_boundaries", "last group must contain at least one layer");
    }
    if (!(rope_base > 1.0)) {
        bad("rope_base", "must be > 1");
    }
}

core::IndexRange ModelConfig::group_layers(std::size_t group) const {
    if (group >= group_boundaries.size()) {
        fail(ErrorKind::invalid_argument, "group index out of range");
    }
    const std::size_t end = group + 1 < group_boundaries.size() ? group_boundaries[group + 1] : num_layers;
    return {group_boundaries[group], end};
}

std::size_t ModelConfig::group_of(std::size_t layer) const {
    if (layer >= num_layers) {
        fail(ErrorKind::invalid_argument, "layer index out of range");
    }
    std::size_t g = 0;
    while (g + 1 < group_boundaries.size() && group_boundaries[g + 1] <= layer) {
        ++g;
    }
    return g;
}

}  // namespace marscache::model

#pragma once

#include "core/matrix.hpp"

#include <vector>

namespace marscache::analysis {

// Mean Shannon entropy (nats) of the attention rows of one layer, averaged
// over heads.
double attention_entropy(const std::vector<core::Matrix> & head_probs);

// One value per layer, from attention captured as [layer][head].
std::vector<double> attention_entropy(const std::vector<std::vector<core::Matrix>> & per_layer);

}  // namespace marscache::analysis

#pragma once

#include "model/weights.hpp"

#include <string>

namespace marscache::model {

// Binary snapshot layout (all integers u64 and all reals f64, little-endian):
//   magic "MCWSNAP1"
//   config: num_layers num_heads model_dim head_dim vocab_size mask_mode rope_base
//           num_groups group_boundaries[num_groups]
//   tensor_count, then per tensor: name_length name_bytes rows cols offset
//   tensor data, row-major, `offset` counted in f64 elements from data start
void    save_weights(const Weights & weights, const std::string & path);
Weights load_weights(const std::string & path);

}  // namespace marscache::model

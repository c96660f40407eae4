#pragma once

#include "core/matrix.hpp"
#include "model/config.hpp"

#include <cstdint>
#include <vector>

namespace marscache::model {

struct LayerWeights {
    core::Matrix        wq;      // model_dim x model_dim
    core::Matrix        wk;
    core::Matrix        wv;
    core::Matrix        wo;      // residual-path output projection
    core::Matrix        w_up;    // model_dim x ffn_dim
    core::Matrix        w_down;  // ffn_dim x model_dim, residual-path output projection
    std::vector<double> attn_gain;
    std::vector<double> ffn_gain;
};

struct Weights {
    ModelConfig               config;
    core::Matrix              token_embedding;  // vocab_size x model_dim
    std::vector<LayerWeights> layers;
    std::vector<double>       final_gain;
    core::Matrix              output_head;      // model_dim x vocab_size
};

// Gaussian init, std 0.02 except residual-path output projections which use
// 0.02 / sqrt(num_layers). Normalization gains start at 1. Every tensor draws
// from its own named stream, so the result depends only on (config, seed).
Weights init_weights(const ModelConfig & config, std::uint64_t seed);

}  // namespace marscache::model

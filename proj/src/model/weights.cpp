#include "model/weights.hpp"

#include "core/random.hpp"

#include <cmath>
#include <string>

namespace marscache::model {

namespace {

core::Matrix gaussian(core::RandomStream stream, std::size_t rows, std::size_t cols, double stddev) {
    core::Matrix m(rows, cols);
    for (double & v : m.data()) {
        v = stddev * stream.next_gaussian();
    }
    return m;
}

}  // namespace

Weights init_weights(const ModelConfig & config, std::uint64_t seed) {
    config.validate();
    const core::RandomStream root = core::seeded_stream(seed, "weights");
    const double             std_base     = 0.02;
    const double             std_residual = 0.02 / std::sqrt(static_cast<double>(config.num_layers));
    const std::size_t        d            = config.model_dim;

    Weights w;
    w.config          = config;
    w.token_embedding = gaussian(root.child("token_embedding"), config.vocab_size, d, std_base);
    w.output_head     = gaussian(root.child("output_head"), d, config.vocab_size, std_base);
    w.final_gain.assign(d, 1.0);
    w.layers.reserve(config.num_layers);
    for (std::size_t l = 0; l < config.num_layers; ++l) {
        const core::RandomStream s = root.child("layer" + std::to_string(l));
        LayerWeights             lw;
        lw.wq     = gaussian(s.child("wq"), d, d, std_base);
        lw.wk     = gaussian(s.child("wk"), d, d, std_base);
        lw.wv     = gaussian(s.child("wv"), d, d, std_base);
        lw.wo     = gaussian(s.child("wo"), d, d, std_residual);
        lw.w_up   = gaussian(s.child("w_up"), d, config.ffn_dim(), std_base);
        lw.w_down = gaussian(s.child("w_down"), config.ffn_dim(), d, std_residual);
        lw.attn_gain.assign(d, 1.0);
        lw.ffn_gain.assign(d, 1.0);
        w.layers.push_back(std::move(lw));
    }
    return w;
}

}  // namespace marscache::model

#pragma once

#include "diffusion/layout.hpp"
#include "model/config.hpp"
#include "model/transformer.hpp"

#include <cstddef>
#include <span>
#include <vector>

namespace marscache::analysis {

struct ModalityDrift {
    double mean   = 0.0;
    double median = 0.0;
};

// Drift = 1 - cosine similarity of a token's hidden state between two
// steps; always within [0, 2].
struct DriftRecord {
    std::size_t              step_a = 0;
    std::size_t              step_b = 0;
    std::vector<std::size_t> layers;  // indices into LayerActivations::hidden
    ModalityDrift            visual;
    ModalityDrift            text;
    std::vector<double>      per_layer_visual;  // mean per listed layer
    std::vector<double>      per_layer_text;
};

// Outputs of every layer group: hidden-state indices at group ends.
std::vector<std::size_t> group_boundary_layers(const model::ModelConfig & config);

// Prompt positions plus response positions outside the active block.
std::vector<std::size_t> text_context_positions(const diffusion::SequenceLayout & layout, std::size_t active_block);

DriftRecord drift(const model::LayerActivations & a, const model::LayerActivations & b,
                  const diffusion::SequenceLayout & layout, std::span<const std::size_t> layers,
                  std::span<const std::size_t> text_positions);

}  // namespace marscache::analysis

#pragma once

#include "core/index_range.hpp"
#include "core/matrix.hpp"
#include "core/permutation.hpp"
#include "core/random.hpp"
#include "diffusion/layout.hpp"
#include "model/weights.hpp"

#include <cstddef>
#include <span>
#include <vector>

namespace marscache::analysis {

struct Relocation {
    core::Matrix             embeddings;    // rows in the new physical order
    std::vector<std::size_t> position_ids;  // carried with their rows
    core::Permutation        permutation;   // order()[i] = original row now at i
};

// Moves the k visual rows of largest l2 norm (ties: lower index) into one
// contiguous run starting at visual offset min(floor(r * V), V - k). All
// other rows keep their relative order.
Relocation relocate_high_norm(const core::Matrix & embeddings, std::span<const std::size_t> position_ids,
                              core::IndexRange visual, std::size_t k, double r);

struct RelocationRow {
    double r                  = 0.0;
    double max_delta_original = 0.0;  // restored logits vs logits without relocation
    double max_delta_r0       = 0.0;  // restored logits vs logits at r = 0
};

struct RelocationExperiment {
    std::vector<std::size_t>   boosted;  // visual rows scaled by the factor
    std::vector<RelocationRow> rows;
};

// Scales k random visual rows by `factor`, then for every ratio relocates
// the top-k rows, runs a forward pass and maps the logits back to the
// original order.
RelocationExperiment relocation_experiment(const model::Weights & weights, const diffusion::SequenceLayout & layout,
                                           const core::Matrix & visual, std::span<const model::TokenId> prompt,
                                           std::span<const model::TokenId> response, std::size_t k, double factor,
                                           std::span<const double> ratios, core::RandomStream rng);

}  // namespace marscache::analysis

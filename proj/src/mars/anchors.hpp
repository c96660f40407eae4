#pragma once

#include "core/matrix.hpp"
#include "core/permutation.hpp"
#include "diffusion/layout.hpp"

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace marscache::mars {

using diffusion::SequenceLayout;

// s indices spread evenly over [0, length): floor(i * length / s).
std::vector<std::size_t> equidistant_sample(std::size_t length, std::size_t s);

// Softmax(Q[sample] K[visual]^T / sqrt(d_k)) over the visual keys, then every
// entry where a sampled query meets its own position is zeroed. Q and K hold
// one row per sequence position.
core::Matrix proxy_scores(const core::Matrix & q, const core::Matrix & k, std::span<const std::size_t> sample,
                          std::span<const std::size_t> visual);

// Multi-head variant: proxy_scores per head slice, averaged over heads.
core::Matrix proxy_scores_multihead(const core::Matrix & q, const core::Matrix & k, std::size_t num_heads,
                                    std::span<const std::size_t> sample, std::span<const std::size_t> visual);

// Column sums of the debiased proxy restricted to each frame, top-k per frame
// (lowest index wins ties). Columns of `debiased` follow the visual segment.
std::vector<std::vector<std::size_t>> select_frame_anchors(const core::Matrix & debiased, const SequenceLayout & layout,
                                                           std::size_t budget);

struct GroupAnchors {
    std::optional<std::size_t>            budget;  // nullopt: full attention in this group
    std::vector<std::vector<std::size_t>> per_frame;
    std::vector<std::size_t>              all;     // union over frames, ascending
};

// Computed once at the first decoding step and reused for the whole decode.
struct AnchorPlan {
    std::vector<std::size_t>  sample;
    std::vector<GroupAnchors> groups;

    std::uint64_t digest() const;
};

// Builds the plan from one debiased proxy matrix per group (ignored for
// groups with no budget).
AnchorPlan select_anchors(std::span<const core::Matrix> debiased_per_group, const SequenceLayout & layout,
                          std::span<const std::optional<std::size_t>> budgets, std::vector<std::size_t> sample);

// Moves each frame's anchors (frame order, then index order) to the front of
// the visual segment; everything else keeps its relative order. Position ids
// travel with the rows.
core::Permutation relocate_anchors(const SequenceLayout & layout, const std::vector<std::size_t> & anchors);

}  // namespace marscache::mars

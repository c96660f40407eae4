#pragma once

#include "core/matrix.hpp"
#include "diffusion/layout.hpp"
#include "model/transformer.hpp"

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

namespace marscache::mars {

using diffusion::SequenceLayout;

// Positions of frames n-1, n, n+1 (0-based n), clipped at the ends.
std::vector<std::size_t> neighborhood(const SequenceLayout & layout, std::size_t frame);

struct VisibilityOptions {
    // Let non-anchor visual queries also see prompt/response keys.
    bool text_keys_for_chunked = false;
};

// Plan for the batch `rows` (absolute positions). Non-visual rows and anchor
// rows see every key. A non-anchor visual row in frame n sees
// neighborhood(n) plus all anchors. `anchors == nullopt` means full attention
// for every row; an empty anchor list is pure frame-wise chunking.
model::AttentionPlan anchor_augmented_plan(const SequenceLayout & layout, std::span<const std::size_t> rows,
                                           const std::optional<std::vector<std::size_t>> & anchors,
                                           const VisibilityOptions & options = {});

// Single-head frame-wise chunk attention. Q rows are the visual positions in
// order; K and V cover the whole sequence. Returns one row per visual query.
core::Matrix chunk_attention(const core::Matrix & q, const core::Matrix & k, const core::Matrix & v,
                             const SequenceLayout & layout);

// Single-head attention over the whole sequence (Q, K, V all full length)
// under the anchor visibility rule.
core::Matrix anchor_augmented_attention(const core::Matrix & q, const core::Matrix & k, const core::Matrix & v,
                                        const SequenceLayout & layout, const std::vector<std::size_t> & anchors,
                                        const VisibilityOptions & options = {});

}  // namespace marscache::mars

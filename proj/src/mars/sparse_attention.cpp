#include "mars/sparse_attention.hpp"

#include "core/error.hpp"

#include <algorithm>
#include <map>

namespace marscache::mars {

std::vector<std::size_t> neighborhood(const SequenceLayout & layout, std::size_t frame) {
    const std::size_t n_frames = layout.num_frames();
    if (frame >= n_frames) {
        fail(ErrorKind::invalid_argument, "frame index out of range");
    }
    const std::size_t first = frame == 0 ? 0 : frame - 1;
    const std::size_t last  = std::min(frame + 1, n_frames - 1);
    std::vector<std::size_t> out;
    for (std::size_t n = first; n <= last; ++n) {
        const auto r = layout.frames()[n];
        for (std::size_t p = r.begin; p < r.end; ++p) {
            out.push_back(p);
        }
    }
    return out;
}

model::AttentionPlan anchor_augmented_plan(const SequenceLayout & layout, std::span<const std::size_t> rows,
                                           const std::optional<std::vector<std::size_t>> & anchors,
                                           const VisibilityOptions & options) {
    std::vector<bool> is_anchor(layout.length(), false);
    if (anchors) {
        for (std::size_t a : *anchors) {
            if (!layout.visual().contains(a)) {
                fail(ErrorKind::invalid_argument, "anchor " + std::to_string(a) + " is not a visual position");
            }
            is_anchor[a] = true;
        }
    }

    model::QueryGroup                        global;
    global.all_keys = true;
    std::map<std::size_t, model::QueryGroup> chunked;  // by frame
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const std::size_t pos = rows[i];
        if (pos >= layout.length()) {
            fail(ErrorKind::invalid_argument, "row outside the sequence");
        }
        if (!anchors || !layout.visual().contains(pos) || is_anchor[pos]) {
            global.queries.push_back(i);
        } else {
            chunked[layout.frame_of(pos)].queries.push_back(i);
        }
    }

    model::AttentionPlan plan;
    if (!global.queries.empty()) {
        plan.push_back(std::move(global));
    }
    for (auto & [frame, group] : chunked) {
        std::vector<std::size_t> keys = neighborhood(layout, frame);
        keys.insert(keys.end(), anchors->begin(), anchors->end());
        if (options.text_keys_for_chunked) {
            for (std::size_t p = layout.visual().end; p < layout.length(); ++p) {
                keys.push_back(p);
            }
        }
        std::sort(keys.begin(), keys.end());
        keys.erase(std::unique(keys.begin(), keys.end()), keys.end());
        group.keys = std::move(keys);
        plan.push_back(std::move(group));
    }
    return plan;
}

core::Matrix chunk_attention(const core::Matrix & q, const core::Matrix & k, const core::Matrix & v,
                             const SequenceLayout & layout) {
    if (q.rows() != layout.visual().size()) {
        fail(ErrorKind::invalid_argument, "chunk_attention: one query row per visual position required");
    }
    if (k.rows() != layout.length() || v.rows() != layout.length()) {
        fail(ErrorKind::invalid_argument, "chunk_attention: K and V must cover the whole sequence");
    }
    const auto rows = layout.visual().indices();
    return model::planned_attention(q, k, v, anchor_augmented_plan(layout, rows, std::vector<std::size_t>{}));
}

core::Matrix anchor_augmented_attention(const core::Matrix & q, const core::Matrix & k, const core::Matrix & v,
                                        const SequenceLayout & layout, const std::vector<std::size_t> & anchors,
                                        const VisibilityOptions & options) {
    if (q.rows() != layout.length() || k.rows() != layout.length() || v.rows() != layout.length()) {
        fail(ErrorKind::invalid_argument, "anchor_augmented_attention: Q, K and V must cover the whole sequence");
    }
    const std::vector<std::size_t> rows = core::IndexRange{0, layout.length()}.indices();
    return model::planned_attention(q, k, v, anchor_augmented_plan(layout, rows, anchors, options));
}

}  // namespace marscache::mars

#include "diffusion/layout.hpp"

#include "core/error.hpp"
#include "model/transformer.hpp"

#include <algorithm>
#include <numeric>

namespace marscache::diffusion {

SequenceLayout::SequenceLayout(std::size_t num_frames, std::size_t patches_per_frame, std::size_t prompt_length,
                               std::size_t generation_length, std::size_t block_length, TokenId mask_token_id) :
    patches_per_frame_(patches_per_frame),
    block_length_(block_length),
    mask_token_id_(mask_token_id) {
    if (num_frames == 0) {
        fail(ErrorKind::config, "layout.frames: must be >= 1");
    }
    if (patches_per_frame == 0) {
        fail(ErrorKind::config, "layout.patches_per_frame: must be >= 1");
    }
    if (generation_length == 0) {
        fail(ErrorKind::config, "layout.generation_length: must be >= 1");
    }
    if (block_length == 0) {
        fail(ErrorKind::config, "decode.block_length: must be >= 1");
    }
    visual_   = {0, num_frames * patches_per_frame};
    prompt_   = {visual_.end, visual_.end + prompt_length};
    response_ = {prompt_.end, prompt_.end + generation_length};
    for (std::size_t n = 0; n < num_frames; ++n) {
        frames_.push_back({n * patches_per_frame, (n + 1) * patches_per_frame});
    }
    for (std::size_t b = response_.begin; b < response_.end; b += block_length) {
        blocks_.push_back({b, std::min(b + block_length, response_.end)});
    }
    position_ids_.resize(length());
    std::iota(position_ids_.begin(), position_ids_.end(), std::size_t{0});
}

std::size_t SequenceLayout::frame_of(std::size_t pos) const {
    if (!visual_.contains(pos)) {
        fail(ErrorKind::invalid_argument, "position " + std::to_string(pos) + " is not visual");
    }
    return pos / patches_per_frame_;
}

Segment SequenceLayout::segment_of(std::size_t pos) const {
    if (visual_.contains(pos)) {
        return Segment::visual;
    }
    if (prompt_.contains(pos)) {
        return Segment::prompt;
    }
    if (response_.contains(pos)) {
        return Segment::response;
    }
    fail(ErrorKind::invalid_argument, "position " + std::to_string(pos) + " outside the sequence");
}

core::Matrix assemble_embeddings(const model::Weights & weights, const SequenceLayout & layout,
                                 const core::Matrix & visual, std::span<const TokenId> prompt,
                                 std::span<const TokenId> response) {
    if (visual.rows() != layout.visual().size() || visual.cols() != weights.config.model_dim) {
        fail(ErrorKind::invalid_argument, "visual embeddings do not match layout/model width");
    }
    if (prompt.size() != layout.prompt().size() || response.size() != layout.response().size()) {
        fail(ErrorKind::invalid_argument, "prompt/response lengths do not match layout");
    }
    std::vector<TokenId> text(prompt.begin(), prompt.end());
    text.insert(text.end(), response.begin(), response.end());
    const core::Matrix text_rows = model::embed_tokens(weights, text);

    core::Matrix out(layout.length(), weights.config.model_dim);
    std::copy(visual.data().begin(), visual.data().end(), out.data().begin());
    std::copy(text_rows.data().begin(), text_rows.data().end(),
              out.data().begin() + static_cast<std::ptrdiff_t>(visual.data().size()));
    return out;
}

}  // namespace marscache::diffusion

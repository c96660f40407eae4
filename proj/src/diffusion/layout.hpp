#pragma once

#include "core/index_range.hpp"
#include "core/matrix.hpp"
#include "model/config.hpp"
#include "model/weights.hpp"

#include <cstddef>
#include <span>
#include <vector>

namespace marscache::diffusion {

using core::IndexRange;
using model::TokenId;

enum class Segment { visual, prompt, response };

// Token axis: [frame 0 | frame 1 | ... | prompt | response block 0 | block 1 | ...].
// Frames all hold patches_per_frame tokens; response blocks hold block_length
// tokens except possibly the last.
class SequenceLayout {
  public:
    SequenceLayout(std::size_t num_frames, std::size_t patches_per_frame, std::size_t prompt_length,
                   std::size_t generation_length, std::size_t block_length, TokenId mask_token_id);

    std::size_t length() const noexcept { return response_.end; }
    std::size_t num_frames() const noexcept { return frames_.size(); }
    std::size_t patches_per_frame() const noexcept { return patches_per_frame_; }
    std::size_t block_length() const noexcept { return block_length_; }
    TokenId     mask_token_id() const noexcept { return mask_token_id_; }

    IndexRange visual() const noexcept { return visual_; }
    IndexRange prompt() const noexcept { return prompt_; }
    IndexRange response() const noexcept { return response_; }

    const std::vector<IndexRange> & frames() const noexcept { return frames_; }
    // Absolute positions of each response block.
    const std::vector<IndexRange> & blocks() const noexcept { return blocks_; }

    // Frame holding visual position `pos`.
    std::size_t frame_of(std::size_t pos) const;
    Segment     segment_of(std::size_t pos) const;

    const std::vector<std::size_t> & position_ids() const noexcept { return position_ids_; }

  private:
    std::size_t              patches_per_frame_;
    std::size_t              block_length_;
    TokenId                  mask_token_id_;
    IndexRange               visual_;
    IndexRange               prompt_;
    IndexRange               response_;
    std::vector<IndexRange>  frames_;
    std::vector<IndexRange>  blocks_;
    std::vector<std::size_t> position_ids_;
};

// Input rows for the whole sequence: visual embeddings as given, then the
// token embeddings of prompt and response.
core::Matrix assemble_embeddings(const model::Weights & weights, const SequenceLayout & layout,
                                 const core::Matrix & visual, std::span<const TokenId> prompt,
                                 std::span<const TokenId> response);

}  // namespace marscache::diffusion

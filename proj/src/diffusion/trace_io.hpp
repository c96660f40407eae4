#pragma once

#include "diffusion/decode.hpp"

#include <iosfwd>

namespace marscache::diffusion {

// Line-delimited JSON. Line 1 is a header
//   {"schema":"marscache.trace","version":1,"engine":...,"clock":"global","groups":G}
// followed by one object per step with keys step, block, block_step,
// committed ([[position, token], ...], response-relative), refresh_text,
// refresh_visual (0/1 per group), full_recompute, score_entries,
// rows_recomputed, anchor_digest (16 hex digits) and elapsed_ns.
void        write_trace(const DecodeTrace & trace, std::ostream & out);
DecodeTrace read_trace(std::istream & in);

}  // namespace marscache::diffusion

#pragma once

#include <cstddef>
#include <vector>

namespace marscache::analysis {

// Under a causal mask, token j (1-based) is visible to T - j + 1 queries.
// Element j-1 of the result holds that count.
std::vector<std::size_t> visibility_frequency(std::size_t length);

}  // namespace marscache::analysis

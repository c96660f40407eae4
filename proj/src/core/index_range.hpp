#pragma once

#include <cstddef>
#include <numeric>
#include <vector>

namespace marscache::core {

// Half-open [begin, end) range over the token axis.
struct IndexRange {
    std::size_t begin = 0;
    std::size_t end   = 0;

    std::size_t size() const noexcept { return end - begin; }
    bool        empty() const noexcept { return end == begin; }
    bool        contains(std::size_t i) const noexcept { return i >= begin && i < end; }

    std::vector<std::size_t> indices() const {
        std::vector<std::size_t> out(size());
        std::iota(out.begin(), out.end(), begin);
        return out;
    }

    friend bool operator==(const IndexRange &, const IndexRange &) = default;
};

}  // namespace marscache::core

#include "analysis/visibility.hpp"

#include "core/error.hpp"

namespace marscache::analysis {

std::vector<std::size_t> visibility_frequency(std::size_t length) {
    if (length == 0) {
        fail(ErrorKind::invalid_argument, "visibility_frequency: length must be >= 1");
    }
    std::vector<std::size_t> out(length);
    for (std::size_t j = 1; j <= length; ++j) {
        out[j - 1] = length - j + 1;
    }
    return out;
}

}  // namespace marscache::analysis

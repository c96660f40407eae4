#pragma once

#include "core/matrix.hpp"
#include "model/config.hpp"

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

namespace marscache::diffusion {

using model::TokenId;

struct Commit {
    std::size_t position;  // as given by the caller
    TokenId     token;
    double      confidence;

    friend bool operator==(const Commit &, const Commit &) = default;
};

struct UnmaskRule {
    enum class Mode { count, threshold };
    Mode        mode      = Mode::count;
    std::size_t count     = 1;
    double      threshold = 0.9;

    static UnmaskRule top(std::size_t n) { return {Mode::count, n, 0.0}; }
    static UnmaskRule above(double c) { return {Mode::threshold, 0, c}; }
};

// Row i of `probabilities` is the vocabulary distribution at positions[i].
// Confidence is the max probability (ignoring `excluded`), the committed token
// its argmax. Count mode keeps the n most confident positions; threshold mode
// keeps every position at or above the threshold, or the single best if none
// qualifies. Ties go to the lower position (and lower token id). Output is
// sorted by position.
std::vector<Commit> select_unmask(const core::Matrix & probabilities, std::span<const std::size_t> positions,
                                  const UnmaskRule & rule, std::optional<TokenId> excluded = std::nullopt);

}  // namespace marscache::diffusion

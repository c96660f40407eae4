#pragma once

#include "core/matrix.hpp"

#include <limits>
#include <optional>
#include <span>

namespace marscache::core {

inline constexpr double kMasked = -std::numeric_limits<double>::infinity();

// Row-wise softmax of scores + additive_mask. Mask entries must be 0 or kMasked.
// Masked positions come out exactly zero. Throws "fully masked row" when a row
// has no admissible entry.
Matrix softmax_rows(const Matrix & scores, const std::optional<Matrix> & additive_mask = std::nullopt);

// Throws "degenerate vector" when either input has zero norm.
double cosine_similarity(std::span<const double> u, std::span<const double> v);

double l2_norm(std::span<const double> v) noexcept;

}  // namespace marscache::core

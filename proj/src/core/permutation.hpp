#pragma once

#include "core/matrix.hpp"

#include <cstddef>
#include <vector>

namespace marscache::core {

// order[i] is the original index placed at new position i.
class Permutation {
  public:
    Permutation() = default;
    explicit Permutation(std::vector<std::size_t> order);

    static Permutation identity(std::size_t n);

    std::size_t size() const noexcept { return order_.size(); }
    bool        is_identity() const noexcept;

    const std::vector<std::size_t> & order() const noexcept { return order_; }
    const std::vector<std::size_t> & inverse() const noexcept { return inverse_; }

    Matrix                   apply_rows(const Matrix & m) const;
    Matrix                   restore_rows(const Matrix & m) const;
    std::vector<std::size_t> apply(const std::vector<std::size_t> & values) const;

  private:
    std::vector<std::size_t> order_;
    std::vector<std::size_t> inverse_;
};

}  // namespace marscache::core

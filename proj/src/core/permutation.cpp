#include "core/permutation.hpp"

#include "core/error.hpp"

#include <numeric>

namespace marscache::core {

Permutation::Permutation(std::vector<std::size_t> order) : order_(std::move(order)), inverse_(order_.size(), order_.size()) {
    for (std::size_t i = 0; i < order_.size(); ++i) {
        if (order_[i] >= order_.size() || inverse_[order_[i]] != order_.size()) {
            fail(ErrorKind::invalid_argument, "not a permutation");
        }
        inverse_[order_[i]] = i;
    }
}

Permutation Permutation::identity(std::size_t n) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    return Permutation(std::move(order));
}

bool Permutation::is_identity() const noexcept {
    for (std::size_t i = 0; i < order_.size(); ++i) {
        if (order_[i] != i) {
            return false;
        }
    }
    return true;
}

Matrix Permutation::apply_rows(const Matrix & m) const {
    if (m.rows() != size()) {
        fail(ErrorKind::invalid_argument, "permutation size does not match rows");
    }
    return m.gather_rows(order_);
}

Matrix Permutation::restore_rows(const Matrix & m) const {
    if (m.rows() != size()) {
        fail(ErrorKind::invalid_argument, "permutation size does not match rows");
    }
    return m.gather_rows(inverse_);
}

std::vector<std::size_t> Permutation::apply(const std::vector<std::size_t> & values) const {
    if (values.size() != size()) {
        fail(ErrorKind::invalid_argument, "permutation size does not match values");
    }
    std::vector<std::size_t> out(values.size());
    for (std::size_t i = 0; i < order_.size(); ++i) {
        out[i] = values[order_[i]];
    }
    return out;
}

}  // namespace marscache::core

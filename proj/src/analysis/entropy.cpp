#include "analysis/entropy.hpp"

#include "core/error.hpp"

#include <cmath>

namespace marscache::analysis {

double attention_entropy(const std::vector<core::Matrix> & head_probs) {
    double      total = 0.0;
    std::size_t rows  = 0;
    for (const auto & m : head_probs) {
        for (std::size_t r = 0; r < m.rows(); ++r) {
            double h = 0.0;
            for (double p : m.row(r)) {
                if (p > 0.0) {
                    h -= p * std::log(p);
                }
            }
            total += h;
            ++rows;
        }
    }
    if (rows == 0) {
        fail(ErrorKind::invalid_argument, "attention_entropy: no attention rows");
    }
    return total / static_cast<double>(rows);
}

std::vector<double> attention_entropy(const std::vector<std::vector<core::Matrix>> & per_layer) {
    std::vector<double> out;
    out.reserve(per_layer.size());
    for (const auto & layer : per_layer) {
        out.push_back(attention_entropy(layer));
    }
    return out;
}

}  // namespace marscache::analysis

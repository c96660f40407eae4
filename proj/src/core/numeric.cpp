#include "core/numeric.hpp"

#include "core/error.hpp"

#include <algorithm>
#include <cmath>

namespace marscache::core {

Matrix softmax_rows(const Matrix & scores, const std::optional<Matrix> & additive_mask) {
    if (additive_mask && (additive_mask->rows() != scores.rows() || additive_mask->cols() != scores.cols())) {
        fail(ErrorKind::invalid_argument, "mask shape does not match scores");
    }
    Matrix out(scores.rows(), scores.cols());
    for (std::size_t r = 0; r < scores.rows(); ++r) {
        auto in  = scores.row(r);
        auto dst = out.row(r);
        double peak = kMasked;
        for (std::size_t c = 0; c < in.size(); ++c) {
            double m = 0.0;
            if (additive_mask) {
                m = (*additive_mask)(r, c);
                if (m != 0.0 && m != kMasked) {
                    fail(ErrorKind::invalid_argument, "mask entries must be 0 or -inf");
                }
            }
            dst[c] = in[c] + m;
            peak   = std::max(peak, dst[c]);
        }
        if (peak == kMasked) {
            fail(ErrorKind::numeric, "fully masked row");
        }
        double total = 0.0;
        for (double & v : dst) {
            v = std::exp(v - peak);
            total += v;
        }
        for (double & v : dst) {
            v /= total;
        }
    }
    return out;
}

double l2_norm(std::span<const double> v) noexcept {
    double s = 0.0;
    for (double x : v) {
        s += x * x;
    }
    return std::sqrt(s);
}

double cosine_similarity(std::span<const double> u, std::span<const double> v) {
    if (u.size() != v.size()) {
        fail(ErrorKind::invalid_argument, "cosine_similarity length mismatch");
    }
    const double nu = l2_norm(u);
    const double nv = l2_norm(v);
    if (nu == 0.0 || nv == 0.0) {
        fail(ErrorKind::numeric, "degenerate vector");
    }
    double dot = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) {
        dot += u[i] * v[i];
    }
    return std::clamp(dot / (nu * nv), -1.0, 1.0);
}

}  // namespace marscache::core

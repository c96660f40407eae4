#include "mars/anchors.hpp"

#include "core/error.hpp"
#include "core/numeric.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace marscache::mars {

std::vector<std::size_t> equidistant_sample(std::size_t length, std::size_t s) {
    if (s == 0 || length == 0) {
        fail(ErrorKind::invalid_argument, "proxy sample set must be non-empty");
    }
    s = std::min(s, length);
    std::vector<std::size_t> out(s);
    for (std::size_t i = 0; i < s; ++i) {
        out[i] = i * length / s;
    }
    return out;
}

core::Matrix proxy_scores(const core::Matrix & q, const core::Matrix & k, std::span<const std::size_t> sample,
                          std::span<const std::size_t> visual) {
    if (sample.empty()) {
        fail(ErrorKind::invalid_argument, "proxy_scores: empty sample set");
    }
    if (visual.empty()) {
        fail(ErrorKind::invalid_argument, "proxy_scores: no visual keys");
    }
    if (q.cols() != k.cols()) {
        fail(ErrorKind::invalid_argument, "proxy_scores: Q and K widths differ");
    }
    core::Matrix scores = core::matmul_transposed(q.gather_rows(sample), k.gather_rows(visual));
    const double scale  = 1.0 / std::sqrt(static_cast<double>(q.cols()));
    for (double & s : scores.data()) {
        s *= scale;
    }
    core::Matrix probs = core::softmax_rows(scores);
    for (std::size_t i = 0; i < sample.size(); ++i) {
        for (std::size_t j = 0; j < visual.size(); ++j) {
            if (sample[i] == visual[j]) {
                probs(i, j) = 0.0;
            }
        }
    }
    return probs;
}

core::Matrix proxy_scores_multihead(const core::Matrix & q, const core::Matrix & k, std::size_t num_heads,
                                    std::span<const std::size_t> sample, std::span<const std::size_t> visual) {
    if (num_heads == 0 || q.cols() % num_heads != 0) {
        fail(ErrorKind::invalid_argument, "proxy_scores: width not divisible by head count");
    }
    const std::size_t head_dim = q.cols() / num_heads;
    core::Matrix      total(sample.size(), visual.size());
    for (std::size_t h = 0; h < num_heads; ++h) {
        const core::Matrix p = proxy_scores(q.columns(h * head_dim, head_dim), k.columns(h * head_dim, head_dim),
                                            sample, visual);
        for (std::size_t i = 0; i < total.data().size(); ++i) {
            total.data()[i] += p.data()[i];
        }
    }
    for (double & v : total.data()) {
        v /= static_cast<double>(num_heads);
    }
    return total;
}

std::vector<std::vector<std::size_t>> select_frame_anchors(const core::Matrix & debiased, const SequenceLayout & layout,
                                                           std::size_t budget) {
    if (budget > layout.patches_per_frame()) {
        fail(ErrorKind::invalid_argument, "anchor budget " + std::to_string(budget) + " exceeds frame size " +
                                              std::to_string(layout.patches_per_frame()));
    }
    if (debiased.cols() != layout.visual().size()) {
        fail(ErrorKind::invalid_argument, "proxy matrix needs one column per visual token");
    }
    std::vector<std::vector<std::size_t>> out;
    for (const auto & frame : layout.frames()) {
        std::vector<double> importance(frame.size(), 0.0);
        for (std::size_t i = 0; i < debiased.rows(); ++i) {
            for (std::size_t j = 0; j < frame.size(); ++j) {
                importance[j] += debiased(i, frame.begin - layout.visual().begin + j);
            }
        }
        std::vector<std::size_t> order(frame.size());
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::stable_sort(order.begin(), order.end(),
                         [&](std::size_t a, std::size_t b) { return importance[a] > importance[b]; });
        std::vector<std::size_t> chosen;
        for (std::size_t j = 0; j < budget; ++j) {
            chosen.push_back(frame.begin + order[j]);
        }
        std::sort(chosen.begin(), chosen.end());
        out.push_back(std::move(chosen));
    }
    return out;
}

std::uint64_t AnchorPlan::digest() const {
    std::uint64_t h   = 0xcbf29ce484222325ULL;
    auto          mix = [&](std::uint64_t v) {
        for (int i = 0; i < 8; ++i) {
            h ^= (v >> (8 * i)) & 0xff;
            h *= 0x100000001b3ULL;
        }
    };
    mix(sample.size());
    for (std::size_t s : sample) {
        mix(s);
    }
    for (const auto & g : groups) {
        mix(g.budget ? *g.budget : ~std::uint64_t{0});
        mix(g.all.size());
        for (std::size_t a : g.all) {
            mix(a);
        }
    }
    return h;
}

AnchorPlan select_anchors(std::span<const core::Matrix> debiased_per_group, const SequenceLayout & layout,
                          std::span<const std::optional<std::size_t>> budgets, std::vector<std::size_t> sample) {
    if (debiased_per_group.size() != budgets.size()) {
        fail(ErrorKind::invalid_argument, "select_anchors: one proxy matrix per group required");
    }
    AnchorPlan plan;
    plan.sample = std::move(sample);
    for (std::size_t g = 0; g < budgets.size(); ++g) {
        GroupAnchors ga;
        ga.budget = budgets[g];
        if (ga.budget) {
            ga.per_frame = select_frame_anchors(debiased_per_group[g], layout, *ga.budget);
            for (const auto & f : ga.per_frame) {
                ga.all.insert(ga.all.end(), f.begin(), f.end());
            }
            std::sort(ga.all.begin(), ga.all.end());
        }
        plan.groups.push_back(std::move(ga));
    }
    return plan;
}

core::Permutation relocate_anchors(const SequenceLayout & layout, const std::vector<std::size_t> & anchors) {
    std::vector<bool> is_anchor(layout.length(), false);
    for (std::size_t a : anchors) {
        if (!layout.visual().contains(a)) {
            fail(ErrorKind::invalid_argument, "anchor " + std::to_string(a) + " is not a visual position");
        }
        is_anchor[a] = true;
    }
    std::vector<std::size_t> order;
    order.reserve(layout.length());
    for (const auto & frame : layout.frames()) {
        for (std::size_t p = frame.begin; p < frame.end; ++p) {
            if (is_anchor[p]) {
                order.push_back(p);
            }
        }
    }
    for (std::size_t p = layout.visual().begin; p < layout.visual().end; ++p) {
        if (!is_anchor[p]) {
            order.push_back(p);
        }
    }
    for (std::size_t p = layout.visual().end; p < layout.length(); ++p) {
        order.push_back(p);
    }
    return core::Permutation(std::move(order));
}

}  // namespace marscache::mars

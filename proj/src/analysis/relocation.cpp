#include "analysis/relocation.hpp"

#include "core/error.hpp"
#include "core/numeric.hpp"
#include "model/transformer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace marscache::analysis {

Relocation relocate_high_norm(const core::Matrix & embeddings, std::span<const std::size_t> position_ids,
                              core::IndexRange visual, std::size_t k, double r) {
    if (!(r >= 0.0 && r <= 1.0)) {
        fail(ErrorKind::invalid_argument, "relocate_high_norm: r must lie in [0, 1]");
    }
    if (position_ids.size() != embeddings.rows() || visual.end > embeddings.rows() || visual.begin > visual.end) {
        fail(ErrorKind::invalid_argument, "relocate_high_norm: shapes do not match");
    }
    const std::size_t V = visual.size();
    if (k > V) {
        fail(ErrorKind::invalid_argument, "relocate_high_norm: k exceeds the number of visual tokens");
    }

    std::vector<std::size_t> order(embeddings.rows());
    std::iota(order.begin(), order.end(), 0);
    if (k > 0) {
        std::vector<std::size_t> by_norm = visual.indices();
        std::vector<double>      norms(embeddings.rows(), 0.0);
        for (std::size_t p : by_norm) {
            norms[p] = core::l2_norm(embeddings.row(p));
        }
        std::stable_sort(by_norm.begin(), by_norm.end(),
                         [&](std::size_t a, std::size_t b) { return norms[a] > norms[b]; });
        std::vector<std::size_t> top(by_norm.begin(), by_norm.begin() + static_cast<std::ptrdiff_t>(k));
        std::sort(top.begin(), top.end());

        std::vector<std::size_t> rest;
        for (std::size_t p = visual.begin; p < visual.end; ++p) {
            if (!std::binary_search(top.begin(), top.end(), p)) {
                rest.push_back(p);
            }
        }
        const std::size_t start = std::min(static_cast<std::size_t>(std::floor(r * static_cast<double>(V))), V - k);
        std::vector<std::size_t> seg(rest.begin(), rest.begin() + static_cast<std::ptrdiff_t>(start));
        seg.insert(seg.end(), top.begin(), top.end());
        seg.insert(seg.end(), rest.begin() + static_cast<std::ptrdiff_t>(start), rest.end());
        std::copy(seg.begin(), seg.end(), order.begin() + static_cast<std::ptrdiff_t>(visual.begin));
    }

    core::Permutation perm(order);
    Relocation        out{perm.apply_rows(embeddings), {}, perm};
    out.position_ids = perm.apply(std::vector<std::size_t>(position_ids.begin(), position_ids.end()));
    return out;
}

RelocationExperiment relocation_experiment(const model::Weights & weights, const diffusion::SequenceLayout & layout,
                                           const core::Matrix & visual, std::span<const model::TokenId> prompt,
                                           std::span<const model::TokenId> response, std::size_t k, double factor,
                                           std::span<const double> ratios, core::RandomStream rng) {
    const std::size_t V = layout.visual().size();
    if (k > V) {
        fail(ErrorKind::invalid_argument, "relocation_experiment: k exceeds the number of visual tokens");
    }
    if (!(factor > 0.0)) {
        fail(ErrorKind::invalid_argument, "relocation_experiment: factor must be positive");
    }

    // Partial Fisher-Yates over visual rows picks the boosted set.
    std::vector<std::size_t> pool(V);
    std::iota(pool.begin(), pool.end(), 0);
    for (std::size_t i = 0; i < k; ++i) {
        const std::size_t j = i + static_cast<std::size_t>(rng.next_below(V - i));
        std::swap(pool[i], pool[j]);
    }
    RelocationExperiment exp;
    exp.boosted.assign(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(k));
    std::sort(exp.boosted.begin(), exp.boosted.end());

    core::Matrix boosted_visual = visual;
    for (std::size_t i : exp.boosted) {
        for (double & x : boosted_visual.row(i)) {
            x *= factor;
        }
    }
    const core::Matrix input = diffusion::assemble_embeddings(weights, layout, boosted_visual, prompt, response);
    const auto &       pos   = layout.position_ids();
    const core::Matrix base  = model::forward(weights, input, pos).logits;

    std::vector<core::Matrix> restored;
    for (double r : ratios) {
        const Relocation rel = relocate_high_norm(input, pos, layout.visual(), k, r);
        const auto       fwd = model::forward(weights, rel.embeddings, rel.position_ids);
        restored.push_back(rel.permutation.restore_rows(fwd.logits));
    }
    const core::Matrix r0 = [&] {
        const Relocation rel = relocate_high_norm(input, pos, layout.visual(), k, 0.0);
        return rel.permutation.restore_rows(model::forward(weights, rel.embeddings, rel.position_ids).logits);
    }();
    for (std::size_t i = 0; i < ratios.size(); ++i) {
        exp.rows.push_back({ratios[i], core::max_abs_diff(restored[i], base), core::max_abs_diff(restored[i], r0)});
    }
    return exp;
}

}  // namespace marscache::analysis

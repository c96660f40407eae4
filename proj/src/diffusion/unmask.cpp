#include "diffusion/unmask.hpp"

#include "core/error.hpp"

#include <algorithm>

namespace marscache::diffusion {

std::vector<Commit> select_unmask(const core::Matrix & probabilities, std::span<const std::size_t> positions,
                                  const UnmaskRule & rule, std::optional<TokenId> excluded) {
    if (probabilities.rows() != positions.size()) {
        fail(ErrorKind::invalid_argument, "select_unmask: one probability row per position required");
    }
    if (positions.empty()) {
        fail(ErrorKind::invalid_argument, "select_unmask: no masked positions");
    }
    std::vector<Commit> candidates;
    candidates.reserve(positions.size());
    for (std::size_t i = 0; i < positions.size(); ++i) {
        auto    row  = probabilities.row(i);
        TokenId best = 0;
        double  conf = -1.0;
        for (std::size_t v = 0; v < row.size(); ++v) {
            if (excluded && v == *excluded) {
                continue;
            }
            if (row[v] > conf) {
                conf = row[v];
                best = static_cast<TokenId>(v);
            }
        }
        candidates.push_back({positions[i], best, conf});
    }
    std::stable_sort(candidates.begin(), candidates.end(), [](const Commit & a, const Commit & b) {
        if (a.confidence != b.confidence) {
            return a.confidence > b.confidence;
        }
        return a.position < b.position;
    });

    std::size_t keep = 0;
    if (rule.mode == UnmaskRule::Mode::count) {
        keep = std::min(std::max<std::size_t>(rule.count, 1), candidates.size());
    } else {
        while (keep < candidates.size() && candidates[keep].confidence >= rule.threshold) {
            ++keep;
        }
        keep = std::max<std::size_t>(keep, 1);
    }
    candidates.resize(keep);
    std::sort(candidates.begin(), candidates.end(),
              [](const Commit & a, const Commit & b) { return a.position < b.position; });
    return candidates;
}

}  // namespace marscache::diffusion

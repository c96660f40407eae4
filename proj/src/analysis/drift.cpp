#include "analysis/drift.hpp"

#include "core/error.hpp"
#include "core/numeric.hpp"

#include <algorithm>
#include <numeric>

namespace marscache::analysis {

namespace {

ModalityDrift summarize(std::vector<double> values) {
    if (values.empty()) {
        return {};
    }
    ModalityDrift d;
    d.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
    std::sort(values.begin(), values.end());
    const std::size_t n = values.size();
    d.median            = n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
    return d;
}

}  // namespace

std::vector<std::size_t> group_boundary_layers(const model::ModelConfig & config) {
    std::vector<std::size_t> out;
    for (std::size_t g = 0; g < config.num_groups(); ++g) {
        out.push_back(config.group_layers(g).end);
    }
    return out;
}

std::vector<std::size_t> text_context_positions(const diffusion::SequenceLayout & layout, std::size_t active_block) {
    const auto               block = layout.blocks().at(active_block);
    std::vector<std::size_t> out;
    for (std::size_t p = layout.prompt().begin; p < layout.length(); ++p) {
        if (!block.contains(p)) {
            out.push_back(p);
        }
    }
    return out;
}

DriftRecord drift(const model::LayerActivations & a, const model::LayerActivations & b,
                  const diffusion::SequenceLayout & layout, std::span<const std::size_t> layers,
                  std::span<const std::size_t> text_positions) {
    if (a.hidden.size() != b.hidden.size()) {
        fail(ErrorKind::invalid_argument, "drift: activations have different depths");
    }
    DriftRecord rec;
    rec.layers.assign(layers.begin(), layers.end());
    std::vector<double> all_visual;
    std::vector<double> all_text;
    const auto          visual = layout.visual().indices();
    for (std::size_t l : layers) {
        if (l >= a.hidden.size()) {
            fail(ErrorKind::invalid_argument, "drift: layer index out of range");
        }
        const auto & ha = a.hidden[l];
        const auto & hb = b.hidden[l];
        if (ha.rows() != hb.rows() || ha.cols() != hb.cols()) {
            fail(ErrorKind::invalid_argument, "drift: hidden state shapes differ");
        }
        auto per_token = [&](std::span<const std::size_t> positions, std::vector<double> & sink) {
            double sum = 0.0;
            for (std::size_t p : positions) {
                const double d = 1.0 - core::cosine_similarity(ha.row(p), hb.row(p));
                sink.push_back(d);
                sum += d;
            }
            return positions.empty() ? 0.0 : sum / static_cast<double>(positions.size());
        };
        rec.per_layer_visual.push_back(per_token(visual, all_visual));
        rec.per_layer_text.push_back(per_token(text_positions, all_text));
    }
    rec.visual = summarize(std::move(all_visual));
    rec.text   = summarize(std::move(all_text));
    return rec;
}

}  // namespace marscache::analysis

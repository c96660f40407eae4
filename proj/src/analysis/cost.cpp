#include "analysis/cost.hpp"

#include "core/error.hpp"

#include <algorithm>

namespace marscache::analysis {

using diffusion::SequenceLayout;
using mars::EngineKind;
using mars::EngineSpec;

std::vector<StepShape> step_shapes(const diffusion::DecodeConfig & config, const SequenceLayout & layout) {
    if (config.confidence_threshold) {
        fail(ErrorKind::invalid_argument, "step_shapes: threshold decoding has no fixed step sequence");
    }
    config.validate(layout);
    const auto             budget = config.block_step_budget(layout);
    std::vector<StepShape> out;
    std::size_t            t = 0;
    for (std::size_t b = 0; b < budget.size(); ++b) {
        for (std::size_t s = 0; s < budget[b]; ++s) {
            out.push_back({++t, b});
        }
    }
    return out;
}

std::vector<StepShape> step_shapes(const diffusion::DecodeTrace & trace) {
    std::vector<StepShape> out;
    for (const auto & r : trace.steps) {
        out.push_back({r.step, r.block});
    }
    return out;
}

std::size_t visual_refresh_entries(const SequenceLayout & layout, std::optional<std::size_t> k,
                                   bool text_keys_for_chunked) {
    const std::size_t L = layout.length();
    const std::size_t V = layout.visual().size();
    if (!k) {
        return V * L;
    }
    const std::size_t N = layout.num_frames();
    const std::size_t P = layout.patches_per_frame();
    if (*k > P) {
        fail(ErrorKind::invalid_argument, "visual_refresh_entries: budget exceeds patches per frame");
    }
    // Anchor rows see every key; a non-anchor row in frame n sees the f_n
    // frames of its neighborhood plus k anchors in each other frame.
    std::size_t total = N * *k * L;
    for (std::size_t n = 0; n < N; ++n) {
        const std::size_t f    = std::min(n + 1, N - 1) - (n == 0 ? 0 : n - 1) + 1;
        std::size_t       keys = f * P + *k * (N - f);
        if (text_keys_for_chunked) {
            keys += L - V;
        }
        total += (P - *k) * keys;
    }
    return total;
}

namespace {

void validate_shapes(std::span<const StepShape> steps, const SequenceLayout & layout) {
    for (std::size_t i = 0; i < steps.size(); ++i) {
        if (steps[i].step != i + 1) {
            fail(ErrorKind::invalid_argument, "attention_cost: steps must be numbered 1, 2, ...");
        }
        if (steps[i].block >= layout.blocks().size()) {
            fail(ErrorKind::invalid_argument, "attention_cost: block index out of range at step " +
                                                  std::to_string(steps[i].step));
        }
        if (i > 0 && steps[i].block < steps[i - 1].block) {
            fail(ErrorKind::invalid_argument, "attention_cost: blocks must be visited left to right");
        }
    }
}

}  // namespace

CostReport attention_cost(const EngineSpec & spec, const model::ModelConfig & model, const SequenceLayout & layout,
                          std::span<const StepShape> steps) {
    model.validate();
    spec.validate(model, layout);
    validate_shapes(steps, layout);

    const std::size_t L      = layout.length();
    const std::size_t V      = layout.visual().size();
    const std::size_t layers = model.num_layers;
    const std::size_t G      = model.num_groups();
    const bool        causal = model.mask_mode == model::MaskMode::causal;
    const std::size_t full_entries = layers * (causal ? L * (L + 1) / 2 : L * L);
    const std::size_t full_rows    = layers * L;

    CostReport report;
    report.engine = spec.label.empty() ? mars::to_string(spec.kind) : spec.label;
    for (std::size_t i = 0; i < steps.size(); ++i) {
        const StepShape & s     = steps[i];
        const std::size_t B     = layout.blocks()[s.block].size();
        StepCost          cost;
        cost.step  = s.step;
        cost.block = s.block;
        switch (spec.kind) {
            case EngineKind::vanilla:
                cost.analytic_entries = full_entries;
                cost.analytic_rows    = full_rows;
                break;
            case EngineKind::dual_cache: {
                const bool full = spec.dual_rebuild_each_step || i == 0 || steps[i - 1].block != s.block;
                cost.analytic_entries = full ? full_entries : layers * B * L;
                cost.analytic_rows    = full ? full_rows : layers * B;
                break;
            }
            case EngineKind::mars: {
                if (s.step == 1) {
                    std::size_t search = 0;
                    for (std::size_t g = 0; g < G; ++g) {
                        if (spec.group_is_sparse(g)) {
                            search += std::min(spec.sample_size, L) * V;
                        }
                    }
                    cost.analytic_entries = full_entries + search;
                    cost.analytic_rows    = full_rows;
                    break;
                }
                const std::size_t T = L - V - B;  // text context
                for (std::size_t g = 0; g < G; ++g) {
                    const std::size_t depth = model.group_layers(g).size();
                    const bool rt = mars::refresh_due(s.step, g, mars::Modality::text, spec.schedule);
                    const bool rv = mars::refresh_due(s.step, g, mars::Modality::visual, spec.schedule);
                    std::size_t entries = B * L;
                    std::size_t rows    = B;
                    if (rt) {
                        entries += T * L;
                        rows += T;
                    }
                    if (rv) {
                        const auto k = spec.group_is_sparse(g) ? spec.anchor_budgets[g] : std::nullopt;
                        entries += visual_refresh_entries(layout, k, spec.visibility.text_keys_for_chunked);
                        rows += V;
                    }
                    cost.analytic_entries += depth * entries;
                    cost.analytic_rows += depth * rows;
                }
                break;
            }
        }
        report.total_entries += cost.analytic_entries;
        report.total_rows += cost.analytic_rows;
        report.vanilla_entries += full_entries;
        report.vanilla_rows += full_rows;
        report.steps.push_back(cost);
    }
    if (report.vanilla_entries > 0) {
        report.entry_ratio_vs_vanilla =
            static_cast<double>(report.total_entries) / static_cast<double>(report.vanilla_entries);
        report.row_ratio_vs_vanilla =
            static_cast<double>(report.total_rows) / static_cast<double>(report.vanilla_rows);
    }
    return report;
}

CostReport attention_cost(const EngineSpec & spec, const model::ModelConfig & model, const SequenceLayout & layout,
                          const diffusion::DecodeTrace & trace, bool strict) {
    const auto shapes = step_shapes(trace);
    CostReport report = attention_cost(spec, model, layout, shapes);
    for (std::size_t i = 0; i < trace.steps.size(); ++i) {
        const auto & rec  = trace.steps[i].report;
        StepCost &   cost = report.steps[i];
        cost.recorded_entries = rec.score_entries;
        cost.recorded_rows    = rec.rows_recomputed;
        if (strict && (rec.score_entries != cost.analytic_entries || rec.rows_recomputed != cost.analytic_rows)) {
            fail(ErrorKind::check_failed,
                 "attention_cost: step " + std::to_string(cost.step) + " recorded " +
                     std::to_string(rec.score_entries) + " entries / " + std::to_string(rec.rows_recomputed) +
                     " rows, analytic " + std::to_string(cost.analytic_entries) + " / " +
                     std::to_string(cost.analytic_rows));
        }
    }
    return report;
}

std::vector<std::size_t> cost_mismatches(const CostReport & report) {
    std::vector<std::size_t> out;
    for (const auto & s : report.steps) {
        const bool entries = s.recorded_entries && *s.recorded_entries != s.analytic_entries;
        const bool rows    = s.recorded_rows && *s.recorded_rows != s.analytic_rows;
        if (entries || rows) {
            out.push_back(s.step);
        }
    }
    return out;
}

}  // namespace marscache::analysis

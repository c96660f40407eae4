#include "mars/engines.hpp"

#include "core/error.hpp"

#include <algorithm>

namespace marscache::mars {

using core::Matrix;

std::string to_string(EngineKind kind) {
    switch (kind) {
        case EngineKind::vanilla:
            return "vanilla";
        case EngineKind::dual_cache:
            return "dual_cache";
        case EngineKind::mars:
            return "mars";
    }
    return "unknown";
}

EngineKind parse_engine_kind(const std::string & text) {
    if (text == "vanilla") {
        return EngineKind::vanilla;
    }
    if (text == "dual_cache") {
        return EngineKind::dual_cache;
    }
    if (text == "mars") {
        return EngineKind::mars;
    }
    fail(ErrorKind::config, "engine_kind: expected vanilla, dual_cache or mars, got '" + text + "'");
}

bool EngineSpec::group_is_sparse(std::size_t g) const {
    return chunk_enabled && g < anchor_budgets.size() && anchor_budgets[g].has_value();
}

void EngineSpec::validate(const model::ModelConfig & model, const SequenceLayout & layout) const {
    if (kind != EngineKind::vanilla && model.mask_mode != model::MaskMode::bidirectional) {
        fail(ErrorKind::config, "engine_kind: " + to_string(kind) + " requires a bidirectional model");
    }
    if (kind != EngineKind::mars) {
        return;
    }
    const std::size_t groups = model.num_groups();
    if (schedule.groups() != groups) {
        fail(ErrorKind::config, "tau_text: expected " + std::to_string(groups) + " groups, got " +
                                    std::to_string(schedule.groups()));
    }
    validate_schedule(schedule);
    if (anchor_budgets.size() != groups) {
        fail(ErrorKind::config, "anchor_budgets: expected " + std::to_string(groups) + " groups, got " +
                                    std::to_string(anchor_budgets.size()));
    }
    for (std::size_t g = 0; g < groups; ++g) {
        const auto & k = anchor_budgets[g];
        if (k && *k > layout.patches_per_frame()) {
            fail(ErrorKind::config, "anchor_budgets[" + std::to_string(g) + "]: " + std::to_string(*k) +
                                        " exceeds patches per frame (" +
                                        std::to_string(layout.patches_per_frame()) + ")");
        }
        if (g > 0) {
            const auto & shallow = anchor_budgets[g - 1];
            if (!k && shallow) {
                fail(ErrorKind::config, "anchor_budgets: full attention in group " + std::to_string(g + 1) +
                                            " after a finite budget in group " + std::to_string(g));
            }
            if (k && shallow && *shallow < *k) {
                fail(ErrorKind::config, "anchor_budgets: budgets must not increase with depth (group " +
                                            std::to_string(g) + " < group " + std::to_string(g + 1) + ")");
            }
        }
    }
    if (sample_size == 0) {
        fail(ErrorKind::config, "sample_size: must be >= 1");
    }
}

namespace {

std::vector<std::size_t> range_indices(std::size_t n) {
    return core::IndexRange{0, n}.indices();
}

Matrix assemble(const DecodeContext & ctx, std::span<const TokenId> response) {
    return diffusion::assemble_embeddings(*ctx.weights, *ctx.layout, *ctx.visual, ctx.prompt, response);
}

void check_context(const DecodeContext & ctx) {
    if (ctx.weights == nullptr || ctx.layout == nullptr || ctx.visual == nullptr) {
        fail(ErrorKind::invalid_argument, "decode context is incomplete");
    }
}

}  // namespace

// --- vanilla ---------------------------------------------------------------

VanillaEngine::VanillaEngine(DecodeContext ctx, bool capture_attention) :
    ctx_(std::move(ctx)),
    capture_attention_(capture_attention) {
    check_context(ctx_);
}

StepOutput VanillaEngine::step(std::size_t /*t*/, std::span<const TokenId> response, std::size_t active_block) {
    const SequenceLayout & layout = *ctx_.layout;
    const std::size_t      L      = layout.length();
    last_ = model::forward(*ctx_.weights, assemble(ctx_, response), layout.position_ids(), std::nullopt,
                           capture_attention_);

    const auto        block  = layout.blocks().at(active_block);
    const std::size_t layers = ctx_.weights->config.num_layers;
    const std::size_t groups = ctx_.weights->config.num_groups();
    const std::size_t per_layer =
        ctx_.weights->config.mask_mode == model::MaskMode::causal ? L * (L + 1) / 2 : L * L;

    StepOutput out;
    out.logits                 = last_.logits.gather_rows(block.indices());
    out.report.full_recompute  = true;
    out.report.refresh_text    = std::vector<bool>(groups, false);
    out.report.refresh_visual  = std::vector<bool>(groups, false);
    out.report.score_entries   = layers * per_layer;
    out.report.rows_recomputed = layers * L;
    return out;
}

// --- dual cache ------------------------------------------------------------

DualCacheEngine::DualCacheEngine(DecodeContext ctx, bool rebuild_each_step) :
    ctx_(std::move(ctx)),
    rebuild_each_step_(rebuild_each_step) {
    check_context(ctx_);
}

StepOutput DualCacheEngine::step(std::size_t /*t*/, std::span<const TokenId> response, std::size_t active_block) {
    const model::Weights & w      = *ctx_.weights;
    const SequenceLayout & layout = *ctx_.layout;
    const std::size_t      L      = layout.length();
    const std::size_t      layers = w.config.num_layers;
    const auto             block  = layout.blocks().at(active_block);
    const Matrix           input  = assemble(ctx_, response);

    const bool full = rebuild_each_step_ || !cached_block_ || *cached_block_ != active_block;
    const std::vector<std::size_t> rows = full ? range_indices(L) : block.indices();
    const model::AttentionPlan     plan = model::full_plan(rows.size());
    kv_.resize(layers);

    Matrix h = input.gather_rows(rows);
    for (std::size_t l = 0; l < layers; ++l) {
        h = model::run_layer(w, l, h, rows, layout.position_ids(), kv_[l], plan);
    }
    cached_block_ = active_block;

    StepOutput out;
    // A full pass keeps rows in sequence order, so block positions index h directly.
    out.logits = model::output_logits(w, full ? h.gather_rows(block.indices()) : h);
    out.report.full_recompute  = full;
    out.report.refresh_text    = std::vector<bool>(w.config.num_groups(), false);
    out.report.refresh_visual  = std::vector<bool>(w.config.num_groups(), false);
    out.report.score_entries   = layers * model::score_entries(plan, L);
    out.report.rows_recomputed = layers * rows.size();
    return out;
}

// --- mars ------------------------------------------------------------------

MarsEngine::MarsEngine(DecodeContext ctx, EngineSpec spec) : ctx_(std::move(ctx)), spec_(std::move(spec)) {
    check_context(ctx_);
    spec_.validate(ctx_.weights->config, *ctx_.layout);
}

StepOutput MarsEngine::step(std::size_t t, std::span<const TokenId> response, std::size_t active_block) {
    if (t == 0) {
        fail(ErrorKind::invalid_argument, "steps are 1-based");
    }
    if (t == 1) {
        return initialize(response, active_block);
    }
    if (!cache_.initialized) {
        fail(ErrorKind::state, "mars cache used at step " + std::to_string(t) + " before initialization");
    }
    return refresh_step(t, response, active_block);
}

StepOutput MarsEngine::initialize(std::span<const TokenId> response, std::size_t active_block) {
    const model::Weights &      w      = *ctx_.weights;
    const model::ModelConfig &  cfg    = w.config;
    const SequenceLayout &      layout = *ctx_.layout;
    const std::size_t           L      = layout.length();
    const std::size_t           G      = cfg.num_groups();
    const std::vector<std::size_t> rows = range_indices(L);
    const model::AttentionPlan  plan    = model::full_plan(L);

    cache_           = CacheState{};
    cache_.kv.resize(cfg.num_layers);
    cache_.boundary.resize(G + 1);
    cache_.last_refresh.assign(G, {1, 1});

    const std::vector<std::size_t> sample = equidistant_sample(L, spec_.sample_size);
    const std::vector<std::size_t> visual = layout.visual().indices();
    std::vector<Matrix>            proxies(G);
    std::size_t                    search_entries = 0;

    Matrix h = assemble(ctx_, response);
    for (std::size_t g = 0; g < G; ++g) {
        cache_.boundary[g] = h;
        const auto layers  = cfg.group_layers(g);
        for (std::size_t l = layers.begin; l < layers.end; ++l) {
            model::LayerCapture capture;
            const bool          score_here = l == layers.begin && spec_.group_is_sparse(g);
            capture.want_queries           = score_here;
            h = model::run_layer(w, l, h, rows, layout.position_ids(), cache_.kv[l], plan, &capture);
            if (score_here) {
                proxies[g] = proxy_scores_multihead(capture.queries, cache_.kv[l].keys, cfg.num_heads, sample, visual);
                search_entries += sample.size() * visual.size();
            }
        }
    }
    cache_.boundary[G] = h;

    std::vector<std::optional<std::size_t>> budgets(G);
    for (std::size_t g = 0; g < G; ++g) {
        if (spec_.group_is_sparse(g)) {
            budgets[g] = spec_.anchor_budgets[g];
        }
    }
    cache_.anchors     = select_anchors(proxies, layout, budgets, sample);
    cache_.initialized = true;

    const auto  block = layout.blocks().at(active_block);
    StepOutput out;
    out.logits                 = model::output_logits(w, h.gather_rows(block.indices()));
    out.report.full_recompute  = true;
    out.report.refresh_text    = std::vector<bool>(G, false);
    out.report.refresh_visual  = std::vector<bool>(G, false);
    out.report.score_entries   = cfg.num_layers * L * L + search_entries;
    out.report.rows_recomputed = cfg.num_layers * L;
    out.report.anchor_digest   = cache_.anchors->digest();
    return out;
}

StepOutput MarsEngine::refresh_step(std::size_t t, std::span<const TokenId> response, std::size_t active_block) {
    const model::Weights &     w      = *ctx_.weights;
    const model::ModelConfig & cfg    = w.config;
    const SequenceLayout &     layout = *ctx_.layout;
    const std::size_t          L      = layout.length();
    const std::size_t          G      = cfg.num_groups();
    const auto                 block  = layout.blocks().at(active_block);

    // Context split: visual positions, and text context = prompt plus every
    // response position outside the active block.
    const std::vector<std::size_t> visual = layout.visual().indices();
    std::vector<std::size_t>       text;
    for (std::size_t p = layout.prompt().begin; p < layout.length(); ++p) {
        if (!block.contains(p)) {
            text.push_back(p);
        }
    }

    cache_.boundary[0] = assemble(ctx_, response);

    StepOutput out;
    out.report.refresh_text.assign(G, false);
    out.report.refresh_visual.assign(G, false);
    for (std::size_t g = 0; g < G; ++g) {
        const bool refresh_text   = refresh_due(t, g, Modality::text, spec_.schedule);
        const bool refresh_visual = refresh_due(t, g, Modality::visual, spec_.schedule);
        out.report.refresh_text[g]   = refresh_text;
        out.report.refresh_visual[g] = refresh_visual;

        std::vector<std::size_t> rows;
        if (refresh_visual) {
            rows.insert(rows.end(), visual.begin(), visual.end());
            cache_.last_refresh[g][1] = t;
        }
        if (refresh_text) {
            rows.insert(rows.end(), text.begin(), text.end());
            cache_.last_refresh[g][0] = t;
        }
        for (std::size_t p = block.begin; p < block.end; ++p) {
            rows.push_back(p);
        }
        std::sort(rows.begin(), rows.end());

        std::optional<std::vector<std::size_t>> anchors;
        if (spec_.group_is_sparse(g)) {
            anchors = cache_.anchors->groups[g].all;
        }
        const model::AttentionPlan plan = anchor_augmented_plan(layout, rows, anchors, spec_.visibility);
        const std::size_t          entries = model::score_entries(plan, L);

        Matrix     h      = cache_.boundary[g].gather_rows(rows);
        const auto layers = cfg.group_layers(g);
        for (std::size_t l = layers.begin; l < layers.end; ++l) {
            h = model::run_layer(w, l, h, rows, layout.position_ids(), cache_.kv[l], plan);
            out.report.score_entries += entries;
            out.report.rows_recomputed += rows.size();
        }
        cache_.boundary[g + 1].scatter_rows(rows, h);
    }

    out.logits               = model::output_logits(w, cache_.boundary[G].gather_rows(block.indices()));
    out.report.anchor_digest = cache_.anchors->digest();
    return out;
}

std::unique_ptr<diffusion::Denoiser> make_engine(const EngineSpec & spec, const DecodeContext & ctx) {
    check_context(ctx);
    spec.validate(ctx.weights->config, *ctx.layout);
    switch (spec.kind) {
        case EngineKind::vanilla:
            return std::make_unique<VanillaEngine>(ctx);
        case EngineKind::dual_cache:
            return std::make_unique<DualCacheEngine>(ctx, spec.dual_rebuild_each_step);
        case EngineKind::mars:
            return std::make_unique<MarsEngine>(ctx, spec);
    }
    fail(ErrorKind::invalid_argument, "unknown engine kind");
}

}  // namespace marscache::mars

// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on failure.

#include "analysis/cost.hpp"
#include "analysis/drift.hpp"
#include "analysis/relocation.hpp"
#include "analysis/visibility.hpp"
#include "app/run_config.hpp"
#include "core/error.hpp"
#include "core/numeric.hpp"
#include "diffusion/decode.hpp"
#include "diffusion/masking.hpp"
#include "mars/engines.hpp"
#include "mars/sparse_attention.hpp"
#include "model/transformer.hpp"
#include "support/fixtures.hpp"
#include "support/reference_model.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <optional>
#include <string>
#include <vector>

using namespace marscache;
using core::Matrix;

namespace {

struct Outcome {
    bool        pass = false;
    std::string detail;
};

std::string fmt(const char * f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), f, v);
    return buf;
}

mars::EngineSpec preset_engine(const app::json & entry) {
    return app::parse_run_config(app::json{{"engine", entry}}).engine.spec;
}

mars::EngineSpec kind_spec(mars::EngineKind kind) {
    mars::EngineSpec s;
    s.kind = kind;
    return s;
}

struct Observed {
    diffusion::DecodeResult result;
    std::vector<Matrix>     logits;
    double                  seconds = 0.0;
};

Observed observe(diffusion::Denoiser & engine, const diffusion::SequenceLayout & layout,
                 const diffusion::DecodeConfig & d, const std::function<void(const diffusion::StepRecord &)> & extra = {}) {
    Observed   o;
    const auto t0 = std::chrono::steady_clock::now();
    o.result      = diffusion::decode(engine, layout, d, [&](const diffusion::StepRecord & rec, const Matrix & logits) {
        o.logits.push_back(logits);
        if (extra) {
            extra(rec);
        }
    });
    o.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return o;
}

double tokens_per_second(const Observed & o) {
    return static_cast<double>(o.result.tokens.size()) / (static_cast<double>(o.result.trace.total_elapsed_ns()) * 1e-9);
}

// Shared runs on the default toy workload.
struct DefaultRuns {
    std::unique_ptr<fixtures::Setup> setup = fixtures::toy_setup();
    diffusion::DecodeConfig          decode{64, 16, 32, 4, std::nullopt};
    Observed                         vanilla;
    std::size_t                      drift_pairs   = 0;
    std::size_t                      drift_ordered = 0;

    DefaultRuns() {
        mars::VanillaEngine                    engine(setup->context());
        const auto                             layers = analysis::group_boundary_layers(setup->weights.config);
        std::optional<model::LayerActivations> prev;
        vanilla = observe(engine, setup->layout, decode, [&](const diffusion::StepRecord & rec) {
            const auto & acts = engine.last_forward().activations;
            if (prev) {
                const auto text = analysis::text_context_positions(setup->layout, rec.block);
                const auto d    = analysis::drift(*prev, acts, setup->layout, layers, text);
                ++drift_pairs;
                drift_ordered += d.visual.mean <= d.text.mean;
            }
            prev = acts;
        });
    }

    Observed run(const mars::EngineSpec & spec) const {
        auto eng = mars::make_engine(spec, setup->context());
        return observe(*eng, setup->layout, decode);
    }
};

DefaultRuns & default_runs() {
    static DefaultRuns runs;
    return runs;
}

Outcome c1_degenerate_equivalence() {
    auto &     r     = default_runs();
    const auto t0    = std::chrono::steady_clock::now();
    const auto spec  = preset_engine("mars-degenerate");
    const auto mars  = r.run(spec);
    const auto secs  = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    double     worst = 0.0;
    bool       shape = mars.logits.size() == r.vanilla.logits.size();
    for (std::size_t i = 0; shape && i < mars.logits.size(); ++i) {
        worst = std::max(worst, core::max_abs_diff(mars.logits[i], r.vanilla.logits[i]));
    }
    const bool same = mars.result.tokens == r.vanilla.result.tokens;
    return {same && shape && worst <= 1e-9 && secs < 60.0,
            "tokens_identical=" + std::to_string(same) + " max_logit_delta=" + fmt("%.3e", worst) +
                " mars_seconds=" + fmt("%.2f", secs) + " vanilla_seconds=" + fmt("%.2f", r.vanilla.seconds)};
}

Outcome c2_anchor_saturation() {
    const diffusion::SequenceLayout l(8, 4, 5, 8, 8, 31);
    auto                            rng   = core::seeded_stream(2, "acceptance.saturation");
    const auto                      vis   = l.visual().indices();
    double                          worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        const Matrix q = fixtures::random_matrix(l.length(), 16, rng);
        const Matrix k = fixtures::random_matrix(l.length(), 16, rng);
        const Matrix v = fixtures::random_matrix(l.length(), 16, rng);
        worst = std::max(worst, core::max_abs_diff(mars::anchor_augmented_attention(q, k, v, l, vis),
                                                   model::attention(q, k, v)));
    }
    return {worst <= 1e-12, "trials=100 max_abs_delta=" + fmt("%.3e", worst)};
}

Outcome c3_chunk_reduction() {
    const diffusion::SequenceLayout l(8, 16, 16, 64, 32, 255);
    auto                            rng   = core::seeded_stream(3, "acceptance.chunk");
    const auto                      vis   = l.visual().indices();
    double                          worst = 0.0;
    for (int trial = 0; trial < 10; ++trial) {
        const Matrix q     = fixtures::random_matrix(l.length(), 16, rng);
        const Matrix k     = fixtures::random_matrix(l.length(), 16, rng);
        const Matrix v     = fixtures::random_matrix(l.length(), 16, rng);
        const Matrix none  = mars::anchor_augmented_attention(q, k, v, l, {});
        const Matrix chunk = mars::chunk_attention(q.gather_rows(vis), k, v, l);
        worst              = std::max(worst, core::max_abs_diff(none.gather_rows(vis), chunk));
    }
    const auto plan    = mars::anchor_augmented_plan(l, vis, std::vector<std::size_t>{});
    const auto planned = model::score_entries(plan, l.length());
    std::size_t counted = 0;
    for (std::size_t i = 0; i < 128; ++i) {
        for (std::size_t j = 0; j < 128; ++j) {
            const long d = static_cast<long>(i / 16) - static_cast<long>(j / 16);
            counted += (d >= -1 && d <= 1);
        }
    }
    const auto closed = analysis::visual_refresh_entries(l, 0, false);
    return {worst <= 1e-12 && planned == 5632 && counted == 5632 && closed == 5632,
            "max_abs_delta=" + fmt("%.3e", worst) + " plan_entries=" + std::to_string(planned) +
                " mask_count=" + std::to_string(counted) + " closed_form=" + std::to_string(closed)};
}

Outcome c4_refresh_law() {
    auto       cfg  = model::ModelConfig::toy();
    const auto base = fixtures::make_setup(cfg, 8, 16, 16, 128, 32, 42);
    const diffusion::DecodeConfig d{128, 128, 32, 1, std::nullopt};
    auto counts = [&](const std::string & preset, std::vector<std::size_t> & text, std::vector<std::size_t> & visual) {
        const auto spec = app::parse_run_config(app::json{
            {"decode", {{"generation_length", 128}, {"num_steps", 128}, {"block_length", 32}, {"tokens_per_step", 1}}},
            {"engine", preset}}).engine.spec;
        auto eng = mars::make_engine(spec, base->context());
        const auto res = diffusion::decode(*eng, base->layout, d);
        text.assign(4, 0);
        visual.assign(4, 0);
        for (const auto & s : res.trace.steps) {
            if (s.step == 1) {
                continue;
            }
            for (std::size_t g = 0; g < 4; ++g) {
                text[g] += s.report.refresh_text[g];
                visual[g] += s.report.refresh_visual[g];
            }
        }
        return res.trace.steps.size();
    };
    std::vector<std::size_t> t1, v1, t2, v2;
    const auto n1 = counts("table10-pyramid", t1, v1);
    const auto n2 = counts("table10-pyramid-x2", t2, v2);
    auto       str = [](const std::vector<std::size_t> & v) {
        std::string s;
        for (auto x : v) {
            s += (s.empty() ? "" : ",") + std::to_string(x);
        }
        return "(" + s + ")";
    };
    const std::vector<std::size_t> want_t{2, 4, 8, 16}, want_v{1, 2, 4, 8};
    return {n1 == 128 && n2 == 128 && t1 == want_t && v1 == want_t && t2 == want_t && v2 == want_v,
            "text=" + str(t1) + " x2_text=" + str(t2) + " x2_visual=" + str(v2) + " steps=" + std::to_string(n1)};
}

Outcome c5_cost() {
    auto &     r    = default_runs();
    const auto dual = r.run(kind_spec(mars::EngineKind::dual_cache));
    const auto spec = preset_engine(app::json{{"presets", {"table10-pyramid", "table8-best"}}});
    const auto mars = r.run(spec);
    const std::size_t v = r.vanilla.result.trace.total_score_entries();
    const std::size_t c = dual.result.trace.total_score_entries();
    const std::size_t m = mars.result.trace.total_score_entries();
    // Pinned from the independent visible-set counter.
    const std::size_t want_v = 5537792, want_c = 1437696, want_m = 1280544;
    const auto report = analysis::attention_cost(spec, r.setup->weights.config, r.setup->layout, mars.result.trace);
    const double ratio = static_cast<double>(m) / static_cast<double>(v);
    return {v == want_v && c == want_c && m == want_m && v > c && c > m && ratio <= 0.35 &&
                report.total_entries == m,
            "vanilla=" + std::to_string(v) + " dual_cache=" + std::to_string(c) + " mars=" + std::to_string(m) +
                " ratio=" + fmt("%.12f", ratio) + " pinned=" + fmt("%.12f", 1280544.0 / 5537792.0)};
}

Outcome c6_throughput() {
    auto &       r    = default_runs();
    const auto   mars = r.run(preset_engine("table10-pyramid"));
    const double tv   = tokens_per_second(r.vanilla);
    const double tm   = tokens_per_second(mars);
    return {tm >= 2.0 * tv, "vanilla_tok_s=" + fmt("%.2f", tv) + " mars_tok_s=" + fmt("%.2f", tm) +
                                " speedup=" + fmt("%.2f", tm / tv)};
}

Outcome c7_relocation() {
    const std::vector<double> ratios{0.0, 0.25, 0.5, 0.75, 1.0};
    double                    bi = 0.0, causal = 0.0;
    for (auto mode : {model::MaskMode::bidirectional, model::MaskMode::causal}) {
        const auto setup = fixtures::toy_setup(mode);
        const std::vector<model::TokenId> resp(64, setup->layout.mask_token_id());
        const auto exp = analysis::relocation_experiment(setup->weights, setup->layout, setup->visual, setup->prompt,
                                                         resp, 4, 8.0, ratios, core::seeded_stream(42, "relocation"));
        for (const auto & row : exp.rows) {
            if (mode == model::MaskMode::bidirectional) {
                bi = std::max(bi, row.max_delta_original);
            } else if (row.r == 1.0) {
                causal = row.max_delta_r0;
            }
        }
    }
    return {bi <= 1e-9 && causal > 1e-6,
            "bidirectional_max_delta=" + fmt("%.3e", bi) + " causal_r1_vs_r0=" + fmt("%.3e", causal)};
}

Outcome c8_visibility() {
    std::size_t checked = 0;
    bool        ok      = true;
    for (std::size_t T = 1; T <= 1024 && ok; ++T) {
        const auto   freq = analysis::visibility_frequency(T);
        const Matrix mask = model::build_causal_mask(T);
        std::vector<std::size_t> cols(T, 0);
        for (std::size_t i = 0; i < T; ++i) {
            for (std::size_t j = 0; j < T; ++j) {
                cols[j] += mask(i, j) == 0.0;
            }
        }
        for (std::size_t j = 0; j < T; ++j) {
            ok = ok && cols[j] == freq[j] && freq[j] == T - j;
        }
        ++checked;
    }
    return {ok && checked == 1024, "lengths_checked=" + std::to_string(checked)};
}

Outcome c9_forward_mask() {
    const std::size_t                 n = 10000, seeds = 100;
    const std::vector<model::TokenId> clean(n, 1);
    bool                              ok = true;
    double                            worst_pooled = 0.0, worst_seed = 0.0;
    std::size_t                       seed_exceed = 0;
    for (double t : {0.1, 0.5, 0.9}) {
        const double mean  = static_cast<double>(n) * t;
        const double sigma = std::sqrt(static_cast<double>(n) * t * (1.0 - t));
        std::size_t  total = 0;
        for (std::uint64_t seed = 0; seed < seeds; ++seed) {
            auto       rng = core::seeded_stream(seed, "acceptance.forward_mask");
            const auto s   = diffusion::forward_mask(clean, t, rng, 255);
            const double z = std::abs(static_cast<double>(s.masked_count()) - mean) / sigma;
            worst_seed     = std::max(worst_seed, z);
            seed_exceed += z > 3.0;
            total += s.masked_count();
        }
        // Pooled over all seeds: Binomial(seeds * n, t).
        const double pooled_n = static_cast<double>(seeds * n);
        const double z        = std::abs(static_cast<double>(total) - pooled_n * t) / std::sqrt(pooled_n * t * (1.0 - t));
        worst_pooled          = std::max(worst_pooled, z);
        ok                    = ok && z <= 3.0;
    }
    auto       rng  = core::seeded_stream(9, "acceptance.forward_mask.edges");
    const auto none = diffusion::forward_mask(clean, 0.0, rng, 255);
    const auto all  = diffusion::forward_mask(clean, 1.0, rng, 255);
    const bool edges = none.masked_count() == 0 && all.masked_count() == n;
    return {ok && edges, "seeds=100 pooled_worst_z=" + fmt("%.3f", worst_pooled) + " per_seed_worst_z=" +
                             fmt("%.3f", worst_seed) + " per_seed_over_3sigma=" + std::to_string(seed_exceed) +
                             "/300 edges_ok=" + std::to_string(edges)};
}

Outcome c10_loss() {
    auto         setup = fixtures::toy_setup();
    const auto & l     = setup->layout;
    const auto   clean = diffusion::synthetic_prompt(64, l.mask_token_id(), core::seeded_stream(42, "clean"));

    auto         rng1  = core::seeded_stream(42, "acceptance.loss.t1");
    const double at1   = diffusion::dlm_loss(setup->weights, l, setup->visual, setup->prompt, clean, 1.0, rng1);
    const std::vector<model::TokenId> masked(64, l.mask_token_id());
    const Matrix in     = diffusion::assemble_embeddings(setup->weights, l, setup->visual, setup->prompt, masked);
    const Matrix logits = reference::forward(setup->weights, in, l.position_ids(), reference::all_visible(l.length()));
    double       nll    = 0.0;
    for (std::size_t i = 0; i < 64; ++i) {
        nll -= reference::log_prob(logits, l.response().begin + i, clean[i]);
    }
    const double d1 = std::abs(at1 - nll / 64.0);

    setup->weights.output_head = Matrix(setup->weights.config.model_dim, setup->weights.config.vocab_size, 0.0);
    double worst = 0.0;
    for (double t : {0.1, 0.25, 0.5, 0.75, 1.0}) {
        auto         rng    = core::seeded_stream(42, "acceptance.loss.uniform");
        auto         replay = rng;
        const double loss   = diffusion::dlm_loss(setup->weights, l, setup->visual, setup->prompt, clean, t, rng);
        const auto   noisy  = diffusion::forward_mask(clean, t, replay, l.mask_token_id());
        if (noisy.masked_count() == 0) {
            worst = std::max(worst, std::abs(loss));
            continue;
        }
        const double per = loss * t * 64.0 / static_cast<double>(noisy.masked_count());
        worst            = std::max(worst, std::abs(per - std::log(256.0)));
    }
    return {d1 <= 1e-12 && worst <= 1e-12,
            "t1_vs_mean_nll=" + fmt("%.3e", d1) + " uniform_vs_ln256=" + fmt("%.3e", worst)};
}

// Checks every response handed to the wrapped engine against the previous one.
class ImmutabilityProbe final : public diffusion::Denoiser {
  public:
    ImmutabilityProbe(std::unique_ptr<diffusion::Denoiser> inner, model::TokenId mask)
        : inner_(std::move(inner)), mask_(mask) {}

    std::string name() const override { return inner_->name(); }

    diffusion::StepOutput step(std::size_t t, std::span<const model::TokenId> response, std::size_t block) override {
        std::size_t masked = 0;
        for (std::size_t i = 0; i < response.size(); ++i) {
            masked += response[i] == mask_;
            if (!prev_.empty() && prev_[i] != mask_ && response[i] != prev_[i]) {
                ok = false;
            }
        }
        if (!prev_.empty() && masked >= prev_masked_) {
            ok = false;
        }
        prev_.assign(response.begin(), response.end());
        prev_masked_ = masked;
        return inner_->step(t, response, block);
    }

    bool ok = true;

  private:
    std::unique_ptr<diffusion::Denoiser> inner_;
    model::TokenId                       mask_;
    std::vector<model::TokenId>          prev_;
    std::size_t                          prev_masked_ = 0;
};

Outcome c11_decode_mechanics() {
    auto        rng   = core::seeded_stream(11, "acceptance.property");
    auto        pick  = [&](std::size_t lo, std::size_t hi) { return lo + rng.next_below(hi - lo + 1); };
    std::size_t fails = 0, runs = 0, max_over = 0;
    std::string first_failure;
    const auto  cfg = fixtures::small_model();
    for (int i = 0; i < 500; ++i) {
        const std::size_t frames = pick(1, 3), patches = pick(2, 4), prompt = pick(1, 4);
        const std::size_t gen = pick(4, 24), block = pick(1, gen);
        const auto        setup = fixtures::make_setup(cfg, frames, patches, prompt, gen, block, 1000 + i);
        const std::size_t blocks = setup->layout.blocks().size();

        diffusion::DecodeConfig d{gen, 0, block, 0, std::nullopt};
        switch (rng.next_below(3)) {
            case 0:
                d.tokens_per_step = pick(1, 4);
                for (const auto & b : setup->layout.blocks()) {
                    d.num_steps += (b.size() + d.tokens_per_step - 1) / d.tokens_per_step;
                }
                d.num_steps += pick(0, 3);
                break;
            case 1:
                d.num_steps = blocks * pick(1, std::max<std::size_t>(1, setup->layout.blocks().back().size()));
                break;
            default:
                d.num_steps            = blocks * pick(1, 3);
                d.confidence_threshold = 0.05 + 0.9 * rng.next_uniform();
                break;
        }

        mars::EngineSpec spec;
        switch (rng.next_below(3)) {
            case 0: spec = kind_spec(mars::EngineKind::vanilla); break;
            case 1:
                spec                        = kind_spec(mars::EngineKind::dual_cache);
                spec.dual_rebuild_each_step = rng.next_below(2) == 1;
                break;
            default: {
                std::vector<std::size_t> tt(4), tv(4);
                tt[3]               = pick(1, 2);
                for (int g = 2; g >= 0; --g) {
                    tt[g] = tt[g + 1] * pick(1, 2);
                }
                const std::size_t c = pick(1, 2);
                for (std::size_t g = 0; g < 4; ++g) {
                    tv[g] = tt[g] * c;
                }
                std::vector<std::optional<std::size_t>> budgets(4);
                const std::size_t full = pick(0, 4);
                std::size_t       k    = patches;
                for (std::size_t g = full; g < 4; ++g) {
                    k          = pick(0, k);
                    budgets[g] = k;
                }
                spec               = fixtures::mars_spec(tt, tv, budgets);
                spec.chunk_enabled = rng.next_below(4) != 0;
                spec.sample_size   = pick(1, 8);
            }
        }

        try {
            ImmutabilityProbe probe(mars::make_engine(spec, setup->context()), setup->layout.mask_token_id());
            const auto        res = diffusion::decode(probe, setup->layout, d);
            std::vector<int>  seen(gen, 0);
            bool              ok = probe.ok && res.trace.steps.size() <= d.num_steps;
            for (const auto & s : res.trace.steps) {
                ok = ok && !s.committed.empty();
                for (const auto & c : s.committed) {
                    ok = ok && ++seen[c.position] == 1 && res.tokens[c.position] == c.token;
                }
            }
            for (std::size_t p = 0; p < gen; ++p) {
                ok = ok && seen[p] == 1 && res.tokens[p] != setup->layout.mask_token_id();
            }
            max_over = std::max(max_over, res.trace.steps.size());
            if (!ok) {
                ++fails;
                if (first_failure.empty()) {
                    first_failure = " first_failure=" + std::to_string(i);
                }
            }
        } catch (const std::exception & e) {
            ++fails;
            if (first_failure.empty()) {
                first_failure = " first_failure=" + std::to_string(i) + " (" + e.what() + ")";
            }
        }
        ++runs;
    }
    return {fails == 0 && runs == 500, "decodes=" + std::to_string(runs) + " failures=" + std::to_string(fails) +
                                           " longest=" + std::to_string(max_over) + first_failure};
}

Outcome c12_drift() {
    auto &       r    = default_runs();
    const double frac = static_cast<double>(r.drift_ordered) / static_cast<double>(r.drift_pairs);
    return {frac >= 0.8, "pairs=" + std::to_string(r.drift_pairs) + " visual_le_text=" +
                             std::to_string(r.drift_ordered) + " fraction=" + fmt("%.3f", frac)};
}

}  // namespace

int main() {
    const std::vector<std::pair<const char *, Outcome (*)()>> criteria = {
        {"degenerate-schedule equivalence", c1_degenerate_equivalence},
        {"anchor saturation", c2_anchor_saturation},
        {"chunk reduction", c3_chunk_reduction},
        {"refresh-count law", c4_refresh_law},
        {"cost dominance and magnitude", c5_cost},
        {"relative throughput", c6_throughput},
        {"bidirectional relocation invariance", c7_relocation},
        {"visibility frequency", c8_visibility},
        {"forward-mask statistics", c9_forward_mask},
        {"loss degenerate cases", c10_loss},
        {"decode mechanics", c11_decode_mechanics},
        {"drift ordering", c12_drift},
    };
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception & e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        failed += !o.pass;
        std::printf("%s criterion %2zu %-36s %s\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first, o.detail.c_str());
        std::fflush(stdout);
    }
    std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
    return failed == 0 ? 0 : 1;
}

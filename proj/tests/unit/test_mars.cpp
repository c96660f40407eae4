#include "core/error.hpp"
#include "core/numeric.hpp"
#include "diffusion/decode.hpp"
#include "doctest.h"
#include "mars/anchors.hpp"
#include "mars/engines.hpp"
#include "mars/schedule.hpp"
#include "mars/sparse_attention.hpp"
#include "model/transformer.hpp"
#include "support/fixtures.hpp"

#include <cmath>
#include <numeric>

using namespace marscache;
using core::Matrix;
using diffusion::SequenceLayout;
using mars::Modality;

TEST_CASE("validate_schedule") {
    CHECK_NOTHROW(mars::validate_schedule({{64, 32, 16, 8}, {64, 32, 16, 8}}));
    CHECK_NOTHROW(mars::validate_schedule({{64, 32, 16, 8}, {128, 64, 32, 16}}));
    CHECK_NOTHROW(mars::validate_schedule(mars::RefreshSchedule::uniform(4, 1)));
    CHECK_THROWS_WITH(mars::validate_schedule({{48, 32, 16, 8}, {48, 32, 16, 8}}),
                      doctest::Contains("tau(g=1,text)=48 is not an integer multiple of tau(g=2,text)=32"));
    CHECK_THROWS_WITH(mars::validate_schedule({{8, 4}, {8, 2}}), doctest::Contains("tau(g=2,visual)"));
    CHECK_THROWS_WITH(mars::validate_schedule({{4, 0}, {4, 4}}), doctest::Contains("tau(g=2,text)"));
    CHECK_THROWS_AS(mars::validate_schedule({{4, 4}, {4}}), Error);
    CHECK_THROWS_AS(mars::validate_schedule({{}, {}}), Error);
}

TEST_CASE("refresh_due") {
    const mars::RefreshSchedule s{{64, 32, 16, 8}, {128, 64, 32, 16}};
    CHECK(mars::refresh_due(64, 0, Modality::text, s));
    CHECK_FALSE(mars::refresh_due(63, 0, Modality::text, s));
    CHECK_FALSE(mars::refresh_due(64, 0, Modality::visual, s));
    CHECK(mars::refresh_due(128, 0, Modality::visual, s));
    for (std::size_t t = 1; t <= 50; ++t) {
        CHECK(mars::refresh_due(t, 1));
    }
    CHECK_THROWS_AS(mars::refresh_due(0, 4), Error);
    CHECK_THROWS_AS(mars::refresh_due(4, 9, Modality::text, s), Error);
}

TEST_CASE("neighborhood sizes") {
    const SequenceLayout l(8, 16, 4, 8, 8, 255);
    CHECK(mars::neighborhood(l, 3).size() == 48);
    const auto first = mars::neighborhood(l, 0);
    CHECK(first.size() == 32);
    CHECK(first.front() == 0);
    CHECK(first.back() == 31);
    CHECK(mars::neighborhood(l, 7).size() == 32);
    const SequenceLayout single(1, 16, 4, 8, 8, 255);
    CHECK(mars::neighborhood(single, 0).size() == 16);
    CHECK_THROWS_AS(mars::neighborhood(l, 8), Error);
}

TEST_CASE("chunk attention") {
    auto rng = core::seeded_stream(21, "chunk");

    SUBCASE("a single frame equals full attention over the visual segment") {
        const SequenceLayout l(1, 6, 2, 4, 4, 31);
        const Matrix q = fixtures::random_matrix(l.length(), 8, rng);
        const Matrix k = fixtures::random_matrix(l.length(), 8, rng);
        const Matrix v = fixtures::random_matrix(l.length(), 8, rng);
        const auto   vis = l.visual().indices();
        const Matrix out = mars::chunk_attention(q.gather_rows(vis), k, v, l);
        const Matrix ref = model::attention(q.gather_rows(vis), k.gather_rows(vis), v.gather_rows(vis));
        CHECK(max_abs_diff(out, ref) <= 1e-12);
    }

    SUBCASE("entry count for 8 frames of 16 patches") {
        const SequenceLayout l(8, 16, 16, 64, 32, 255);
        const auto           plan = mars::anchor_augmented_plan(l, l.visual().indices(), std::vector<std::size_t>{});
        CHECK(model::score_entries(plan, l.length()) == 5632);
        std::size_t brute = 0;
        for (std::size_t i = 0; i < 128; ++i) {
            for (std::size_t j = 0; j < 128; ++j) {
                const long d = static_cast<long>(i / 16) - static_cast<long>(j / 16);
                brute += std::abs(d) <= 1;
            }
        }
        CHECK(brute == 5632);
        const auto full = mars::anchor_augmented_plan(l, l.visual().indices(), std::nullopt);
        CHECK(model::score_entries(full, l.length()) == 128 * 208);
    }

    SUBCASE("locality is observable") {
        const SequenceLayout l(8, 2, 1, 2, 2, 31);
        Matrix q = fixtures::random_matrix(l.length(), 4, rng, 0.1);
        Matrix k = fixtures::random_matrix(l.length(), 4, rng, 0.1);
        const Matrix v = fixtures::random_matrix(l.length(), 4, rng);
        for (std::size_t c = 0; c < 4; ++c) {
            q(6, c) = c == 0 ? 10.0 : 0.0;
            k(0, c) = c == 0 ? 10.0 : 0.0;
        }
        const auto   vis   = l.visual().indices();
        const Matrix chunk = mars::chunk_attention(q.gather_rows(vis), k, v, l);
        const Matrix full  = model::attention(q.gather_rows(vis), k.gather_rows(vis), v.gather_rows(vis));
        double       d     = 0.0;
        for (std::size_t c = 0; c < 4; ++c) {
            d = std::max(d, std::abs(chunk(6, c) - full(6, c)));
        }
        CHECK(d > 1e-3);

        const Matrix aug = mars::anchor_augmented_attention(q, k, v, l, {0});
        const Matrix ref = model::attention(q, k, v);
        for (std::size_t c = 0; c < 4; ++c) {
            CHECK(std::abs(aug(6, c) - v(0, c)) <= 1e-6);
            CHECK(std::abs(ref(6, c) - v(0, c)) <= 1e-6);
        }
    }
}

TEST_CASE("anchor augmented attention degenerate cases") {
    auto rng = core::seeded_stream(22, "aug");
    const SequenceLayout l(8, 4, 3, 4, 4, 31);
    const auto           vis = l.visual().indices();
    for (int trial = 0; trial < 10; ++trial) {
        const Matrix q = fixtures::random_matrix(l.length(), 8, rng);
        const Matrix k = fixtures::random_matrix(l.length(), 8, rng);
        const Matrix v = fixtures::random_matrix(l.length(), 8, rng);
        CHECK(max_abs_diff(mars::anchor_augmented_attention(q, k, v, l, vis), model::attention(q, k, v)) <= 1e-12);
        const Matrix none  = mars::anchor_augmented_attention(q, k, v, l, {});
        const Matrix chunk = mars::chunk_attention(q.gather_rows(vis), k, v, l);
        CHECK(max_abs_diff(none.gather_rows(vis), chunk) <= 1e-12);
        const auto   rest = core::IndexRange{l.visual().end, l.length()}.indices();
        CHECK(max_abs_diff(none.gather_rows(rest), model::attention(q, k, v).gather_rows(rest)) <= 1e-12);
    }
    CHECK_THROWS_AS(mars::anchor_augmented_attention(Matrix(3, 8), Matrix(3, 8), Matrix(3, 8), l, {}), Error);
    const Matrix m(l.length(), 8, 0.1);
    CHECK_THROWS_AS(mars::anchor_augmented_attention(m, m, m, l, {40}), Error);
}

TEST_CASE("proxy scores") {
    auto                 rng = core::seeded_stream(23, "proxy");
    const SequenceLayout l(8, 16, 16, 64, 32, 255);
    const Matrix         q      = fixtures::random_matrix(l.length(), 32, rng);
    const Matrix         k      = fixtures::random_matrix(l.length(), 32, rng);
    const auto           sample = mars::equidistant_sample(l.length(), 32);
    CHECK(sample.size() == 32);
    CHECK(sample[1] == 6);
    const auto vis = l.visual().indices();
    const Matrix a = mars::proxy_scores(q, k, sample, vis);
    CHECK(a.rows() == 32);
    CHECK(a.cols() == 128);
    for (std::size_t i = 0; i < 32; ++i) {
        const auto   row = a.row(i);
        const double sum = std::accumulate(row.begin(), row.end(), 0.0);
        if (sample[i] < 128) {
            CHECK(a(i, sample[i]) == 0.0);
            CHECK(sum < 1.0);
        } else {
            CHECK(std::abs(sum - 1.0) <= 1e-12);
        }
    }
    const std::vector<std::size_t> text_only{150, 160};
    const Matrix                   b = mars::proxy_scores(q, k, text_only, vis);
    const Matrix ref = core::softmax_rows(
        [&] {
            Matrix s = core::matmul_transposed(q.gather_rows(text_only), k.gather_rows(vis));
            for (double & x : s.data()) {
                x /= std::sqrt(32.0);
            }
            return s;
        }());
    CHECK(max_abs_diff(b, ref) <= 1e-15);
    CHECK_THROWS_AS(mars::proxy_scores(q, k, {}, vis), Error);
    CHECK_THROWS_AS(mars::equidistant_sample(10, 0), Error);
    const Matrix mh = mars::proxy_scores_multihead(q, k, 4, sample, vis);
    CHECK(mh.rows() == 32);
    CHECK_THROWS_AS(mars::proxy_scores_multihead(q, k, 5, sample, vis), Error);
}

TEST_CASE("select anchors") {
    const SequenceLayout l(2, 3, 1, 4, 4, 31);
    const Matrix         crafted = Matrix::from_rows({{0.5, 0.1, 0.2, 0.05, 0.6, 0.05}});
    const std::vector<Matrix>                     per_group{crafted};
    const std::vector<std::optional<std::size_t>> one{1};
    const auto plan = mars::select_anchors(per_group, l, one, {0});
    REQUIRE(plan.groups.size() == 1);
    CHECK(plan.groups[0].all == std::vector<std::size_t>{0, 4});

    const Matrix uniform(4, 6, 0.25);
    auto frames = mars::select_frame_anchors(uniform, l, 2);
    CHECK(frames == std::vector<std::vector<std::size_t>>{{0, 1}, {3, 4}});
    frames = mars::select_frame_anchors(crafted, l, 3);
    CHECK(frames == std::vector<std::vector<std::size_t>>{{0, 1, 2}, {3, 4, 5}});
    CHECK_THROWS_AS(mars::select_frame_anchors(crafted, l, 4), Error);

    const std::vector<Matrix>                     two{crafted, crafted};
    const std::vector<std::optional<std::size_t>> mixed{std::nullopt, 1};
    const auto p2 = mars::select_anchors(two, l, mixed, {0, 3});
    CHECK(p2.groups[0].all.empty());
    CHECK(p2.groups[1].all.size() == 2);
    CHECK(p2.digest() == mars::select_anchors(two, l, mixed, {0, 3}).digest());
    CHECK(p2.digest() != plan.digest());
}

TEST_CASE("relocate anchors") {
    const SequenceLayout l(2, 3, 1, 4, 4, 31);
    CHECK(mars::relocate_anchors(l, {}).is_identity());
    const auto p = mars::relocate_anchors(l, {5, 1});
    CHECK(std::vector<std::size_t>(p.order().begin(), p.order().begin() + 6) ==
          std::vector<std::size_t>{1, 5, 0, 2, 3, 4});
    auto         rng = core::seeded_stream(3, "reloc");
    const Matrix m   = fixtures::random_matrix(l.length(), 3, rng);
    CHECK(p.restore_rows(p.apply_rows(m)) == m);
    CHECK_THROWS_AS(mars::relocate_anchors(l, {7}), Error);

    const auto   setup = fixtures::make_setup(fixtures::small_model(), 3, 4, 2, 4, 4, 12);
    const auto & sl    = setup->layout;
    const std::vector<model::TokenId> resp(4, sl.mask_token_id());
    const Matrix in   = diffusion::assemble_embeddings(setup->weights, sl, setup->visual, setup->prompt, resp);
    const auto   perm = mars::relocate_anchors(sl, {2, 5, 11});
    const auto   base = model::forward(setup->weights, in, sl.position_ids());
    const auto   moved = model::forward(setup->weights, perm.apply_rows(in), perm.apply(sl.position_ids()));
    CHECK(max_abs_diff(perm.restore_rows(moved.logits), base.logits) <= 1e-9);
}

namespace {

struct Run {
    diffusion::DecodeResult result;
    std::vector<Matrix>     logits;
};

Run run(const fixtures::Setup & s, const mars::EngineSpec & spec, const diffusion::DecodeConfig & d) {
    Run  r;
    auto eng = mars::make_engine(spec, s.context());
    r.result = diffusion::decode(*eng, s.layout, d,
                                 [&](const diffusion::StepRecord &, const Matrix & logits) { r.logits.push_back(logits); });
    return r;
}

mars::EngineSpec kind_spec(mars::EngineKind kind, bool rebuild = false) {
    mars::EngineSpec s;
    s.kind                   = kind;
    s.dual_rebuild_each_step = rebuild;
    return s;
}

}  // namespace

TEST_CASE("degenerate engines agree with vanilla") {
    const auto setup = fixtures::make_setup(fixtures::small_model(), 3, 4, 3, 16, 8, 17);
    diffusion::DecodeConfig d{16, 8, 8, 2, std::nullopt};
    const auto vanilla = run(*setup, kind_spec(mars::EngineKind::vanilla), d);
    const auto dual    = run(*setup, kind_spec(mars::EngineKind::dual_cache, true), d);
    const auto sat     = run(*setup, fixtures::mars_spec({1, 1, 1, 1}, {1, 1, 1, 1}, {4, 4, 4, 4}), d);
    auto       off_spec = fixtures::mars_spec({1, 1, 1, 1}, {1, 1, 1, 1}, {2, 2, 1, 1});
    off_spec.chunk_enabled = false;
    const auto off = run(*setup, off_spec, d);
    for (const auto * other : {&dual, &sat, &off}) {
        CHECK(other->result.tokens == vanilla.result.tokens);
        REQUIRE(other->logits.size() == vanilla.logits.size());
        for (std::size_t i = 0; i < vanilla.logits.size(); ++i) {
            CHECK(max_abs_diff(other->logits[i], vanilla.logits[i]) <= 1e-9);
        }
    }
}

TEST_CASE("dual cache recomputes only the active block after the first step") {
    const auto setup = fixtures::make_setup(fixtures::small_model(), 3, 4, 3, 16, 8, 18);
    diffusion::DecodeConfig d{16, 8, 8, 2, std::nullopt};
    const auto r = run(*setup, kind_spec(mars::EngineKind::dual_cache), d);
    const std::size_t L = setup->layout.length();
    for (const auto & s : r.result.trace.steps) {
        if (s.block_step == 1) {
            CHECK(s.report.full_recompute);
            CHECK(s.report.rows_recomputed == 4 * L);
            CHECK(s.report.score_entries == 4 * L * L);
        } else {
            CHECK_FALSE(s.report.full_recompute);
            CHECK(s.report.rows_recomputed == 4 * 8);
            CHECK(s.report.score_entries == 4 * 8 * L);
        }
    }
}

TEST_CASE("mars traces: refresh law, suffix property, anchor stability") {
    const auto setup = fixtures::make_setup(fixtures::small_model(), 4, 4, 3, 32, 16, 19);
    diffusion::DecodeConfig d{32, 16, 16, 2, std::nullopt};
    const auto spec = fixtures::mars_spec({8, 4, 2, 1}, {16, 8, 4, 2}, {std::nullopt, 3, 2, 2});
    const auto r    = run(*setup, spec, d);
    const auto & steps = r.result.trace.steps;
    REQUIRE(steps.size() == 16);
    CHECK(steps[0].report.full_recompute);
    std::vector<std::size_t> text(4, 0), visual(4, 0);
    for (const auto & s : steps) {
        CHECK(s.report.anchor_digest == steps[0].report.anchor_digest);
        if (s.step == 1) {
            continue;
        }
        for (std::size_t g = 0; g < 4; ++g) {
            text[g] += s.report.refresh_text[g];
            visual[g] += s.report.refresh_visual[g];
            if (g > 0) {
                CHECK((!s.report.refresh_text[g - 1] || s.report.refresh_text[g]));
                CHECK((!s.report.refresh_visual[g - 1] || s.report.refresh_visual[g]));
            }
        }
    }
    CHECK(steps[0].report.anchor_digest != 0);
    CHECK(text == std::vector<std::size_t>{2, 4, 8, 15});
    CHECK(visual == std::vector<std::size_t>{1, 2, 4, 8});

    mars::MarsEngine fresh(setup->context(), spec);
    const std::vector<model::TokenId> resp(32, setup->layout.mask_token_id());
    CHECK_THROWS_WITH(fresh.step(2, resp, 0), doctest::Contains("before initialization"));
    CHECK_FALSE(fresh.cache().initialized);
    fresh.step(1, resp, 0);
    CHECK(fresh.cache().initialized);
    REQUIRE(fresh.cache().anchors.has_value());
    CHECK(fresh.cache().anchors->groups[1].all.size() == 12);
    CHECK(fresh.cache().anchors->groups[3].all.size() == 8);
    CHECK(fresh.cache().anchors->digest() == steps[0].report.anchor_digest);
}

TEST_CASE("engine spec validation") {
    const auto cfg = fixtures::small_model();
    const SequenceLayout l(2, 4, 2, 8, 8, cfg.mask_token_id());
    CHECK_NOTHROW(fixtures::mars_spec({4, 2, 1, 1}, {4, 2, 2, 1}, {std::nullopt, 4, 2, 1}).validate(cfg, l));
    CHECK_THROWS_WITH(fixtures::mars_spec({4, 2, 1, 1}, {4, 2, 2, 1}, {2, 3, 2, 1}).validate(cfg, l),
                      doctest::Contains("must not increase"));
    CHECK_THROWS_WITH(fixtures::mars_spec({4, 2, 1, 1}, {4, 2, 2, 1}, {2, std::nullopt, 2, 1}).validate(cfg, l),
                      doctest::Contains("full attention in group 2"));
    CHECK_THROWS_AS(fixtures::mars_spec({4, 2, 1, 1}, {4, 2, 2, 1}, {5, 4, 2, 1}).validate(cfg, l), Error);
    CHECK_THROWS_AS(fixtures::mars_spec({4, 2, 1}, {4, 2, 1}, {4, 2, 1}).validate(cfg, l), Error);
    CHECK_THROWS_AS(fixtures::mars_spec({3, 2, 1, 1}, {4, 2, 2, 1}, {4, 2, 2, 1}).validate(cfg, l), Error);
    CHECK_THROWS_AS(kind_spec(mars::EngineKind::dual_cache).validate(fixtures::small_model(model::MaskMode::causal), l),
                    Error);
    CHECK(mars::parse_engine_kind("dual_cache") == mars::EngineKind::dual_cache);
    CHECK_THROWS_AS(mars::parse_engine_kind("turbo"), Error);
}

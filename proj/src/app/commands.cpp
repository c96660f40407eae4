#include "app/commands.hpp"

#include "analysis/cost.hpp"
#include "analysis/drift.hpp"
#include "analysis/entropy.hpp"
#include "analysis/relocation.hpp"
#include "analysis/visibility.hpp"
#include "core/error.hpp"
#include "diffusion/trace_io.hpp"
#include "model/snapshot.hpp"
#include "model/transformer.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <future>
#include <sstream>

namespace marscache::app {

namespace fs = std::filesystem;

namespace {

constexpr int kReportVersion = 1;

std::string fmt(const char * f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), f, v);
    return buf;
}

fs::path prepare_output(const RunConfig & config, CommandOutput & out) {
    const fs::path dir(config.output_dir);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) {
        fail(ErrorKind::io, "output_dir: cannot create " + dir.string() + ": " + ec.message());
    }
    const fs::path echo = dir / "config.resolved.json";
    std::ofstream  f(echo);
    f << to_json(config).dump(2) << "\n";
    if (!f) {
        fail(ErrorKind::io, "cannot write " + echo.string());
    }
    out.artifacts.push_back(echo.string());
    return dir;
}

void write_file(const fs::path & path, const std::string & content, CommandOutput & out) {
    std::ofstream f(path, std::ios::binary);
    f << content;
    if (!f) {
        fail(ErrorKind::io, "cannot write " + path.string());
    }
    out.artifacts.push_back(path.string());
}

// Versioned CSV: "# marscache.<name> v<version>" then the column header.
std::string csv_header(const std::string & name, const std::string & columns) {
    return "# marscache." + name + " v" + std::to_string(kReportVersion) + "\n" + columns + "\n";
}

std::string tokens_line(const std::vector<TokenId> & tokens) {
    std::string s;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        s += (i ? " " : "") + std::to_string(tokens[i]);
    }
    return s + "\n";
}

double tokens_per_sec(std::size_t tokens, double seconds) {
    return seconds > 0.0 ? static_cast<double>(tokens) / seconds : 0.0;
}

}  // namespace

std::string engine_name(const mars::EngineSpec & spec) {
    if (spec.kind == mars::EngineKind::mars && !spec.label.empty()) {
        return spec.label;
    }
    return mars::to_string(spec.kind);
}

EngineRun run_engine(const Workload & workload, const mars::EngineSpec & spec, const diffusion::DecodeConfig & decode,
                     const diffusion::StepObserver & observer) {
    auto       engine = mars::make_engine(spec, workload.context());
    const auto start  = std::chrono::steady_clock::now();
    EngineRun  run;
    run.result       = diffusion::decode(*engine, workload.layout, decode, observer);
    run.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return run;
}

CommandOutput cmd_decode(const RunConfig & config) {
    CommandOutput  out;
    const fs::path dir      = prepare_output(config, out);
    const auto     workload = build_workload(config);
    const auto &   spec     = config.engine.spec;
    EngineRun      run      = run_engine(*workload, spec, config.decode);

    // Recorded step costs must match the closed form.
    analysis::attention_cost(spec, config.model, workload->layout, run.result.trace);

    write_file(dir / "tokens.txt", tokens_line(run.result.tokens), out);
    std::ostringstream trace;
    diffusion::write_trace(run.result.trace, trace);
    write_file(dir / "trace.jsonl", trace.str(), out);
    if (config.save_weights) {
        model::save_weights(workload->weights, (dir / "weights.bin").string());
        out.artifacts.push_back((dir / "weights.bin").string());
    }

    const std::size_t n = run.result.tokens.size();
    out.summary = "decode engine=" + run.result.trace.engine + " tokens=" + std::to_string(n) +
                  " steps=" + std::to_string(run.result.trace.steps.size()) +
                  " wall_s=" + fmt("%.3f", run.wall_seconds) +
                  " tokens_per_sec=" + fmt("%.2f", tokens_per_sec(n, run.wall_seconds)) +
                  " total_score_entries=" + std::to_string(run.result.trace.total_score_entries());
    return out;
}

CommandOutput cmd_bench(const RunConfig & config) {
    if (config.engines.empty()) {
        fail(ErrorKind::config, "engines: bench needs at least one engine");
    }
    CommandOutput  out;
    const fs::path dir      = prepare_output(config, out);
    const auto     workload = build_workload(config);

    auto timed = [&](const mars::EngineSpec & spec) {
        EngineRun best;
        for (std::size_t r = 0; r < config.bench_repeats; ++r) {
            EngineRun run = run_engine(*workload, spec, config.decode);
            if (r == 0) {
                best = std::move(run);
            } else {
                if (run.result.tokens != best.result.tokens) {
                    fail(ErrorKind::check_failed, "bench: engine " + spec.label + " is not deterministic");
                }
                best.wall_seconds = std::min(best.wall_seconds, run.wall_seconds);
            }
        }
        analysis::attention_cost(spec, config.model, workload->layout, best.result.trace);
        return best;
    };

    std::vector<const EngineConfig *> rows;
    std::optional<std::size_t>        reference;
    for (std::size_t i = 0; i < config.engines.size(); ++i) {
        if (!reference && config.engines[i].spec.kind == mars::EngineKind::vanilla) {
            reference = i;
        }
        rows.push_back(&config.engines[i]);
    }
    EngineConfig vanilla;
    vanilla.spec.label = "vanilla";
    if (!reference) {
        rows.insert(rows.begin(), &vanilla);
        reference = 0;
    }

    std::vector<EngineRun> runs(rows.size());
    if (config.bench_parallel) {
        std::vector<std::future<EngineRun>> futures;
        for (const auto * e : rows) {
            futures.push_back(std::async(std::launch::async, timed, std::cref(e->spec)));
        }
        for (std::size_t i = 0; i < rows.size(); ++i) {
            runs[i] = futures[i].get();
        }
    } else {
        for (std::size_t i = 0; i < rows.size(); ++i) {
            runs[i] = timed(rows[i]->spec);
        }
    }

    const EngineRun & ref = runs[*reference];
    const double      ref_entries = static_cast<double>(ref.result.trace.total_score_entries());
    const double      ref_rows    = static_cast<double>(ref.result.trace.total_rows_recomputed());
    std::string       csv         = csv_header("bench",
                                               "engine,engine_kind,steps,wall_seconds,tokens_per_sec,total_score_entries,"
                                               "entry_ratio_vs_vanilla,rows_recomputed,row_ratio_vs_vanilla,"
                                               "token_agreement_vs_vanilla");
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto &      r       = runs[i];
        const std::size_t n       = r.result.tokens.size();
        std::size_t       agree   = 0;
        for (std::size_t p = 0; p < n; ++p) {
            agree += r.result.tokens[p] == ref.result.tokens[p];
        }
        const std::size_t entries = r.result.trace.total_score_entries();
        const std::size_t rrows   = r.result.trace.total_rows_recomputed();
        const double      tps     = tokens_per_sec(n, r.wall_seconds);
        const double      ratio   = static_cast<double>(entries) / ref_entries;
        const double      agreement = n ? static_cast<double>(agree) / static_cast<double>(n) : 1.0;
        csv += rows[i]->spec.label + "," + mars::to_string(rows[i]->spec.kind) + "," +
               std::to_string(r.result.trace.steps.size()) + "," + fmt("%.6f", r.wall_seconds) + "," +
               fmt("%.3f", tps) + "," + std::to_string(entries) + "," + fmt("%.9f", ratio) + "," +
               std::to_string(rrows) + "," + fmt("%.9f", static_cast<double>(rrows) / ref_rows) + "," +
               fmt("%.6f", agreement) + "\n";
        out.summary += (out.summary.empty() ? "" : "\n") + std::string("bench engine=") + rows[i]->spec.label +
                       " tokens_per_sec=" + fmt("%.2f", tps) + " total_score_entries=" + std::to_string(entries) +
                       " entry_ratio=" + fmt("%.6f", ratio) + " agreement=" + fmt("%.4f", agreement);
    }
    write_file(dir / "bench.csv", csv, out);
    return out;
}

const std::vector<std::string> & analyze_modes() {
    static const std::vector<std::string> modes{"drift", "sparsity", "visibility", "relocation", "cost"};
    return modes;
}

namespace {

CommandOutput analyze_drift(const RunConfig & config, const fs::path & dir, CommandOutput out) {
    const auto          workload = build_workload(config);
    const auto &        layout   = workload->layout;
    mars::VanillaEngine engine(workload->context());
    const auto          layers = analysis::group_boundary_layers(config.model);

    std::string csv = csv_header("drift", "step_a,step_b,scope,visual_mean,visual_median,text_mean,text_median,"
                                          "visual_le_text");
    std::optional<model::LayerActivations> prev;
    std::size_t                            prev_step = 0;
    std::size_t                            pairs = 0, ordered = 0;
    auto row = [&](std::size_t a, std::size_t b, const std::string & scope, const analysis::DriftRecord & d) {
        csv += std::to_string(a) + "," + std::to_string(b) + "," + scope + "," + fmt("%.9e", d.visual.mean) + "," +
               fmt("%.9e", d.visual.median) + "," + fmt("%.9e", d.text.mean) + "," + fmt("%.9e", d.text.median) +
               "," + (d.visual.mean <= d.text.mean ? "1" : "0") + "\n";
    };
    diffusion::decode(engine, layout, config.decode, [&](const diffusion::StepRecord & rec, const core::Matrix &) {
        const auto & acts = engine.last_forward().activations;
        if (prev) {
            const auto text = analysis::text_context_positions(layout, rec.block);
            const auto all  = analysis::drift(*prev, acts, layout, layers, text);
            row(prev_step, rec.step, "all", all);
            for (std::size_t l : layers) {
                const std::size_t one[] = {l};
                row(prev_step, rec.step, "layer" + std::to_string(l), analysis::drift(*prev, acts, layout, one, text));
            }
            ++pairs;
            ordered += all.visual.mean <= all.text.mean;
        }
        prev      = acts;
        prev_step = rec.step;
    });
    write_file(dir / "drift.csv", csv, out);
    out.summary = "analyze drift pairs=" + std::to_string(pairs) + " visual_le_text=" + std::to_string(ordered) +
                  " fraction=" + fmt("%.4f", pairs ? static_cast<double>(ordered) / static_cast<double>(pairs) : 0.0);
    return out;
}

CommandOutput analyze_sparsity(const RunConfig & config, const fs::path & dir, CommandOutput out) {
    const auto   workload = build_workload(config);
    const auto & layout   = workload->layout;
    const std::vector<TokenId> masked(layout.response().size(), layout.mask_token_id());
    const core::Matrix input = diffusion::assemble_embeddings(workload->weights, layout, workload->visual,
                                                              workload->prompt, masked);
    const auto fwd     = model::forward(workload->weights, input, layout.position_ids(), std::nullopt, true);
    const auto entropy = analysis::attention_entropy(fwd.attention);

    std::string csv = csv_header("sparsity", "layer,group,entropy_nats,uniform_entropy_nats");
    const double uniform = std::log(static_cast<double>(layout.length()));
    for (std::size_t l = 0; l < entropy.size(); ++l) {
        csv += std::to_string(l) + "," + std::to_string(config.model.group_of(l)) + "," + fmt("%.9f", entropy[l]) +
               "," + fmt("%.9f", uniform) + "\n";
    }
    write_file(dir / "sparsity.csv", csv, out);
    out.summary = "analyze sparsity layers=" + std::to_string(entropy.size());
    return out;
}

CommandOutput analyze_visibility(const RunConfig & config, const fs::path & dir, CommandOutput out) {
    const std::size_t T    = config.analysis.visibility_length;
    const auto        freq = analysis::visibility_frequency(T);
    const auto        mask = model::build_causal_mask(T);
    std::string       csv  = csv_header("visibility", "j,visibility");
    bool              ok   = true;
    for (std::size_t j = 0; j < T; ++j) {
        std::size_t zeros = 0;
        for (std::size_t i = 0; i < T; ++i) {
            zeros += mask(i, j) == 0.0;
        }
        ok = ok && zeros == freq[j];
        csv += std::to_string(j + 1) + "," + std::to_string(freq[j]) + "\n";
    }
    write_file(dir / "visibility.csv", csv, out);
    if (!ok) {
        fail(ErrorKind::check_failed, "visibility: formula disagrees with causal-mask column counts");
    }
    out.summary = "analyze visibility T=" + std::to_string(T) + " first=" + std::to_string(freq.front()) +
                  " last=" + std::to_string(freq.back());
    return out;
}

CommandOutput analyze_relocation(const RunConfig & config, const fs::path & dir, CommandOutput out) {
    constexpr double kTolerance = 1e-9;
    const auto       workload   = build_workload(config);
    const auto &     layout     = workload->layout;
    const std::vector<TokenId> masked(layout.response().size(), layout.mask_token_id());
    const auto exp = analysis::relocation_experiment(
        workload->weights, layout, workload->visual, workload->prompt, masked, config.analysis.relocation_k,
        config.analysis.relocation_factor, config.analysis.relocation_ratios,
        core::seeded_stream(config.seeds.workload, "relocation"));

    const std::string mode = model::to_string(config.model.mask_mode);
    std::string       csv  = csv_header("relocation", "mask_mode,k,factor,r,max_delta_vs_original,max_delta_vs_r0");
    double            worst = 0.0;
    for (const auto & r : exp.rows) {
        csv += mode + "," + std::to_string(config.analysis.relocation_k) + "," +
               fmt("%g", config.analysis.relocation_factor) + "," + fmt("%g", r.r) + "," +
               fmt("%.6e", r.max_delta_original) + "," + fmt("%.6e", r.max_delta_r0) + "\n";
        worst = std::max(worst, r.max_delta_original);
    }
    write_file(dir / "relocation.csv", csv, out);
    if (config.model.mask_mode == model::MaskMode::bidirectional && worst > kTolerance) {
        fail(ErrorKind::check_failed, "relocation: bidirectional logits moved by " + fmt("%.3e", worst));
    }
    out.summary = "analyze relocation mask_mode=" + mode + " max_delta=" + fmt("%.3e", worst);
    return out;
}

CommandOutput analyze_cost(const RunConfig & config, const fs::path & dir, CommandOutput out) {
    const auto & spec   = config.engine.spec;
    const auto   layout = config.make_layout();

    analysis::CostReport report;
    if (config.analysis.trace_path.empty()) {
        report = analysis::attention_cost(spec, config.model, layout, analysis::step_shapes(config.decode, layout));
    } else {
        std::ifstream in(config.analysis.trace_path);
        if (!in) {
            fail(ErrorKind::io, "analysis.trace_path: cannot open " + config.analysis.trace_path);
        }
        const auto trace = diffusion::read_trace(in);
        if (trace.engine != engine_name(spec)) {
            fail(ErrorKind::check_failed, "cost: trace was written by engine '" + trace.engine +
                                              "' but the config describes '" + engine_name(spec) + "'");
        }
        report = analysis::attention_cost(spec, config.model, layout, trace, false);
    }

    auto opt = [](const std::optional<std::size_t> & v) { return v ? std::to_string(*v) : std::string(); };
    auto delta = [](const std::optional<std::size_t> & rec, std::size_t ana) {
        return rec ? std::to_string(static_cast<long long>(*rec) - static_cast<long long>(ana)) : std::string();
    };
    std::string csv = csv_header("cost", "step,block,analytic_entries,recorded_entries,delta_entries,analytic_rows,"
                                         "recorded_rows,delta_rows");
    for (const auto & s : report.steps) {
        csv += std::to_string(s.step) + "," + std::to_string(s.block) + "," + std::to_string(s.analytic_entries) +
               "," + opt(s.recorded_entries) + "," + delta(s.recorded_entries, s.analytic_entries) + "," +
               std::to_string(s.analytic_rows) + "," + opt(s.recorded_rows) + "," +
               delta(s.recorded_rows, s.analytic_rows) + "\n";
    }
    write_file(dir / "cost.csv", csv, out);
    const auto bad = analysis::cost_mismatches(report);
    if (!bad.empty()) {
        fail(ErrorKind::check_failed, "cost: recorded counts differ from the closed form at " +
                                          std::to_string(bad.size()) + " step(s), first at step " +
                                          std::to_string(bad.front()));
    }
    out.summary = "analyze cost engine=" + report.engine + " total_entries=" + std::to_string(report.total_entries) +
                  " vanilla_entries=" + std::to_string(report.vanilla_entries) +
                  " entry_ratio=" + fmt("%.9f", report.entry_ratio_vs_vanilla) +
                  " row_ratio=" + fmt("%.9f", report.row_ratio_vs_vanilla);
    return out;
}

}  // namespace

CommandOutput cmd_analyze(const RunConfig & config, const std::string & mode) {
    const auto & modes = analyze_modes();
    if (std::find(modes.begin(), modes.end(), mode) == modes.end()) {
        std::string list;
        for (const auto & m : modes) {
            list += (list.empty() ? "" : ", ") + m;
        }
        fail(ErrorKind::invalid_argument, "analyze: unknown mode '" + mode + "' (valid: " + list + ")");
    }
    CommandOutput  out;
    const fs::path dir = prepare_output(config, out);
    if (mode == "drift") {
        return analyze_drift(config, dir, std::move(out));
    }
    if (mode == "sparsity") {
        return analyze_sparsity(config, dir, std::move(out));
    }
    if (mode == "visibility") {
        return analyze_visibility(config, dir, std::move(out));
    }
    if (mode == "relocation") {
        return analyze_relocation(config, dir, std::move(out));
    }
    return analyze_cost(config, dir, std::move(out));
}

}  // namespace marscache::app

#include "diffusion/decode.hpp"

#include "core/error.hpp"
#include "core/numeric.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

namespace marscache::diffusion {

namespace {

std::vector<std::size_t> even_split(std::size_t total, std::size_t parts) {
    std::vector<std::size_t> out(parts, total / parts);
    for (std::size_t i = 0; i < total % parts; ++i) {
        ++out[i];
    }
    return out;
}

std::size_t ceil_div(std::size_t a, std::size_t b) {
    return (a + b - 1) / b;
}

}  // namespace

std::vector<std::size_t> DecodeConfig::block_step_budget(const SequenceLayout & layout) const {
    const auto &             blocks = layout.blocks();
    std::vector<std::size_t> out;
    if (!confidence_threshold && tokens_per_step > 0) {
        for (const auto & b : blocks) {
            out.push_back(ceil_div(b.size(), tokens_per_step));
        }
        return out;
    }
    return even_split(num_steps, blocks.size());
}

void DecodeConfig::validate(const SequenceLayout & layout) const {
    if (generation_length != layout.response().size()) {
        fail(ErrorKind::config, "decode.generation_length: does not match the layout's response length");
    }
    if (block_length == 0 || block_length != layout.block_length()) {
        fail(ErrorKind::config, "decode.block_length: must be >= 1 and match the layout");
    }
    const std::size_t n_blocks = layout.blocks().size();
    if (num_steps < n_blocks) {
        fail(ErrorKind::config, "decode.num_steps: must be at least the number of blocks (" +
                                    std::to_string(n_blocks) + ")");
    }
    if (confidence_threshold) {
        if (!(*confidence_threshold > 0.0 && *confidence_threshold <= 1.0)) {
            fail(ErrorKind::config, "decode.confidence_threshold: must lie in (0, 1]");
        }
        return;
    }
    const auto budget = block_step_budget(layout);
    if (tokens_per_step > 0) {
        std::size_t needed = 0;
        for (std::size_t s : budget) {
            needed += s;
        }
        if (needed > num_steps) {
            fail(ErrorKind::config, "decode.num_steps: " + std::to_string(num_steps) + " steps cannot commit " +
                                        std::to_string(generation_length) + " tokens at " +
                                        std::to_string(tokens_per_step) + " per step (needs " +
                                        std::to_string(needed) + ")");
        }
        return;
    }
    for (std::size_t b = 0; b < n_blocks; ++b) {
        if (budget[b] > layout.blocks()[b].size()) {
            fail(ErrorKind::config, "decode.num_steps: more steps per block than tokens in block " + std::to_string(b));
        }
    }
}

std::size_t DecodeTrace::total_score_entries() const {
    std::size_t s = 0;
    for (const auto & r : steps) {
        s += r.report.score_entries;
    }
    return s;
}

std::size_t DecodeTrace::total_rows_recomputed() const {
    std::size_t s = 0;
    for (const auto & r : steps) {
        s += r.report.rows_recomputed;
    }
    return s;
}

std::uint64_t DecodeTrace::total_elapsed_ns() const {
    std::uint64_t s = 0;
    for (const auto & r : steps) {
        s += r.elapsed_ns;
    }
    return s;
}

DecodeResult decode(Denoiser & engine, const SequenceLayout & layout, const DecodeConfig & config,
                    const StepObserver & observer) {
    config.validate(layout);
    const TokenId     mask_id = layout.mask_token_id();
    const std::size_t offset  = layout.response().begin;
    const auto        budget  = config.block_step_budget(layout);

    DecodeResult result;
    result.tokens.assign(layout.response().size(), mask_id);
    result.trace.engine = engine.name();

    std::size_t t = 0;
    for (std::size_t b = 0; b < layout.blocks().size(); ++b) {
        const IndexRange block = layout.blocks()[b];
        std::vector<std::size_t> schedule;
        if (!config.confidence_threshold && config.tokens_per_step == 0) {
            schedule = even_split(block.size(), budget[b]);
        }
        for (std::size_t s = 0;; ++s) {
            std::vector<std::size_t> masked;
            for (std::size_t p = block.begin; p < block.end; ++p) {
                if (result.tokens[p - offset] == mask_id) {
                    masked.push_back(p - offset);
                }
            }
            if (masked.empty()) {
                break;
            }
            ++t;
            const auto start = std::chrono::steady_clock::now();
            StepOutput out   = engine.step(t, result.tokens, b);
            if (out.logits.rows() != block.size()) {
                fail(ErrorKind::state, "engine returned logits for the wrong number of rows");
            }
            std::vector<std::size_t> rows;
            for (std::size_t p : masked) {
                rows.push_back(p + offset - block.begin);
            }
            const core::Matrix probs = core::softmax_rows(out.logits.gather_rows(rows));

            UnmaskRule rule;
            if (config.confidence_threshold) {
                rule = UnmaskRule::above(*config.confidence_threshold);
                if (s + 1 >= budget[b]) {
                    rule = UnmaskRule::top(masked.size());
                }
            } else if (config.tokens_per_step > 0) {
                rule = UnmaskRule::top(config.tokens_per_step);
            } else {
                rule = UnmaskRule::top(schedule.at(s));
            }
            StepRecord record;
            record.committed = select_unmask(probs, masked, rule, mask_id);
            for (const Commit & c : record.committed) {
                result.tokens[c.position] = c.token;
            }
            const auto stop   = std::chrono::steady_clock::now();
            record.step       = t;
            record.block      = b;
            record.block_step = s + 1;
            record.report     = std::move(out.report);
            record.elapsed_ns = static_cast<std::uint64_t>(
                std::chrono::duration_cast<std::chrono::nanoseconds>(stop - start).count());
            result.trace.groups = std::max(result.trace.groups, record.report.refresh_text.size());
            if (observer) {
                observer(record, out.logits);
            }
            result.trace.steps.push_back(std::move(record));
            if (t > config.num_steps) {
                fail(ErrorKind::state, "decode exceeded num_steps");
            }
        }
    }
    return result;
}

}  // namespace marscache::diffusion

#include "model/transformer.hpp"

#include "core/error.hpp"
#include "core/numeric.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

namespace marscache::model {

using core::Matrix;

core::Matrix build_causal_mask(std::size_t length) {
    if (length == 0) {
        fail(ErrorKind::invalid_argument, "causal mask length must be >= 1");
    }
    Matrix m(length, length, 0.0);
    for (std::size_t i = 0; i < length; ++i) {
        for (std::size_t j = i + 1; j < length; ++j) {
            m(i, j) = core::kMasked;
        }
    }
    return m;
}

core::Matrix attention(const Matrix & q, const Matrix & k, const Matrix & v, const std::optional<Matrix> & mask) {
    if (q.cols() != k.cols()) {
        fail(ErrorKind::invalid_argument, "attention: Q and K widths differ");
    }
    if (k.rows() != v.rows()) {
        fail(ErrorKind::invalid_argument, "attention: K and V row counts differ");
    }
    Matrix       scores = matmul_transposed(q, k);
    const double scale  = 1.0 / std::sqrt(static_cast<double>(q.cols()));
    for (double & s : scores.data()) {
        s *= scale;
    }
    return matmul(core::softmax_rows(scores, mask), v);
}

std::size_t score_entries(const AttentionPlan & plan, std::size_t seq_len) {
    std::size_t total = 0;
    for (const auto & g : plan) {
        total += g.queries.size() * (g.all_keys ? seq_len : g.keys.size());
    }
    return total;
}

AttentionPlan plan_from_mask(const Matrix & mask) {
    AttentionPlan plan;
    plan.reserve(mask.rows());
    for (std::size_t r = 0; r < mask.rows(); ++r) {
        QueryGroup g;
        g.queries = {r};
        for (std::size_t c = 0; c < mask.cols(); ++c) {
            const double m = mask(r, c);
            if (m == 0.0) {
                g.keys.push_back(c);
            } else if (m != core::kMasked) {
                fail(ErrorKind::invalid_argument, "mask entries must be 0 or -inf");
            }
        }
        if (g.keys.empty()) {
            fail(ErrorKind::numeric, "fully masked row");
        }
        plan.push_back(std::move(g));
    }
    return plan;
}

AttentionPlan full_plan(std::size_t num_queries) {
    QueryGroup g;
    g.queries.resize(num_queries);
    for (std::size_t i = 0; i < num_queries; ++i) {
        g.queries[i] = i;
    }
    g.all_keys = true;
    return {std::move(g)};
}

namespace {

constexpr double kNormEps = 1e-6;

Matrix rms_norm(const Matrix & x, const std::vector<double> & gain) {
    Matrix out(x.rows(), x.cols());
    for (std::size_t r = 0; r < x.rows(); ++r) {
        auto   in = x.row(r);
        double ss = 0.0;
        for (double v : in) {
            ss += v * v;
        }
        const double inv = 1.0 / std::sqrt(ss / static_cast<double>(in.size()) + kNormEps);
        auto         dst = out.row(r);
        for (std::size_t c = 0; c < in.size(); ++c) {
            dst[c] = in[c] * inv * gain[c];
        }
    }
    return out;
}

double gelu(double x) {
    const double c = std::sqrt(2.0 / std::numbers::pi);
    return 0.5 * x * (1.0 + std::tanh(c * (x + 0.044715 * x * x * x)));
}

// In-place rotary phase on every head of each row.
void apply_rotary(Matrix & x, std::span<const std::size_t> rows, std::span<const std::size_t> position_ids,
                  std::size_t num_heads, std::size_t head_dim, double base) {
    const std::size_t   half = head_dim / 2;
    std::vector<double> inv_freq(half);
    for (std::size_t i = 0; i < half; ++i) {
        inv_freq[i] = std::pow(base, -2.0 * static_cast<double>(i) / static_cast<double>(head_dim));
    }
    for (std::size_t r = 0; r < rows.size(); ++r) {
        const double pos = static_cast<double>(position_ids[rows[r]]);
        auto         row = x.row(r);
        for (std::size_t i = 0; i < half; ++i) {
            const double angle = pos * inv_freq[i];
            const double c     = std::cos(angle);
            const double s     = std::sin(angle);
            for (std::size_t h = 0; h < num_heads; ++h) {
                double &     a  = row[h * head_dim + 2 * i];
                double &     b  = row[h * head_dim + 2 * i + 1];
                const double a0 = a;
                a               = a0 * c - b * s;
                b               = a0 * s + b * c;
            }
        }
    }
}

// Attends one query row of one head over `keys` (or all keys).
void attend_row(const double * q, const LayerKV & kv, const QueryGroup & group, std::size_t head_offset,
                std::size_t head_dim, double scale, std::vector<double> & scores, double * out, double * probs_row) {
    const std::size_t seq_len = kv.keys.rows();
    const std::size_t n       = group.all_keys ? seq_len : group.keys.size();
    if (n == 0) {
        fail(ErrorKind::numeric, "fully masked row");
    }
    scores.resize(n);
    double peak = core::kMasked;
    for (std::size_t j = 0; j < n; ++j) {
        const std::size_t key = group.all_keys ? j : group.keys[j];
        const double *    kr  = kv.keys.row(key).data() + head_offset;
        double            dot = 0.0;
        for (std::size_t c = 0; c < head_dim; ++c) {
            dot += q[c] * kr[c];
        }
        scores[j] = dot * scale;
        peak      = std::max(peak, scores[j]);
    }
    double total = 0.0;
    for (double & s : scores) {
        s = std::exp(s - peak);
        total += s;
    }
    std::fill(out, out + head_dim, 0.0);
    for (std::size_t j = 0; j < n; ++j) {
        const std::size_t key = group.all_keys ? j : group.keys[j];
        const double      p   = scores[j] / total;
        const double *    vr  = kv.values.row(key).data() + head_offset;
        for (std::size_t c = 0; c < head_dim; ++c) {
            out[c] += p * vr[c];
        }
        if (probs_row != nullptr) {
            probs_row[key] = p;
        }
    }
}

}  // namespace

core::Matrix planned_attention(const Matrix & q, const Matrix & k, const Matrix & v, const AttentionPlan & plan) {
    if (q.cols() != k.cols() || k.rows() != v.rows() || k.cols() != v.cols()) {
        fail(ErrorKind::invalid_argument, "planned_attention: shape mismatch");
    }
    const LayerKV       kv{k, v};
    const double        scale = 1.0 / std::sqrt(static_cast<double>(q.cols()));
    Matrix              out(q.rows(), v.cols());
    std::vector<double> scores;
    for (const QueryGroup & group : plan) {
        for (std::size_t local : group.queries) {
            if (local >= q.rows()) {
                fail(ErrorKind::invalid_argument, "attention plan references a row outside the batch");
            }
            attend_row(q.row(local).data(), kv, group, 0, q.cols(), scale, scores, out.row(local).data(), nullptr);
        }
    }
    return out;
}

core::Matrix run_layer(const Weights & weights, std::size_t layer, const Matrix & hidden,
                       std::span<const std::size_t> rows, std::span<const std::size_t> position_ids, LayerKV & kv,
                       const AttentionPlan & plan, LayerCapture * capture) {
    const ModelConfig &  cfg = weights.config;
    const LayerWeights & lw  = weights.layers.at(layer);
    const std::size_t    seq_len = position_ids.size();
    if (hidden.rows() != rows.size() || hidden.cols() != cfg.model_dim) {
        fail(ErrorKind::invalid_argument, "run_layer: hidden shape does not match rows");
    }
    if (kv.keys.rows() != seq_len || kv.keys.cols() != cfg.model_dim) {
        kv.keys   = Matrix(seq_len, cfg.model_dim);
        kv.values = Matrix(seq_len, cfg.model_dim);
    }

    const Matrix normed = rms_norm(hidden, lw.attn_gain);
    Matrix       q      = matmul(normed, lw.wq);
    Matrix       k      = matmul(normed, lw.wk);
    const Matrix v      = matmul(normed, lw.wv);
    apply_rotary(q, rows, position_ids, cfg.num_heads, cfg.head_dim, cfg.rope_base);
    apply_rotary(k, rows, position_ids, cfg.num_heads, cfg.head_dim, cfg.rope_base);
    kv.keys.scatter_rows(rows, k);
    kv.values.scatter_rows(rows, v);

    if (capture != nullptr && capture->want_probs) {
        capture->head_probs.assign(cfg.num_heads, Matrix(rows.size(), seq_len));
    }

    const double        scale = 1.0 / std::sqrt(static_cast<double>(cfg.head_dim));
    Matrix              attn(rows.size(), cfg.model_dim);
    std::vector<double> scores;
    std::vector<bool>   covered(rows.size(), false);
    for (const QueryGroup & group : plan) {
        for (std::size_t local : group.queries) {
            if (local >= rows.size()) {
                fail(ErrorKind::invalid_argument, "attention plan references a row outside the batch");
            }
            covered[local] = true;
            for (std::size_t h = 0; h < cfg.num_heads; ++h) {
                const std::size_t off   = h * cfg.head_dim;
                double *          probs = nullptr;
                if (capture != nullptr && capture->want_probs) {
                    probs = capture->head_probs[h].row(local).data();
                }
                attend_row(q.row(local).data() + off, kv, group, off, cfg.head_dim, scale, scores,
                           attn.row(local).data() + off, probs);
            }
        }
    }
    if (std::find(covered.begin(), covered.end(), false) != covered.end()) {
        fail(ErrorKind::invalid_argument, "attention plan leaves a row without keys");
    }

    Matrix out = matmul(attn, lw.wo);
    for (std::size_t i = 0; i < out.data().size(); ++i) {
        out.data()[i] += hidden.data()[i];
    }
    Matrix up = matmul(rms_norm(out, lw.ffn_gain), lw.w_up);
    for (double & x : up.data()) {
        x = gelu(x);
    }
    const Matrix down = matmul(up, lw.w_down);
    for (std::size_t i = 0; i < out.data().size(); ++i) {
        out.data()[i] += down.data()[i];
    }

    if (capture != nullptr && capture->want_queries) {
        capture->queries = std::move(q);
    }
    return out;
}

core::Matrix output_logits(const Weights & weights, const Matrix & hidden) {
    return matmul(rms_norm(hidden, weights.final_gain), weights.output_head);
}

core::Matrix embed_tokens(const Weights & weights, std::span<const TokenId> tokens) {
    std::vector<std::size_t> idx(tokens.size());
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        if (tokens[i] >= weights.config.vocab_size) {
            fail(ErrorKind::invalid_argument, "token id " + std::to_string(tokens[i]) + " outside vocabulary");
        }
        idx[i] = tokens[i];
    }
    return weights.token_embedding.gather_rows(idx);
}

ForwardResult forward(const Weights & weights, const Matrix & embeddings, std::span<const std::size_t> position_ids,
                      const std::optional<Matrix> & mask, bool capture_attention) {
    const ModelConfig & cfg = weights.config;
    const std::size_t   n   = embeddings.rows();
    if (n == 0 || position_ids.size() != n) {
        fail(ErrorKind::invalid_argument, "forward: embeddings rows (" + std::to_string(n) +
                                              ") must equal position_ids length (" +
                                              std::to_string(position_ids.size()) + ")");
    }
    if (embeddings.cols() != cfg.model_dim) {
        fail(ErrorKind::invalid_argument, "forward: embedding width does not match model_dim");
    }
    if (mask && (mask->rows() != n || mask->cols() != n)) {
        fail(ErrorKind::invalid_argument, "forward: mask shape does not match sequence length");
    }

    AttentionPlan plan;
    if (mask) {
        plan = plan_from_mask(*mask);
    } else if (cfg.mask_mode == MaskMode::causal) {
        plan = plan_from_mask(build_causal_mask(n));
    } else {
        plan = full_plan(n);
    }

    std::vector<std::size_t> rows(n);
    for (std::size_t i = 0; i < n; ++i) {
        rows[i] = i;
    }

    ForwardResult result;
    result.activations.hidden.reserve(cfg.num_layers + 1);
    result.activations.hidden.push_back(embeddings);
    Matrix h = embeddings;
    for (std::size_t l = 0; l < cfg.num_layers; ++l) {
        LayerKV      kv;
        LayerCapture capture;
        capture.want_probs = capture_attention;
        h = run_layer(weights, l, h, rows, position_ids, kv, plan, capture_attention ? &capture : nullptr);
        result.activations.hidden.push_back(h);
        result.activations.keys.push_back(std::move(kv.keys));
        result.activations.values.push_back(std::move(kv.values));
        if (capture_attention) {
            result.attention.push_back(std::move(capture.head_probs));
        }
    }
    result.logits = output_logits(weights, h);
    if (!result.logits.all_finite()) {
        fail(ErrorKind::numeric, "forward produced non-finite logits");
    }
    return result;
}

}  // namespace marscache::model

#pragma once

#include "core/matrix.hpp"
#include "model/weights.hpp"

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

namespace marscache::model {

// Additive causal mask: 0 where key <= query, -inf above the diagonal.
core::Matrix build_causal_mask(std::size_t length);

// Single-head Softmax(Q K^T / sqrt(d_k) + mask) V with a dense additive mask.
core::Matrix attention(const core::Matrix & q, const core::Matrix & k, const core::Matrix & v,
                       const std::optional<core::Matrix> & mask = std::nullopt);

// Queries that share one key set. `queries` index rows of the batch being
// computed; `keys` are absolute sequence positions, ignored when all_keys.
struct QueryGroup {
    std::vector<std::size_t> queries;
    std::vector<std::size_t> keys;
    bool                     all_keys = false;
};

using AttentionPlan = std::vector<QueryGroup>;

// One Q.K dot product per (query, visible key) pair, for a single head.
std::size_t score_entries(const AttentionPlan & plan, std::size_t seq_len);

// Plan equivalent to a dense additive mask (one group per row).
AttentionPlan plan_from_mask(const core::Matrix & mask);
AttentionPlan full_plan(std::size_t num_queries);

// Single-head attention following `plan`: row i of q attends over the rows
// of k/v its group lists. One output row per row of q.
core::Matrix planned_attention(const core::Matrix & q, const core::Matrix & k, const core::Matrix & v,
                               const AttentionPlan & plan);

// Per-layer key/value store over the whole sequence. Keys carry rotary phase.
struct LayerKV {
    core::Matrix keys;
    core::Matrix values;
};

// Optional side outputs of run_layer.
struct LayerCapture {
    bool                      want_queries = false;
    bool                      want_probs   = false;
    core::Matrix              queries;     // rows x model_dim, rotated
    std::vector<core::Matrix> head_probs;  // per head: rows x seq_len, zero off-plan
};

// Runs one pre-norm block for the batch `rows` (absolute positions, hidden
// holds their input states). Their keys/values are written into `kv` first,
// then each query group attends over `kv` as the plan dictates.
core::Matrix run_layer(const Weights & weights, std::size_t layer, const core::Matrix & hidden,
                       std::span<const std::size_t> rows, std::span<const std::size_t> position_ids, LayerKV & kv,
                       const AttentionPlan & plan, LayerCapture * capture = nullptr);

// Final RMS norm and vocabulary projection.
core::Matrix output_logits(const Weights & weights, const core::Matrix & hidden);

core::Matrix embed_tokens(const Weights & weights, std::span<const TokenId> tokens);

struct LayerActivations {
    // hidden[l] is the input to layer l; hidden[num_layers] is the final output.
    std::vector<core::Matrix> hidden;
    std::vector<core::Matrix> keys;
    std::vector<core::Matrix> values;
};

struct ForwardResult {
    core::Matrix                           logits;
    LayerActivations                       activations;
    std::vector<std::vector<core::Matrix>> attention;  // [layer][head], only when captured
};

// Full forward pass. Positions enter only through rotary phase on Q and K, so
// reordering rows together with position_ids reorders the outputs. Without an
// explicit mask the config's mask_mode decides between causal and full.
ForwardResult forward(const Weights & weights, const core::Matrix & embeddings,
                      std::span<const std::size_t> position_ids, const std::optional<core::Matrix> & mask = std::nullopt,
                      bool capture_attention = false);

}  // namespace marscache::model

#include "app/workload.hpp"

#include "core/error.hpp"
#include "core/random.hpp"
#include "diffusion/synthetic.hpp"
#include "model/snapshot.hpp"

namespace marscache::app {

std::unique_ptr<Workload> build_workload(const RunConfig & config) {
    model::Weights weights;
    if (config.weights_path.empty()) {
        weights = model::init_weights(config.model, config.seeds.weights);
    } else {
        weights = model::load_weights(config.weights_path);
    }
    return build_workload(config, std::move(weights));
}

std::unique_ptr<Workload> build_workload(const RunConfig & config, model::Weights weights) {
    const auto & m = weights.config;
    if (m.num_layers != config.model.num_layers || m.model_dim != config.model.model_dim ||
        m.num_heads != config.model.num_heads || m.vocab_size != config.model.vocab_size ||
        m.group_boundaries != config.model.group_boundaries || m.mask_mode != config.model.mask_mode) {
        fail(ErrorKind::config, "model: weights do not match the run's model section");
    }
    auto layout = config.make_layout();
    auto root   = core::seeded_stream(config.seeds.workload, "workload");
    auto visual = diffusion::synthetic_visual_embeddings(layout, config.model.model_dim, config.visual_scale,
                                                         root.child("visual"));
    auto prompt = diffusion::synthetic_prompt(layout.prompt().size(), layout.mask_token_id(), root.child("prompt"));
    return std::make_unique<Workload>(
        Workload{std::move(weights), std::move(layout), std::move(visual), std::move(prompt)});
}

}  // namespace marscache::app

#pragma once

#include "app/run_config.hpp"
#include "core/matrix.hpp"
#include "mars/engines.hpp"
#include "model/weights.hpp"

#include <memory>
#include <vector>

namespace marscache::app {

// Weights, layout and conditioning inputs shared by every engine of a run.
struct Workload {
    model::Weights            weights;
    diffusion::SequenceLayout layout;
    core::Matrix              visual;
    std::vector<TokenId>      prompt;

    mars::DecodeContext context() const { return {&weights, &layout, &visual, prompt}; }
};

// Weights come from the snapshot at weights_path when set, otherwise from
// seeds.weights. Visual embeddings and prompt come from seeds.workload.
std::unique_ptr<Workload> build_workload(const RunConfig & config);
std::unique_ptr<Workload> build_workload(const RunConfig & config, model::Weights weights);

}  // namespace marscache::app

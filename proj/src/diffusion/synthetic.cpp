#include "diffusion/synthetic.hpp"

#include <cmath>

namespace marscache::diffusion {

namespace {

std::vector<double> gaussian_vector(core::RandomStream & rng, std::size_t n) {
    std::vector<double> v(n);
    for (double & x : v) {
        x = rng.next_gaussian();
    }
    return v;
}

}  // namespace

core::Matrix synthetic_visual_embeddings(const SequenceLayout & layout, std::size_t model_dim, double scale,
                                         core::RandomStream rng) {
    constexpr double kScene   = 0.5;
    constexpr double kSpatial = 0.6;
    constexpr double kMotion  = 0.4;
    constexpr double kNoise   = 0.3;
    const double     norm     = std::sqrt(kScene * kScene + kSpatial * kSpatial + kMotion * kMotion + kNoise * kNoise);

    core::RandomStream               scene_rng   = rng.child("scene");
    core::RandomStream               spatial_rng = rng.child("spatial");
    core::RandomStream               motion_rng  = rng.child("motion");
    core::RandomStream               noise_rng   = rng.child("noise");
    const std::vector<double>        scene       = gaussian_vector(scene_rng, model_dim);
    std::vector<std::vector<double>> spatial;
    for (std::size_t p = 0; p < layout.patches_per_frame(); ++p) {
        spatial.push_back(gaussian_vector(spatial_rng, model_dim));
    }

    core::Matrix        out(layout.visual().size(), model_dim);
    std::vector<double> motion = gaussian_vector(motion_rng, model_dim);
    for (std::size_t n = 0; n < layout.num_frames(); ++n) {
        if (n > 0) {
            for (double & m : motion) {
                m = 0.8 * m + 0.6 * motion_rng.next_gaussian();
            }
        }
        const auto frame = layout.frames()[n];
        for (std::size_t p = 0; p < frame.size(); ++p) {
            auto row = out.row(frame.begin - layout.visual().begin + p);
            for (std::size_t c = 0; c < model_dim; ++c) {
                const double v = kScene * scene[c] + kSpatial * spatial[p][c] + kMotion * motion[c] +
                                 kNoise * noise_rng.next_gaussian();
                row[c] = scale * v / norm;
            }
        }
    }
    return out;
}

std::vector<TokenId> synthetic_prompt(std::size_t length, TokenId mask_token_id, core::RandomStream rng) {
    std::vector<TokenId> out(length);
    for (auto & t : out) {
        t = static_cast<TokenId>(rng.next_below(mask_token_id));
    }
    return out;
}

}  // namespace marscache::diffusion

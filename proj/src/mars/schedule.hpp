#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace marscache::mars {

enum class Modality { visual, text };

std::string to_string(Modality m);

// Refresh interval per (layer group, modality). Groups are ordered shallow to
// deep; "text" covers every non-visual context position.
struct RefreshSchedule {
    std::vector<std::size_t> tau_text;
    std::vector<std::size_t> tau_visual;

    static RefreshSchedule uniform(std::size_t groups, std::size_t tau);

    std::size_t groups() const noexcept { return tau_text.size(); }
    std::size_t tau(std::size_t group, Modality m) const;
};

// Accepts iff every interval is positive, each shallower interval is an exact
// multiple of the next deeper one (per modality) and visual intervals are never
// shorter than text ones. Throws Error(config) naming the offending pair with
// 1-based group numbers.
void validate_schedule(const RefreshSchedule & schedule);

// t mod tau == 0. Step 1 is the engine's forced initialization and is handled
// by the caller.
bool refresh_due(std::size_t t, std::size_t tau);
bool refresh_due(std::size_t t, std::size_t group, Modality m, const RefreshSchedule & schedule);

}  // namespace marscache::mars

#include "mars/schedule.hpp"

#include "core/error.hpp"

namespace marscache::mars {

std::string to_string(Modality m) {
    return m == Modality::visual ? "visual" : "text";
}

RefreshSchedule RefreshSchedule::uniform(std::size_t groups, std::size_t tau) {
    return {std::vector<std::size_t>(groups, tau), std::vector<std::size_t>(groups, tau)};
}

std::size_t RefreshSchedule::tau(std::size_t group, Modality m) const {
    const auto & v = m == Modality::visual ? tau_visual : tau_text;
    if (group >= v.size()) {
        fail(ErrorKind::invalid_argument, "refresh schedule has no group " + std::to_string(group + 1));
    }
    return v[group];
}

void validate_schedule(const RefreshSchedule & schedule) {
    auto name = [](std::size_t g, Modality m) {
        return "tau(g=" + std::to_string(g + 1) + "," + to_string(m) + ")";
    };
    if (schedule.tau_text.empty()) {
        fail(ErrorKind::config, "refresh schedule: at least one group required");
    }
    if (schedule.tau_visual.size() != schedule.tau_text.size()) {
        fail(ErrorKind::config, "refresh schedule: tau_text and tau_visual must list the same number of groups");
    }
    for (Modality m : {Modality::text, Modality::visual}) {
        for (std::size_t g = 0; g < schedule.groups(); ++g) {
            const std::size_t tau = schedule.tau(g, m);
            if (tau == 0) {
                fail(ErrorKind::config, "refresh schedule: " + name(g, m) + " must be positive");
            }
            if (g > 0) {
                const std::size_t shallow = schedule.tau(g - 1, m);
                if (shallow % tau != 0) {
                    fail(ErrorKind::config, "refresh schedule: " + name(g - 1, m) + "=" + std::to_string(shallow) +
                                                " is not an integer multiple of " + name(g, m) + "=" +
                                                std::to_string(tau));
                }
            }
        }
    }
    for (std::size_t g = 0; g < schedule.groups(); ++g) {
        if (schedule.tau_visual[g] < schedule.tau_text[g]) {
            fail(ErrorKind::config, "refresh schedule: " + name(g, Modality::visual) + "=" +
                                        std::to_string(schedule.tau_visual[g]) + " is shorter than " +
                                        name(g, Modality::text) + "=" + std::to_string(schedule.tau_text[g]));
        }
    }
}

bool refresh_due(std::size_t t, std::size_t tau) {
    if (t == 0 || tau == 0) {
        fail(ErrorKind::invalid_argument, "refresh_due: step and interval must be >= 1");
    }
    return t % tau == 0;
}

bool refresh_due(std::size_t t, std::size_t group, Modality m, const RefreshSchedule & schedule) {
    return refresh_due(t, schedule.tau(group, m));
}

}  // namespace marscache::mars

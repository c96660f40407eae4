#pragma once

#include <cstdint>
#include <string_view>

namespace marscache::core {

// Counter-based stream: draw i is a pure function of (key, i), where the key
// is derived from (seed, label). Streams never share state, so the order in
// which independent streams are consumed does not affect any of them.
class RandomStream {
  public:
    RandomStream(std::uint64_t seed, std::string_view label);

    std::uint64_t next_u64() noexcept;
    // Uniform in [0, 1) with 53 bits of precision.
    double        next_uniform() noexcept;
    double        next_gaussian() noexcept;
    // Uniform integer in [0, bound). bound must be positive.
    std::uint64_t next_below(std::uint64_t bound) noexcept;

    // Independent stream keyed by this stream's key and `label`.
    RandomStream child(std::string_view label) const;

    std::uint64_t seed() const noexcept { return seed_; }
    std::uint64_t position() const noexcept { return position_; }

  private:
    RandomStream(std::uint64_t seed, std::uint64_t key) : seed_(seed), key_(key) {}

    std::uint64_t seed_;
    std::uint64_t key_;
    std::uint64_t position_ = 0;
};

RandomStream seeded_stream(std::uint64_t seed, std::string_view label);

}  // namespace marscache::core

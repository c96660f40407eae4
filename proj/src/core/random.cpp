#include "core/random.hpp"

#include <cmath>
#include <numbers>

namespace marscache::core {

namespace {

constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

// SplitMix64 finalizer.
std::uint64_t mix64(std::uint64_t z) noexcept {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// FNV-1a
std::uint64_t hash_label(std::string_view label) noexcept {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : label) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::uint64_t derive_key(std::uint64_t parent, std::string_view label) noexcept {
    return mix64(mix64(parent + kGolden) ^ hash_label(label));
}

}  // namespace

RandomStream::RandomStream(std::uint64_t seed, std::string_view label) : seed_(seed), key_(derive_key(seed, label)) {}

std::uint64_t RandomStream::next_u64() noexcept {
    ++position_;
    return mix64(key_ + position_ * kGolden);
}

double RandomStream::next_uniform() noexcept {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double RandomStream::next_gaussian() noexcept {
    // Box-Muller; the (0, 1] shift keeps log finite.
    const double u1 = 1.0 - next_uniform();
    const double u2 = next_uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::uint64_t RandomStream::next_below(std::uint64_t bound) noexcept {
    // Lemire's multiply-shift; the bias is below 2^-64 * bound and irrelevant here.
    const unsigned __int128 m = static_cast<unsigned __int128>(next_u64()) * bound;
    return static_cast<std::uint64_t>(m >> 64);
}

RandomStream RandomStream::child(std::string_view label) const {
    return RandomStream(seed_, derive_key(key_, label));
}

RandomStream seeded_stream(std::uint64_t seed, std::string_view label) {
    return RandomStream(seed, label);
}

}  // namespace marscache::core

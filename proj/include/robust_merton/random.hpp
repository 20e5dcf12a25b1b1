#pragma once

// Counter-based random streams. Stream k of master seed s is a pure function of
// (s, k), so Monte Carlo results do not depend on how paths are scheduled.

#include <cstdint>
#include <limits>

namespace robust_merton {

namespace detail {

inline constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

/// SplitMix64 finaliser.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

}  // namespace detail

/// UniformRandomBitGenerator whose i-th output is mix64(key + (i+1) * golden).
class CounterStream {
public:
    using result_type = std::uint64_t;

    constexpr CounterStream(std::uint64_t seed, std::uint64_t stream) noexcept
        : key_(detail::mix64(seed ^ detail::mix64(stream + detail::kGolden))) {}

    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

    constexpr result_type operator()() noexcept {
        ++counter_;
        return detail::mix64(key_ + counter_ * detail::kGolden);
    }

private:
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
};

}  // namespace robust_merton

#pragma once

#include <cstdint>
#include <limits>

namespace fracweak {

/// Counter-based generator: the n-th output is a SplitMix64 finalizer applied to
/// key + n * golden_gamma, with the key derived from (seed, stream, row). Any
/// (seed, stream, row) triple can be regenerated independently of the others,
/// which is what makes path batches schedule-independent.
class CounterRng {
public:
    using result_type = std::uint64_t;

    CounterRng(std::uint64_t seed, std::uint64_t stream, std::uint64_t row) noexcept
        : key_(mix(mix(mix(seed) ^ (stream + 0x632be59bd9b4e019ULL)) ^ (row + 0x8cb92ba72f3d8dd7ULL))) {}

    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

    result_type operator()() noexcept {
        ++counter_;
        return mix(key_ + counter_ * kGamma);
    }

private:
    static constexpr std::uint64_t kGamma = 0x9e3779b97f4a7c15ULL;

    static constexpr std::uint64_t mix(std::uint64_t z) noexcept {
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    std::uint64_t key_;
    std::uint64_t counter_ = 0;
};

}  // namespace fracweak

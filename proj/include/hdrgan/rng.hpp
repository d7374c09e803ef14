#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace hdrgan {

// SplitMix64 (Steele, Lea & Flood 2014). Chosen so shuffles and initialisation
// are reproducible bit-for-bit in any language: state += 0x9E3779B97F4A7C15,
// then the standard xor-shift-multiply finaliser.
class Rng {
public:
    explicit Rng(std::uint64_t seed = 0) noexcept : state_(seed) {}

    std::uint64_t next_u64() noexcept {
        std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    // Uniform in [0, 1) with 53 bits of precision.
    double uniform() noexcept { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }
    double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }
    // Uniform integer in [0, n) by rejection.
    std::uint64_t below(std::uint64_t n) noexcept;
    // Standard normal via Box-Muller (one draw per call, no caching).
    double normal() noexcept;

    std::uint64_t state() const noexcept { return state_; }
    void set_state(std::uint64_t s) noexcept { state_ = s; }

private:
    std::uint64_t state_;
};

// Mixes two values into an independent stream seed.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) noexcept;

// Fisher-Yates permutation of [0, n) driven by Rng(seed).
std::vector<std::size_t> shuffled_indices(std::size_t n, std::uint64_t seed);

}  // namespace hdrgan

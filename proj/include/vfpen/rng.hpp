#pragma once

#include <cmath>
#include <cstdint>
#include <utility>
#include <vector>

namespace vfpen {

// All randomised operations draw from splitmix64 so that index structures are
// bit-identical across platforms and reruns. Child seeds are derived from a
// parent seed, a stream tag and a counter; the scheme below is the only source
// of randomness in the library.

inline constexpr std::uint64_t golden_gamma = 0x9E3779B97F4A7C15ull;

constexpr std::uint64_t mix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

// child = mix(parent ^ mix(stream * gamma + index + 1))
constexpr std::uint64_t derive_seed(std::uint64_t parent, std::uint64_t stream,
                                    std::uint64_t index) {
    return mix64(parent ^ mix64(stream * golden_gamma + index + 1));
}

namespace seed_stream {
inline constexpr std::uint64_t realisation = 1;
inline constexpr std::uint64_t subsample = 2;
inline constexpr std::uint64_t folds = 3;
inline constexpr std::uint64_t synthetic = 4;
inline constexpr std::uint64_t selection = 5;
inline constexpr std::uint64_t dataset = 6;
inline constexpr std::uint64_t monte_carlo = 7;
}  // namespace seed_stream

class SplitMix64 {
public:
    explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        state_ += golden_gamma;
        return mix64(state_);
    }

    // Unbiased integer in [0, bound); bound must be positive.
    std::uint64_t next_below(std::uint64_t bound) {
        const std::uint64_t threshold = (0 - bound) % bound;
        for (;;) {
            const std::uint64_t r = next_u64();
            if (r >= threshold) return r % bound;
        }
    }

    // Uniform in [0, 1) with 53 bits.
    double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // Standard normal via Box-Muller; the second variate is cached.
    double next_gaussian() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = next_double();
        while (u1 <= 0.0) u1 = next_double();
        const double u2 = next_double();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 2.0 * 3.14159265358979323846 * u2;
        spare_ = r * std::sin(theta);
        has_spare_ = true;
        return r * std::cos(theta);
    }

    // Fisher-Yates shuffle.
    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            const std::size_t j = static_cast<std::size_t>(next_below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    std::uint64_t state_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace vfpen

#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <string_view>

namespace impact {

inline std::uint64_t fnv1a64(std::string_view s) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

/// Derive a stream seed from (seed, purpose label, stream index).  Streams
/// with different labels or indices are statistically independent, so
/// parallel and serial runs consume identical randomness per stream.
inline std::uint64_t derive_seed(std::uint64_t seed, std::string_view label,
                                 std::uint64_t index = 0) {
    std::uint64_t st = seed ^ fnv1a64(label);
    std::uint64_t a = splitmix64(st);
    st ^= index * 0x9E3779B97F4A7C15ULL;
    std::uint64_t b = splitmix64(st);
    return a ^ (b + 0x9E3779B97F4A7C15ULL + (a << 6) + (a >> 2));
}

/// Deterministic Gaussian stream (Box-Muller over mt19937_64).  The
/// transform is spelled out rather than taken from <random> so that a given
/// (seed, label, index) yields the same draws on every platform.
class GaussianStream {
  public:
    GaussianStream(std::uint64_t seed, std::string_view label, std::uint64_t index = 0)
        : engine_(derive_seed(seed, label, index)) {}

    double uniform() {
        // strictly inside (0, 1)
        return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53;
    }

    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        const double u1 = uniform();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 2.0 * std::numbers::pi * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

  private:
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

}  // namespace impact

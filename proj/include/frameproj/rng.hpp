#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "frameproj/errors.hpp"

namespace frameproj {

// Counter-based deterministic RNG built on the splitmix64 finalizer.
// Output i of a stream is a pure function of (seed, stream, i), so draws are
// reproducible across platforms and independent of call interleaving between
// streams. Run manifests record the algorithm name reported by algorithm_name().

namespace detail {
inline uint64_t splitmix64(uint64_t z) {
    z += 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}
}  // namespace detail

class CounterRng {
public:
    explicit CounterRng(uint64_t seed, uint64_t stream = 0)
        : base_(detail::splitmix64(detail::splitmix64(seed) ^ (stream * 0xD1342543DE82EF95ULL + 0x2545F4914F6CDD1DULL))) {}

    static const char* algorithm_name() { return "splitmix64-counter"; }

    uint64_t next_u64() { return detail::splitmix64(base_ + counter_++ * 0x9E3779B97F4A7C15ULL); }

    /// Uniform double in [0, 1), 53 mantissa bits.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    /// Uniform double in [lo, hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform integer in [0, n). n must be positive.
    uint64_t uniform_int(uint64_t n) {
        if (n == 0) throw ContractError("uniform_int: n must be positive");
        return next_u64() % n;
    }

    /// Standard normal via Box-Muller; one pair of uniforms per draw.
    double normal() {
        const double u1 = static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;  // (0, 1]
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    }

    double normal(double mean, double stddev) { return mean + stddev * normal(); }

    /// Uniform sample on the unit sphere S^{d-1}: normalized independent Gaussians.
    std::vector<double> unit_sphere(size_t d) {
        std::vector<double> v(d);
        double norm2 = 0.0;
        do {
            norm2 = 0.0;
            for (size_t i = 0; i < d; ++i) {
                v[i] = normal();
                norm2 += v[i] * v[i];
            }
        } while (norm2 == 0.0);
        const double inv = 1.0 / std::sqrt(norm2);
        for (double& x : v) x *= inv;
        return v;
    }

    /// In-place Fisher-Yates shuffle.
    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (size_t i = v.size(); i > 1; --i) {
            const size_t j = static_cast<size_t>(uniform_int(i));
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    uint64_t base_;
    uint64_t counter_ = 0;
};

}  // namespace frameproj

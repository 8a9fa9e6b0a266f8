#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace reid {

// mt19937_64 is bit-exact across platforms; the std:: distributions are not,
// so sampling helpers are implemented here to keep seeded runs reproducible
// everywhere.
class Rng {
public:
    explicit Rng(uint64_t seed) : gen_(seed) {}

    uint64_t next_u64() { return gen_(); }

    // Uniform in [0, 1) with 53 bits of precision.
    double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform integer in [0, n), n > 0. Rejection-free modulo bias is
    // negligible for the ranges used here, but do it right anyway.
    uint64_t uniform_index(uint64_t n) {
        const uint64_t limit = n * (UINT64_MAX / n);
        uint64_t v;
        do {
            v = gen_();
        } while (v >= limit);
        return v % n;
    }

    // Standard normal via Box-Muller (deterministic, no cached spare).
    double normal() {
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586477 * u2);
    }

    double normal(double mean, double stddev) { return mean + stddev * normal(); }

    // Fisher-Yates.
    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (size_t i = v.size(); i > 1; --i) {
            std::swap(v[i - 1], v[uniform_index(i)]);
        }
    }

private:
    std::mt19937_64 gen_;
};

}  // namespace reid

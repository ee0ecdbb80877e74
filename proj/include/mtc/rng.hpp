#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace mtc {

// Deterministic random source. mt19937_64 supplies the bit stream; the
// uniform/normal transforms are written out by hand so the numbers are
// identical on every platform and toolchain (std::*_distribution is
// implementation-defined and would break byte-reproducible artifacts).
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    // Uniform in [0, 1) with 53 random mantissa bits.
    double uniform() {
        return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Integer in [0, n) via rejection-free modulo of a fresh draw; n must be
    // small relative to 2^64 (shuffles, pixel jitter), where bias is
    // negligible and determinism is what matters.
    std::uint64_t below(std::uint64_t n) { return engine_() % n; }

    // Standard normal via Box-Muller; caches the second value of each pair.
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = uniform();
        double u2 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        double theta = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(theta);
        has_spare_ = true;
        return r * std::cos(theta);
    }

    double normal(double mean, double stddev) { return mean + stddev * normal(); }

    // Fisher-Yates shuffle, deterministic for a given seed and length.
    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace mtc

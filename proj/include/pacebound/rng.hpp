#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace pacebound::sim {

/// Seeded generator with pinned sample mappings, so identical seeds give
/// identical event streams regardless of the standard library's distribution
/// implementations. Engine: mt19937_64. Uniform doubles take the top 53 bits;
/// normals use the (uncached) Box-Muller transform; exponentials invert the CDF.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    /// Uniform in [0, 1).
    double uniform() {
        return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
    }

    double normal() {
        const double u1 = uniform();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log1p(-u1));
        return r * std::cos(2.0 * kPi * u2);
    }

    double exponential(double mean) { return -mean * std::log1p(-uniform()); }

    double lognormal(double mu, double sigma) {
        return std::exp(mu + sigma * normal());
    }

    std::uint64_t next_u64() { return gen_(); }

private:
    static constexpr double kPi = 3.14159265358979323846;
    std::mt19937_64 gen_;
};

}  // namespace pacebound::sim

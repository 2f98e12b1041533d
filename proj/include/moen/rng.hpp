#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace moen {

/// Seeded deterministic random source. Distributions are realized directly on
/// the mt19937_64 stream (uniform via the top 53 bits, normal via Box-Muller)
/// because the standard-library distribution objects are implementation
/// defined and would break byte-for-byte reproducibility across toolchains.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    /// Uniform on [0, 1).
    double uniform01() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

    /// Uniform on [lo, hi].
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    /// Standard normal via Box-Muller; consumes two uniforms per draw.
    double normal() {
        // (0,1] for the log argument.
        const double u1 = static_cast<double>((gen_() >> 11) + 1) * 0x1.0p-53;
        const double u2 = uniform01();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * kPi * u2);
    }

private:
    static constexpr double kPi = 3.14159265358979323846;
    std::mt19937_64 gen_;
};

}  // namespace moen

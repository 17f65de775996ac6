#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace vibro {

/// Seedable gaussian stream. mt19937_64 gives the same sequence on every
/// platform; the uniform and normal transforms are done by hand because the
/// std distributions are implementation-defined, and traces must reproduce
/// bit-exactly from a seed.
class GaussianStream {
public:
    explicit GaussianStream(std::uint64_t seed) : engine_(seed) {}

    /// Uniform in [0, 1) with 53 random bits.
    double uniform() {
        return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    }

    /// Standard normal via the polar (Marsaglia) method.
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u, v, s;
        do {
            u = 2.0 * uniform() - 1.0;
            v = 2.0 * uniform() - 1.0;
            s = u * u + v * v;
        } while (s >= 1.0 || s == 0.0);
        const double m = std::sqrt(-2.0 * std::log(s) / s);
        spare_ = v * m;
        have_spare_ = true;
        return u * m;
    }

    /// Derive an independent child seed (splitmix64 of seed ^ tag).
    static std::uint64_t derive(std::uint64_t seed, std::uint64_t tag) {
        std::uint64_t z = seed ^ (tag * 0x9e3779b97f4a7c15ULL);
        z += 0x9e3779b97f4a7c15ULL;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

private:
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

/// Hall-effect displacement sensor: unit-gain linear map plus white
/// gaussian noise of standard deviation `sigma_m`.
class HallSensor {
public:
    HallSensor(double sigma_m, std::uint64_t seed) : sigma_(sigma_m), rng_(seed) {}

    double read(double x_m) { return sigma_ == 0.0 ? x_m : x_m + sigma_ * rng_.normal(); }
    double sigma() const { return sigma_; }

private:
    double sigma_;
    GaussianStream rng_;
};

} // namespace vibro

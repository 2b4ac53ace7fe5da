#pragma once

#include <cmath>
#include <cstdint>

namespace coxsub {

/// Counter-based pseudo-random generator (splitmix64 finalizer applied to
/// key + counter * golden gamma).  Output k depends only on (key, k), so any
/// draw can be produced out of order and streams can be split hierarchically
/// with derive().  This keeps every seeded pipeline reproducible regardless
/// of thread schedule.
class CounterRng {
  public:
    explicit CounterRng(std::uint64_t key) : key_(key) {}

    /// New independent stream key; derive(key, i) != derive(key, j) streams.
    static std::uint64_t derive(std::uint64_t key, std::uint64_t stream) {
        return mix(key ^ mix(stream + 0x9E3779B97F4A7C15ULL));
    }

    std::uint64_t bits(std::uint64_t counter) const {
        return mix(key_ + (counter + 1) * 0x9E3779B97F4A7C15ULL);
    }

    /// Uniform on [0, 1) with 53 random bits.
    double uniform(std::uint64_t counter) const {
        return static_cast<double>(bits(counter) >> 11) * 0x1.0p-53;
    }

    std::uint64_t key() const { return key_; }

  private:
    static std::uint64_t mix(std::uint64_t z) {
        z ^= z >> 30;
        z *= 0xBF58476D1CE4E5B9ULL;
        z ^= z >> 27;
        z *= 0x94D049BB133111EBULL;
        z ^= z >> 31;
        return z;
    }

    std::uint64_t key_;
};

/// Sequential view over a CounterRng stream with the usual distributions.
class RngStream {
  public:
    explicit RngStream(std::uint64_t key) : rng_(key) {}

    double uniform() { return rng_.uniform(counter_++); }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Exponential with the given rate, via inversion.
    double exponential(double rate) {
        double u = uniform();
        // guard log(0); uniform() < 1 already holds
        if (u <= 0.0) u = 0x1.0p-53;
        return -std::log(u) / rate;
    }

    /// Standard Exp(1) deviate, handy as a cumulative-hazard threshold.
    double exp1() { return exponential(1.0); }

    /// Normal via Box-Muller (consumes two uniforms); sigma is the SD.
    double normal(double mean, double sigma) {
        double u1 = uniform();
        double u2 = uniform();
        if (u1 <= 0.0) u1 = 0x1.0p-53;
        double z = std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586477 * u2);
        return mean + sigma * z;
    }

    std::uint64_t key() const { return rng_.key(); }

  private:
    CounterRng rng_;
    std::uint64_t counter_ = 0;
};

}  // namespace coxsub

#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace sae {

/// Seeded normal-variate stream with order-independent child derivation.
///
/// A child stream depends only on (parent seed, index), never on how many
/// draws the parent has already produced, so replicate b of a bootstrap or
/// simulation loop sees the same numbers regardless of scheduling.
class RandomStream {
public:
    explicit RandomStream(std::uint64_t seed) : seed_(seed), engine_(mix(seed)) {}

    std::uint64_t seed() const { return seed_; }

    RandomStream child(std::uint64_t index) const {
        return RandomStream(mix(seed_ ^ mix(index + 0x9e3779b97f4a7c15ULL)));
    }

    double normal(double mean, double variance) {
        if (variance == 0.0) return mean;
        return mean + std::sqrt(variance) * standard_(engine_);
    }

    double standard_normal() { return standard_(engine_); }

private:
    // splitmix64 finalizer
    static std::uint64_t mix(std::uint64_t z) {
        z += 0x9e3779b97f4a7c15ULL;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    std::uint64_t seed_;
    std::mt19937_64 engine_;
    std::normal_distribution<double> standard_{0.0, 1.0};
};

}  // namespace sae

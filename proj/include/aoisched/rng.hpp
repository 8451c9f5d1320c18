#pragma once

#include <cstdint>
#include <random>
#include <span>

#include "aoisched/error.hpp"

namespace aoisched {

/// splitmix64 step; used to derive well-separated per-task seeds from a
/// master seed without correlated low bits.
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Seed for the i-th independent task (run, grid point, rollout) of a
/// master-seeded experiment.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t task) {
    return splitmix64(master ^ splitmix64(task + 1));
}

/// Seeded random source. Wraps mt19937_64 with uniform draws that do not
/// depend on std::uniform_real_distribution internals, so a given seed
/// produces the same stream wherever the library is built.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    /// Uniform double in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    bool bernoulli(double p) { return uniform() < p; }

    std::uint64_t bits() { return engine_(); }

    /// Index sampled from an unnormalized nonnegative weight vector.
    std::size_t sample_weighted(std::span<const double> weights) {
        if (weights.empty()) throw ContractError("sample_weighted: empty weight vector");
        double total = 0.0;
        for (double w : weights) total += w;
        double u = uniform() * total;
        double acc = 0.0;
        for (std::size_t i = 0; i + 1 < weights.size(); ++i) {
            acc += weights[i];
            if (u < acc) return i;
        }
        return weights.size() - 1;
    }

private:
    std::mt19937_64 engine_;
};

}  // namespace aoisched

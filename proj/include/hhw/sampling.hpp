#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "hhw/error.hpp"
#include "hhw/model.hpp"

namespace hhw {

// splitmix64 finalizer; mixes a base seed with run coordinates so that each
// run owns an independent, reproducible stream.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0) {
    auto mix = [](std::uint64_t z) {
        z += 0x9e3779b97f4a7c15ULL;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    };
    return mix(mix(mix(seed) ^ a) ^ (b * 0xd1b54a32d192ed03ULL));
}

// Uniform sample from the centered ball of the given radius in R^dim:
// gaussian direction times radius * U^(1/dim).
inline std::vector<double> sample_ball(std::size_t dim, double radius, std::uint64_t seed) {
    if (dim == 0)
        throw domain_error("sample_ball: dimension must be positive");
    if (!(radius >= 0.0))
        throw domain_error("sample_ball: radius must be nonnegative");
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> uniform(0.0, 1.0);
    std::vector<double> x(dim);
    double norm2 = 0.0;
    do {
        norm2 = 0.0;
        for (double& v : x) {
            v = normal(rng);
            norm2 += v * v;
        }
    } while (norm2 == 0.0);
    const double r = radius * std::pow(uniform(rng), 1.0 / static_cast<double>(dim));
    const double scale = r / std::sqrt(norm2);
    for (double& v : x)
        v *= scale;
    return x;
}

inline NetworkState random_state(std::size_t n, bool memristive, double radius, std::uint64_t seed) {
    const auto flat = sample_ball(2 * n + (memristive ? 1 : 0), radius, seed);
    return NetworkState::from_flat(n, flat);
}

} // namespace hhw

#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <vector>

#include "fedu/types.hpp"

namespace fedu {

// splitmix64 finalizer; used to turn (seed, tag, index) tuples into
// well-separated stream seeds.
inline std::uint64_t mix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ull;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag) {
    return mix64(seed ^ mix64(tag));
}

inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag, std::uint64_t index) {
    return derive_seed(derive_seed(seed, tag), index);
}

// Stream tags; combined with the master seed they name every random decision
// in a run, so results never depend on scheduling or call interleaving.
namespace stream {
inline constexpr std::uint64_t kData = 1;
inline constexpr std::uint64_t kPartition = 2;
inline constexpr std::uint64_t kServerInit = 3;
inline constexpr std::uint64_t kSelection = 4;
inline constexpr std::uint64_t kClientTrain = 5;
inline constexpr std::uint64_t kEval = 6;
}  // namespace stream

// Deterministic generator. Draws uniforms/normals/bounded ints from raw
// mt19937_64 output instead of std::*_distribution so that replay does not
// depend on the standard library implementation.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    std::uint64_t next_u64() { return gen_(); }

    // Uniform in [0, 1) with 53 random bits.
    Scalar uniform() { return static_cast<Scalar>(next_u64() >> 11) * 0x1.0p-53; }

    Scalar uniform(Scalar lo, Scalar hi) { return lo + (hi - lo) * uniform(); }

    // Box-Muller without spare caching: replay is independent of call parity.
    Scalar normal() {
        Scalar u1 = 1.0 - uniform();  // (0, 1], keeps the log finite
        Scalar u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi_v<Scalar> * u2);
    }

    Scalar normal(Scalar mean, Scalar stddev) { return mean + stddev * normal(); }

    // Unbiased draw from [0, n) by rejection.
    std::uint64_t uniform_index(std::uint64_t n) {
        const std::uint64_t limit = n * (UINT64_MAX / n);
        std::uint64_t x;
        do {
            x = next_u64();
        } while (x >= limit);
        return x % n;
    }

    template <typename T>
    void shuffle(std::vector<T>& values) {
        for (std::size_t i = values.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(uniform_index(i));
            std::swap(values[i - 1], values[j]);
        }
    }

    std::vector<Index> permutation(Index n) {
        std::vector<Index> order(static_cast<std::size_t>(n));
        for (Index i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
        shuffle(order);
        return order;
    }

private:
    std::mt19937_64 gen_;
};

}  // namespace fedu

#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <utility>
#include <vector>

namespace sissle {

// Seeded random source used everywhere in the simulator.
//
// std::mt19937_64 is fully specified by the standard, but the std::
// distributions are not, so the mapping from raw draws to integers, reals and
// permutations lives here. That keeps a (config, seed) pair reproducible across
// standard library implementations.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next() { return engine_(); }

    // Uniform integer in [lo, hi], unbiased (rejection on the top range).
    std::uint64_t uniform_int(std::uint64_t lo, std::uint64_t hi) {
        const std::uint64_t span = hi - lo;
        if (span == ~std::uint64_t{0}) return next();
        const std::uint64_t range = span + 1;
        const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % range);
        std::uint64_t x;
        do {
            x = next();
        } while (x >= limit);
        return lo + x % range;
    }

    std::size_t index(std::size_t n) { return static_cast<std::size_t>(uniform_int(0, n - 1)); }

    // Uniform real in [lo, hi).
    double uniform_real(double lo, double hi) {
        const double unit = static_cast<double>(next() >> 11) * 0x1.0p-53;
        return lo + (hi - lo) * unit;
    }

    bool bernoulli(double p) { return uniform_real(0.0, 1.0) < p; }

    template <class T>
    void shuffle(std::span<T> items) {
        for (std::size_t i = items.size(); i > 1; --i) {
            std::swap(items[i - 1], items[index(i)]);
        }
    }

    // k distinct elements drawn uniformly without replacement, in draw order.
    template <class T>
    std::vector<T> sample(std::span<const T> pool, std::size_t k) {
        std::vector<T> scratch(pool.begin(), pool.end());
        if (k > scratch.size()) k = scratch.size();
        for (std::size_t i = 0; i < k; ++i) {
            std::swap(scratch[i], scratch[i + index(scratch.size() - i)]);
        }
        scratch.resize(k);
        return scratch;
    }

    // Independent child stream; used to keep sub-phases stable when an
    // unrelated phase changes how many draws it consumes.
    Rng fork(std::uint64_t stream) { return Rng(splitmix64(next() ^ splitmix64(stream))); }

    static std::uint64_t splitmix64(std::uint64_t x) {
        x += 0x9e3779b97f4a7c15ULL;
        x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
        x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
        return x ^ (x >> 31);
    }

private:
    std::mt19937_64 engine_;
};

}  // namespace sissle

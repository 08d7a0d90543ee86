#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace sissle {

using NodeId = std::uint32_t;

// Simulated time in microseconds. Integer so that event ordering is exact and
// identical on every platform.
using SimTime = std::int64_t;

constexpr SimTime kMicrosPerMilli = 1000;

constexpr SimTime from_ms(double ms) { return static_cast<SimTime>(std::llround(ms * kMicrosPerMilli)); }
constexpr double to_ms(SimTime t) { return static_cast<double>(t) / kMicrosPerMilli; }

// Raised when a configuration violates a documented invariant. Always thrown
// before any simulation work starts.
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

// Integer square root; returns 0 when n is not a perfect square.
constexpr std::uint32_t exact_sqrt(std::uint32_t n) {
    std::uint32_t r = 0;
    while ((r + 1) * (r + 1) <= n) ++r;
    return r * r == n ? r : 0;
}

// floor(pct * count / 100) with a small guard so that 20% of 256 is 51 and not
// 51.19999 -> 51 by accident of representation in the other direction.
inline std::uint32_t percent_of(double pct, std::uint32_t count) {
    return static_cast<std::uint32_t>(std::floor(pct * count / 100.0 + 1e-9));
}

inline std::uint32_t percent_of_ceil(double pct, std::uint32_t count) {
    return static_cast<std::uint32_t>(std::ceil(pct * count / 100.0 - 1e-9));
}

}  // namespace sissle

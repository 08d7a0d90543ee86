#include <bit>

#include "sissle/kernels/bitset_kernels.hpp"

namespace sissle::kernels {
namespace {

void or_into(std::uint64_t* dst, const std::uint64_t* src, std::size_t words) {
    for (std::size_t i = 0; i < words; ++i) dst[i] |= src[i];
}

void and_not(std::uint64_t* dst, const std::uint64_t* a, const std::uint64_t* b, std::size_t words) {
    for (std::size_t i = 0; i < words; ++i) dst[i] = a[i] & ~b[i];
}

bool or_and_not(std::uint64_t* dst, const std::uint64_t* a, const std::uint64_t* b, std::size_t words) {
    std::uint64_t changed = 0;
    for (std::size_t i = 0; i < words; ++i) {
        const std::uint64_t add = a[i] & ~b[i] & ~dst[i];
        changed |= add;
        dst[i] |= add;
    }
    return changed != 0;
}

std::size_t popcount(const std::uint64_t* a, std::size_t words) {
    std::size_t n = 0;
    for (std::size_t i = 0; i < words; ++i) n += static_cast<std::size_t>(std::popcount(a[i]));
    return n;
}

std::size_t and_popcount(const std::uint64_t* a, const std::uint64_t* b, std::size_t words) {
    std::size_t n = 0;
    for (std::size_t i = 0; i < words; ++i) n += static_cast<std::size_t>(std::popcount(a[i] & b[i]));
    return n;
}

bool any(const std::uint64_t* a, std::size_t words) {
    for (std::size_t i = 0; i < words; ++i) {
        if (a[i]) return true;
    }
    return false;
}

}  // namespace

const BitsetKernels& scalar_kernels() {
    static const BitsetKernels k{"scalar", or_into, and_not, or_and_not, popcount, and_popcount, any};
    return k;
}

}  // namespace sissle::kernels

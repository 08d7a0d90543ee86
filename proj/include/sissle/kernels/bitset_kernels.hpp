#pragma once

// Word-level kernels behind NodeBitset. Every kernel has a scalar reference
// implementation and, on x86-64, an AVX2 variant; the variant is chosen once at
// startup from CPUID. All kernels are exact integer operations, so the two
// variants must agree bit-for-bit (see tests/kernels_test.cpp).

#include <cstddef>
#include <cstdint>
#include <string_view>

namespace sissle::kernels {

struct BitsetKernels {
    std::string_view name;
    // dst |= src
    void (*or_into)(std::uint64_t* dst, const std::uint64_t* src, std::size_t words);
    // dst = a & ~b
    void (*and_not)(std::uint64_t* dst, const std::uint64_t* a, const std::uint64_t* b, std::size_t words);
    // dst |= a & ~b ; returns true if any bit of dst changed
    bool (*or_and_not)(std::uint64_t* dst, const std::uint64_t* a, const std::uint64_t* b, std::size_t words);
    std::size_t (*popcount)(const std::uint64_t* a, std::size_t words);
    std::size_t (*and_popcount)(const std::uint64_t* a, const std::uint64_t* b, std::size_t words);
    bool (*any)(const std::uint64_t* a, std::size_t words);
};

const BitsetKernels& scalar_kernels();

// nullptr when the binary was built without AVX2 support or the CPU lacks it.
const BitsetKernels* avx2_kernels();

// Selected implementation. SISSLE_SIMD=scalar in the environment forces the
// reference path.
const BitsetKernels& active_kernels();

}  // namespace sissle::kernels

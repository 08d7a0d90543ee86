// Compiled with -mavx2; only reached after a CPUID check in dispatch.cpp.

#include <immintrin.h>

#include <bit>

#include "sissle/kernels/bitset_kernels.hpp"

namespace sissle::kernels {
namespace {

inline __m256i load(const std::uint64_t* p) { return _mm256_loadu_si256(reinterpret_cast<const __m256i*>(p)); }
inline void store(std::uint64_t* p, __m256i v) { _mm256_storeu_si256(reinterpret_cast<__m256i*>(p), v); }

// Nibble-table popcount, accumulated per 64-bit lane with SAD.
inline __m256i popcnt_lanes(__m256i v) {
    const __m256i table = _mm256_setr_epi8(0, 1, 1, 2, 1, 2, 2, 3, 1, 2, 2, 3, 2, 3, 3, 4,
                                           0, 1, 1, 2, 1, 2, 2, 3, 1, 2, 2, 3, 2, 3, 3, 4);
    const __m256i low_mask = _mm256_set1_epi8(0x0f);
    const __m256i lo = _mm256_and_si256(v, low_mask);
    const __m256i hi = _mm256_and_si256(_mm256_srli_epi16(v, 4), low_mask);
    const __m256i cnt = _mm256_add_epi8(_mm256_shuffle_epi8(table, lo), _mm256_shuffle_epi8(table, hi));
    return _mm256_sad_epu8(cnt, _mm256_setzero_si256());
}

inline std::size_t horizontal_sum(__m256i acc) {
    alignas(32) std::uint64_t lanes[4];
    _mm256_store_si256(reinterpret_cast<__m256i*>(lanes), acc);
    return static_cast<std::size_t>(lanes[0] + lanes[1] + lanes[2] + lanes[3]);
}

void or_into(std::uint64_t* dst, const std::uint64_t* src, std::size_t words) {
    std::size_t i = 0;
    for (; i + 4 <= words; i += 4) store(dst + i, _mm256_or_si256(load(dst + i), load(src + i)));
    for (; i < words; ++i) dst[i] |= src[i];
}

void and_not(std::uint64_t* dst, const std::uint64_t* a, const std::uint64_t* b, std::size_t words) {
    std::size_t i = 0;
    for (; i + 4 <= words; i += 4) store(dst + i, _mm256_andnot_si256(load(b + i), load(a + i)));
    for (; i < words; ++i) dst[i] = a[i] & ~b[i];
}

bool or_and_not(std::uint64_t* dst, const std::uint64_t* a, const std::uint64_t* b, std::size_t words) {
    __m256i changed = _mm256_setzero_si256();
    std::size_t i = 0;
    for (; i + 4 <= words; i += 4) {
        const __m256i d = load(dst + i);
        const __m256i add = _mm256_andnot_si256(d, _mm256_andnot_si256(load(b + i), load(a + i)));
        changed = _mm256_or_si256(changed, add);
        store(dst + i, _mm256_or_si256(d, add));
    }
    std::uint64_t tail = 0;
    for (; i < words; ++i) {
        const std::uint64_t add = a[i] & ~b[i] & ~dst[i];
        tail |= add;
        dst[i] |= add;
    }
    return !_mm256_testz_si256(changed, changed) || tail != 0;
}

std::size_t popcount(const std::uint64_t* a, std::size_t words) {
    __m256i acc = _mm256_setzero_si256();
    std::size_t i = 0;
    for (; i + 4 <= words; i += 4) acc = _mm256_add_epi64(acc, popcnt_lanes(load(a + i)));
    std::size_t n = horizontal_sum(acc);
    for (; i < words; ++i) n += static_cast<std::size_t>(std::popcount(a[i]));
    return n;
}

std::size_t and_popcount(const std::uint64_t* a, const std::uint64_t* b, std::size_t words) {
    __m256i acc = _mm256_setzero_si256();
    std::size_t i = 0;
    for (; i + 4 <= words; i += 4) {
        acc = _mm256_add_epi64(acc, popcnt_lanes(_mm256_and_si256(load(a + i), load(b + i))));
    }
    std::size_t n = horizontal_sum(acc);
    for (; i < words; ++i) n += static_cast<std::size_t>(std::popcount(a[i] & b[i]));
    return n;
}

bool any(const std::uint64_t* a, std::size_t words) {
    std::size_t i = 0;
    for (; i + 4 <= words; i += 4) {
        const __m256i v = load(a + i);
        if (!_mm256_testz_si256(v, v)) return true;
    }
    for (; i < words; ++i) {
        if (a[i]) return true;
    }
    return false;
}

}  // namespace

const BitsetKernels& avx2_kernels_impl() {
    static const BitsetKernels k{"avx2", or_into, and_not, or_and_not, popcount, and_popcount, any};
    return k;
}

}  // namespace sissle::kernels
